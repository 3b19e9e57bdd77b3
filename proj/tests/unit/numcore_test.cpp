#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../support/primitive_checks.hpp"
#include "xst/numcore/adam.hpp"
#include "xst/numcore/init.hpp"
#include "xst/numcore/ops.hpp"

namespace xst::numcore {
namespace {

using testing::random_tensor;

TEST(Primitives, SoftmaxOfEqualLogitsIsUniform) {
  Graph<double> g(false);
  auto y = ops::softmax(g.constant(Tensor<double>({3}, {1, 1, 1})));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y.value()[i], 1.0 / 3.0, 1e-12);
}

TEST(Primitives, SoftmaxRowsAreDistributions) {
  RngStream rng(7, "softmax");
  for (int trial = 0; trial < 20; ++trial) {
    Graph<float> g(false);
    auto x = random_tensor({4, 9}, rng, -30, 30).cast<float>();
    auto y = ops::softmax(g.constant(x));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0;
      for (std::size_t j = 0; j < 9; ++j) {
        EXPECT_GE(y.value().at(r, j), 0.0f);
        total += y.value().at(r, j);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Primitives, Relu) {
  Graph<double> g(false);
  auto y = ops::relu(g.constant(Tensor<double>({2}, {-2.5, 3.0})));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[1], 3.0);
}

// Output positions of a strided window: t = 0, s, 2s, ... while t < T.
std::size_t enumerate_strided_positions(std::size_t frames, std::size_t stride) {
  std::size_t n = 0;
  for (std::size_t t = 0; t < frames; t += stride) ++n;
  return n;
}

TEST(Primitives, ConvOutputLengthIsCeilOfStride) {
  EXPECT_EQ(enumerate_strided_positions(7, 2), 4u);
  for (std::size_t t = 1; t < 40; ++t) {
    for (std::size_t s = 1; s < 5; ++s) {
      Graph<float> g(false);
      auto x = g.constant(Tensor<float>({1, t, 2}, 1.0f));
      auto w = g.constant(Tensor<float>({3, 9, 2}, 0.5f));
      auto b = g.constant(Tensor<float>({3}));
      auto y = ops::conv1d(x, w, b, s);
      EXPECT_EQ(y.shape()[1], enumerate_strided_positions(t, s));
    }
  }
}

TEST(Primitives, ConvMatchesDirectSum) {
  RngStream rng(3, "conv");
  const std::size_t B = 2, Tn = 11, C = 3, O = 4, K = 5, S = 2;
  auto x = random_tensor({B, Tn, C}, rng);
  auto w = random_tensor({O, K, C}, rng);
  auto bias = random_tensor({O}, rng);
  Graph<double> g(false);
  auto y = ops::conv1d(g.constant(x), g.constant(w), g.constant(bias), S);
  const long pad = (K - 1) / 2;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < y.shape()[1]; ++t)
      for (std::size_t o = 0; o < O; ++o) {
        double acc = bias[o];
        for (std::size_t k = 0; k < K; ++k) {
          const long src = static_cast<long>(t * S + k) - pad;
          if (src < 0 || src >= static_cast<long>(Tn)) continue;
          for (std::size_t c = 0; c < C; ++c) acc += w[(o * K + k) * C + c] * x[(b * Tn + src) * C + c];
        }
        EXPECT_NEAR(y.value()[(b * y.shape()[1] + t) * O + o], acc, 1e-12);
      }
}

TEST(Primitives, ShapeErrorsNameThePrimitive) {
  Graph<float> g;
  auto a = g.constant(Tensor<float>({2, 3}));
  auto b = g.constant(Tensor<float>({4, 2}));
  try {
    ops::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2, 3]"), std::string::npos);
  }
  EXPECT_THROW(ops::conv1d(g.constant(Tensor<float>({1, 5, 3})), g.constant(Tensor<float>({2, 3, 4})),
                           g.constant(Tensor<float>({2})), 2),
               ShapeError);
  EXPECT_THROW(ops::embedding(g.constant(Tensor<float>({3, 2})), std::vector<int>{3}), ShapeError);
}

TEST(Primitives, GradientsMatchFiniteDifferences) {
  for (const auto& check : testing::primitive_checks()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto rep = check.run(seed);
      EXPECT_LT(rep.max_rel_error, 1e-4) << check.name << " seed " << seed;
    }
  }
}

TEST(Primitives, BatchNormTrainingNormalizesChannels) {
  RngStream rng(11, "bn");
  const std::size_t B = 3, Tn = 20, C = 4;
  Tensor<double> x({B, Tn, C});
  for (auto& v : x.values()) v = rng.normal(3.0, 2.0);
  std::vector<std::size_t> lens{20, 13, 7};
  Graph<double> g(false);
  Tensor<double> rm({C}), rv({C}, 1.0);
  auto y = ops::batch_norm(g.constant(x), g.constant(Tensor<double>({C}, 1.0)), g.constant(Tensor<double>({C})), rm,
                           rv, lens, {});
  for (std::size_t c = 0; c < C; ++c) {
    double m = 0, v = 0, n = 0;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lens[b]; ++t) {
        m += y.value()[(b * Tn + t) * C + c];
        n += 1;
      }
    m /= n;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lens[b]; ++t) v += std::pow(y.value()[(b * Tn + t) * C + c] - m, 2);
    v /= n;
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
  // padded positions are exact zeros
  EXPECT_EQ(y.value()[(1 * Tn + 15) * C + 2], 0.0);
  // running mean moved towards the batch mean
  EXPECT_GT(rm[0], 0.0);
}

TEST(Backward, LinearCaseGivesOuterProductStructure) {
  ParamSet<double> params;
  auto& w = params.add("w", Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}), ParamGroup::output);
  Graph<double> g;
  auto x = g.constant(Tensor<double>({1, 3}, {0.5, -1.0, 2.0}));
  g.backward(ops::sum(ops::linear(x, g.param(w))));
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_DOUBLE_EQ(w.grad.at(r, 0), 0.5);
    EXPECT_DOUBLE_EQ(w.grad.at(r, 1), -1.0);
    EXPECT_DOUBLE_EQ(w.grad.at(r, 2), 2.0);
  }
}

TEST(Backward, UnreachableParameterHasZeroGradient) {
  ParamSet<float> params;
  auto& used = params.add("used", Tensor<float>({2}, 1.0f), ParamGroup::decoder);
  auto& unused = params.add("unused", Tensor<float>({3}, 1.0f), ParamGroup::decoder);
  Graph<float> g;
  g.param(unused);
  g.backward(ops::sum(ops::tanh(g.param(used))));
  for (float v : unused.grad.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_NE(used.grad[0], 0.0f);
}

TEST(Backward, RejectsNonScalarLoss) {
  Graph<float> g;
  auto x = g.variable(Tensor<float>({2}, 1.0f));
  EXPECT_THROW(g.backward(ops::tanh(x)), ShapeError);
}

TEST(Backward, ReportsFirstNonFiniteNode) {
  Graph<double> g;
  auto x = g.variable(Tensor<double>({2}, {1.0, 2.0}));
  auto big = ops::scale(x, 1e307);
  auto inf = ops::scale(big, 100.0);
  try {
    g.backward(ops::sum(inf));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("#2 (scale)"), std::string::npos) << e.what();
  }
}

TEST(Adam, FirstStepMovesEachCoordinateByAlpha) {
  ParamSet<double> params;
  auto& p = params.add("p", Tensor<double>({3}, {0.0, 1.0, -2.0}), ParamGroup::cnn);
  p.grad = Tensor<double>({3}, {0.3, -5.0, 1e-3});
  AdamState<double> st;
  st.config.weight_decay = 0.0;
  adam_step(params, st);
  // m_hat / sqrt(v_hat) = sign(g) on the first step
  EXPECT_NEAR(p.value[0], 0.0 - 0.001, 1e-9);
  EXPECT_NEAR(p.value[1], 1.0 + 0.001, 1e-9);
  EXPECT_NEAR(p.value[2], -2.0 - 0.001, 1e-7);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientWithoutDecayIsFixedPoint) {
  ParamSet<float> params;
  auto& p = params.add("p", Tensor<float>({4}, {0.1f, -0.2f, 3.0f, 0.0f}), ParamGroup::cnn);
  auto before = p.value;
  AdamState<float> st;
  st.config.weight_decay = 0.0;
  for (int i = 0; i < 5; ++i) adam_step(params, st);
  EXPECT_EQ(p.value, before);
}

TEST(Adam, WeightDecayActsAsGradient) {
  ParamSet<double> params;
  auto& p = params.add("p", Tensor<double>({1}, {1.0}), ParamGroup::cnn);
  AdamState<double> st;  // default decay 1e-4
  adam_step(params, st);
  // effective gradient 1e-4 > 0: first step moves by alpha * g / (|g| + eps)
  const double g = 1e-4;
  EXPECT_NEAR(p.value[0], 1.0 - 0.001 * g / (g + 1e-8), 1e-12);
  EXPECT_LT(p.value[0], 1.0);
}

TEST(Adam, RejectsNonPositiveAlpha) {
  ParamSet<float> params;
  params.add("p", Tensor<float>({1}), ParamGroup::cnn);
  AdamState<float> st;
  st.config.alpha = 0.0;
  EXPECT_THROW(adam_step(params, st), std::invalid_argument);
}

TEST(Adam, SkipsFrozenEntries) {
  ParamSet<float> params;
  auto& p = params.add("running", Tensor<float>({2}, 1.0f), ParamGroup::cnn, false);
  p.grad.fill(1.0f);
  AdamState<float> st;
  adam_step(params, st);
  EXPECT_EQ(p.value[0], 1.0f);
}

TEST(Init, HeNormalVariance) {
  RngStream rng(5, "init");
  auto t = init_param<double>({100000}, InitScheme::he_normal, 512, rng);
  double m = 0, v = 0;
  for (double x : t.values()) m += x;
  m /= t.size();
  for (double x : t.values()) v += (x - m) * (x - m);
  v /= (t.size() - 1);
  EXPECT_NEAR(v, 2.0 / 512.0, 0.05 * 2.0 / 512.0);
}

TEST(Init, LecunAndUnitNormalVariance) {
  for (auto [scheme, expected] : {std::pair{InitScheme::lecun_normal, 1.0 / 64.0}, std::pair{InitScheme::unit_normal, 1.0}}) {
    RngStream rng(6, "init");
    auto t = init_param<double>({100000}, scheme, 64, rng);
    double m = 0, v = 0;
    for (double x : t.values()) m += x;
    m /= t.size();
    for (double x : t.values()) v += (x - m) * (x - m);
    v /= (t.size() - 1);
    EXPECT_NEAR(v, expected, 0.05 * expected);
  }
}

TEST(Init, SameSeedSameTensor) {
  RngStream a(9, "init"), b(9, "init"), c(9, "other");
  auto ta = init_param<float>({8, 8}, InitScheme::he_normal, 8, a);
  auto tb = init_param<float>({8, 8}, InitScheme::he_normal, 8, b);
  auto tc = init_param<float>({8, 8}, InitScheme::he_normal, 8, c);
  EXPECT_EQ(ta, tb);
  EXPECT_FALSE(ta == tc);
}

TEST(Init, RejectsNonPositiveFanIn) {
  RngStream rng(1, "init");
  EXPECT_THROW(init_param<float>({2}, InitScheme::he_normal, 0, rng), std::invalid_argument);
  EXPECT_THROW(init_param<float>({2}, InitScheme::lecun_normal, -3, rng), std::invalid_argument);
}

TEST(Dropout, IdentityCases) {
  RngStream rng(1, "dropout");
  Graph<float> g;
  auto x = g.constant(Tensor<float>({3, 4}, 2.0f));
  EXPECT_EQ(dropout(x, 0.0, rng, true).value(), x.value());
  EXPECT_EQ(dropout(x, 0.5, rng, false).value(), x.value());
  EXPECT_THROW(dropout(x, 1.0, rng, true), std::invalid_argument);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  RngStream rng(2, "dropout");
  Graph<double> g(false);
  Tensor<double> x({100000});
  RngStream data(3, "data");
  for (auto& v : x.values()) v = data.uniform(0.5, 1.5);
  auto y = dropout(g.constant(x), 0.3, rng, true);
  const double mx = std::accumulate(x.values().begin(), x.values().end(), 0.0) / x.size();
  const double my = std::accumulate(y.value().values().begin(), y.value().values().end(), 0.0) / x.size();
  EXPECT_NEAR(my, mx, 0.02 * mx);
}

TEST(Dropout, VariationalMaskSharedAlongAxis) {
  RngStream rng(4, "dropout");
  auto mask = dropout_mask<float>({2, 6, 5}, 0.5, rng, 1);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t t = 1; t < 6; ++t) EXPECT_EQ(mask[(b * 6 + t) * 5 + c], mask[(b * 6) * 5 + c]);
}

TEST(Rng, StreamsReplayAndDiffer) {
  RngStream a(42, "x"), b(42, "x"), c(42, "y");
  for (int i = 0; i < 10; ++i) {
    const double va = a.uniform();
    EXPECT_EQ(va, b.uniform());
    EXPECT_NE(va, c.uniform());
  }
}

TEST(ParamSet, ClipGlobalNorm) {
  ParamSet<float> ps;
  auto& a = ps.add("a", Tensor<float>({2}), ParamGroup::cnn);
  a.grad = Tensor<float>({2}, {30.0f, 40.0f});
  EXPECT_NEAR(ps.clip_grad_norm(5.0), 50.0, 1e-4);
  EXPECT_NEAR(ps.grad_norm(), 5.0, 1e-4);
  EXPECT_THROW(ps.add("a", Tensor<float>({1}), ParamGroup::cnn), std::invalid_argument);
}

}  // namespace
}  // namespace xst::numcore
