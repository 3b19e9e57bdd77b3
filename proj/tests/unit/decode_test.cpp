#include <gtest/gtest.h>

#include <cmath>

#include "../support/model_gradcheck.hpp"
#include "../support/toy_decoder.hpp"

namespace xst::decode {
namespace {

using testing::ToyDecoder;

TEST(LengthPenalty, Values) {
  EXPECT_DOUBLE_EQ(length_penalty(1, 0.6), 1.0);
  EXPECT_DOUBLE_EQ(length_penalty(1, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(length_penalty(17, 0.0), 1.0);
  EXPECT_NEAR(length_penalty(6, 0.6), 1.4386, 1e-4);
  EXPECT_THROW(length_penalty(0, 0.6), DecodeError);
}

TEST(Beam, ConfigValidation) {
  ToyDecoder m(1);
  EXPECT_THROW(beam_search(m, {0, 0.6, 3}), DecodeError);
  EXPECT_THROW(beam_search(m, {5, 1.5, 3}), DecodeError);
}

TEST(Beam, ExhaustiveOracleOnToyModel) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ToyDecoder m(seed);
    std::size_t n = 0;
    auto want = testing::exhaustive_best(m, 3, 0.6, &n);
    EXPECT_EQ(n, 27u + 9u + 3u);
    auto got = beam_search(m, {27, 0.6, 3}).best;
    EXPECT_EQ(got.tokens, want.tokens) << "seed " << seed;
    EXPECT_NEAR(got.score, want.score, 1e-12);
  }
}

TEST(Beam, ExhaustiveOracleLongerAndSharper) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    ToyDecoder m(seed, 6, 0.7);
    for (double alpha : {0.0, 0.6, 1.0}) {
      auto want = testing::exhaustive_best(m, 4, alpha);
      EXPECT_EQ(beam_search(m, {256, alpha, 4}).best.tokens, want.tokens) << seed << " " << alpha;
    }
  }
}

TEST(Beam, BeamOneEqualsGreedy) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ToyDecoder m(seed);
    auto g = greedy_decode(m, 6);
    auto b = beam_search(m, {1, 0.6, 6}).best;
    EXPECT_EQ(g.tokens, b.tokens);
    EXPECT_NEAR(g.log_prob, b.log_prob, 1e-12);
  }
}

TEST(Beam, BeamScoreAtLeastGreedy) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ToyDecoder m(seed, 6);
    auto g = greedy_decode(m, 8);
    auto b = beam_search(m, {5, 0.6, 8}).best;
    if (g.finished && b.finished) {
      EXPECT_GE(b.score, g.score - 1e-12);
    }
  }
}

TEST(Beam, MonotoneLogProbAndFinishedNeverExtended) {
  ToyDecoder m(3, 6);
  auto r = beam_search(m, {5, 0.6, 7});
  for (const auto& h : r.nbest) {
    EXPECT_LE(h.log_prob, 0.0);
    EXPECT_LE(h.length(), 7u);
    for (std::size_t i = 1; i + 1 < h.tokens.size(); ++i) EXPECT_NE(h.tokens[i], 2);
    for (int t : h.tokens) EXPECT_NE(t, 0);
  }
}

// Assigns probability one to a fixed sequence.
class PointMass : public StepModel {
 public:
  std::size_t vocab_size() const override { return 6; }
  std::size_t encoder_length() const override { return 1; }
  std::any initial_state() override { return std::size_t{0}; }
  std::vector<StepOutput> step(const std::vector<const std::any*>& states, const std::vector<int>&) override {
    const std::vector<int> seq{4, 3, 5, 2};
    std::vector<StepOutput> out;
    for (const auto* s : states) {
      const auto pos = std::any_cast<std::size_t>(*s);
      std::vector<double> lp(6, -std::numeric_limits<double>::infinity());
      lp[seq[pos]] = 0.0;
      out.push_back({lp, pos + 1, {}});
    }
    return out;
  }
};

TEST(Beam, PointMassSequence) {
  PointMass m;
  auto r = beam_search(m, {5, 0.6, 10});
  EXPECT_EQ(r.best.output(), (std::vector<int>{4, 3, 5}));
  EXPECT_NEAR(r.best.log_prob, 0.0, 1e-12);
  auto g = greedy_decode(m, 10);
  EXPECT_TRUE(g.finished);
  EXPECT_EQ(g.length(), 4u);
}

TEST(Greedy, NeverExceedsMaxLen) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyDecoder m(seed, 8, 0.1);
    EXPECT_LE(greedy_decode(m, 3).length(), 3u);
  }
}

TEST(Seq2SeqAdapter, DecodesTinyModelDeterministically) {
  seq2seq::Model<float> model(testing::tiny_model_config(9), 4);
  numcore::RngStream rng(5, "adapter");
  auto f = testing::random_utterance(rng, "u", 20);
  Seq2SeqStepModel a(model, f), b(model, f);
  auto ra = beam_search(a, {});
  auto rb = beam_search(b, {});
  EXPECT_EQ(ra.best.tokens, rb.best.tokens);
  EXPECT_LE(ra.best.length(), 2 * 5 + 10u);
  Seq2SeqStepModel c(model, f);
  Seq2SeqStepModel d(model, f);
  EXPECT_EQ(greedy_decode(c).tokens, beam_search(d, {1, 0.6, 0}).best.tokens);
}

}  // namespace
}  // namespace xst::decode
