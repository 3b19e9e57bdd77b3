#include "xst/numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace xst::numcore::ops {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

[[noreturn]] void fail(const char* prim, const std::string& what) {
  throw ShapeError(std::string(prim) + ": " + what);
}

void need_rank(const char* prim, const char* arg, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    fail(prim, std::string(arg) + " must have rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

void need_same(const char* prim, const Shape& a, const Shape& b) {
  if (a != b) fail(prim, "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
void same_graph(const char* prim, Var<T> a, Var<T> b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) fail(prim, "inputs live on different tapes");
}

template <typename T>
T sigm(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t stride) {
  return (length + stride - 1) / stride;
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  same_graph("matmul", a, b);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  need_rank("matmul", "lhs", as, 2);
  need_rank("matmul", "rhs", bs, 2);
  if (as[1] != bs[0]) {
    fail("matmul", "inner dimensions differ: " + shape_str(as) + " x " + shape_str(bs));
  }
  const auto m = as[0], k = as[1], n = bs[1];
  Tensor<T> out({m, n});
  MapM<T>(out.data(), m, n).noalias() = CMapM<T>(a.value().data(), m, k) * CMapM<T>(b.value().data(), k, n);
  const auto ia = a.id(), ib = b.id();
  return a.graph().record("matmul", std::move(out), {a, b}, [ia, ib, m, k, n](Graph<T>& g, std::size_t self) {
    CMapM<T> dy(g.grad(self).data(), m, n);
    if (g.requires_grad(ia)) {
      MapM<T>(g.grad(ia).data(), m, k).noalias() += dy * CMapM<T>(g.value(ib).data(), k, n).transpose();
    }
    if (g.requires_grad(ib)) {
      MapM<T>(g.grad(ib).data(), k, n).noalias() += CMapM<T>(g.value(ia).data(), m, k).transpose() * dy;
    }
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  same_graph("linear", x, w);
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  need_rank("linear", "weight", ws, 2);
  const auto out_dim = ws[0], in_dim = ws[1];
  if (xs.back() != in_dim) {
    fail("linear", "input " + shape_str(xs) + " does not match weight " + shape_str(ws));
  }
  if (bias.valid()) {
    same_graph("linear", x, bias);
    if (bias.shape() != Shape{out_dim}) {
      fail("linear", "bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(ws));
    }
  }
  const auto rows = x.value().size() / in_dim;
  Shape os = xs;
  os.back() = out_dim;
  Tensor<T> out(os);
  MapM<T> y(out.data(), rows, out_dim);
  y.noalias() = CMapM<T>(x.value().data(), rows, in_dim) * CMapM<T>(w.value().data(), out_dim, in_dim).transpose();
  if (bias.valid()) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.value().data(), out_dim);
    y.rowwise() += bv;
  }
  const auto ix = x.id(), iw = w.id();
  const bool has_bias = bias.valid();
  const auto ib = has_bias ? bias.id() : 0;
  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return x.graph().record(
      "linear", std::move(out), std::span<const Var<T>>(inputs),
      [ix, iw, ib, has_bias, rows, in_dim, out_dim](Graph<T>& g, std::size_t self) {
        CMapM<T> dy(g.grad(self).data(), rows, out_dim);
        if (g.requires_grad(ix)) {
          MapM<T>(g.grad(ix).data(), rows, in_dim).noalias() += dy * CMapM<T>(g.value(iw).data(), out_dim, in_dim);
        }
        if (g.requires_grad(iw)) {
          MapM<T>(g.grad(iw).data(), out_dim, in_dim).noalias() +=
              dy.transpose() * CMapM<T>(g.value(ix).data(), rows, in_dim);
        }
        if (has_bias && g.requires_grad(ib)) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(g.grad(ib).data(), out_dim);
          db += dy.colwise().sum();
        }
      });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  same_graph("add", a, b);
  need_same("add", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record("add", std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    for (auto id : {ia, ib}) {
      if (!g.requires_grad(id)) continue;
      auto& d = g.grad(id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  same_graph("mul", a, b);
  need_same("mul", a.shape(), b.shape());
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record("mul", std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    if (g.requires_grad(ia)) {
      auto& d = g.grad(ia);
      const auto& o = g.value(ib);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * o[i];
    }
    if (g.requires_grad(ib)) {
      auto& d = g.grad(ib);
      const auto& o = g.value(ia);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * o[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v *= factor;
  const auto ix = x.id();
  return x.graph().record("scale", std::move(out), {x}, [ix, factor](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * dy[i];
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  const auto ix = x.id();
  return x.graph().record("relu", std::move(out), {x}, [ix](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    const auto& xv = g.value(ix);
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (xv[i] > T(0)) d[i] += dy[i];
    }
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  const auto ix = x.id();
  return x.graph().record("tanh", std::move(out), {x}, [ix](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    const auto& y = g.value(self);
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = sigm(v);
  const auto ix = x.id();
  return x.graph().record("sigmoid", std::move(out), {x}, [ix](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    const auto& y = g.value(self);
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * y[i] * (T(1) - y[i]);
  });
}

namespace {

template <typename T>
void softmax_row(const T* in, T* out, std::size_t n) {
  T mx = *std::max_element(in, in + n);
  T total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    total += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= total;
}

// dx = y * (dy - <dy, y>)
template <typename T>
void softmax_row_backward(const T* y, const T* dy, T* dx, std::size_t n) {
  T dot = 0;
  for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
  for (std::size_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
}

}  // namespace

template <typename T>
Var<T> softmax(Var<T> x) {
  const auto n = x.shape().back();
  const auto rows = x.value().size() / n;
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x.value().data() + r * n, out.data() + r * n, n);
  const auto ix = x.id();
  return x.graph().record("softmax", std::move(out), {x}, [ix, rows, n](Graph<T>& g, std::size_t self) {
    const auto& y = g.value(self);
    const auto& dy = g.grad(self);
    auto& d = g.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      softmax_row_backward(y.data() + r * n, dy.data() + r * n, d.data() + r * n, n);
    }
  });
}

template <typename T>
Var<T> masked_softmax(Var<T> x, std::span<const std::size_t> lengths) {
  need_rank("masked_softmax", "input", x.shape(), 2);
  const auto rows = x.shape()[0], n = x.shape()[1];
  if (lengths.size() != rows) {
    fail("masked_softmax", "got " + std::to_string(lengths.size()) + " lengths for " + std::to_string(rows) + " rows");
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  for (auto l : lens) {
    if (l == 0 || l > n) fail("masked_softmax", "length " + std::to_string(l) + " outside [1, " + std::to_string(n) + "]");
  }
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x.value().data() + r * n, out.data() + r * n, lens[r]);
  const auto ix = x.id();
  return x.graph().record("masked_softmax", std::move(out), {x},
                          [ix, rows, n, lens = std::move(lens)](Graph<T>& g, std::size_t self) {
                            const auto& y = g.value(self);
                            const auto& dy = g.grad(self);
                            auto& d = g.grad(ix);
                            for (std::size_t r = 0; r < rows; ++r) {
                              softmax_row_backward(y.data() + r * n, dy.data() + r * n, d.data() + r * n, lens[r]);
                            }
                          });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> xs) {
  if (xs.empty()) fail("concat", "no inputs");
  const Shape& first = xs[0].shape();
  const auto rows = xs[0].value().size() / first.back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& v : xs) {
    same_graph("concat", xs[0], v);
    const auto& s = v.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      fail("concat", "leading extents differ: " + shape_str(first) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape os = first;
  os.back() = total;
  Tensor<T> out(os);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& v = xs[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[k], widths[k], out.data() + r * total + off);
    }
    off += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const auto& v : xs) ids.push_back(v.id());
  return xs[0].graph().record(
      "concat", std::move(out), xs,
      [ids = std::move(ids), widths = std::move(widths), rows, total](Graph<T>& g, std::size_t self) {
        const auto& dy = g.grad(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (g.requires_grad(ids[k])) {
            auto& d = g.grad(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < widths[k]; ++j) d[r * widths[k] + j] += dy[r * total + off + j];
            }
          }
          off += widths[k];
        }
      });
}

template <typename T>
Var<T> slice_last(Var<T> x, std::size_t begin, std::size_t len) {
  const auto n = x.shape().back();
  if (len == 0 || begin + len > n) {
    fail("slice_last", "range [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                           ") outside last extent of " + shape_str(x.shape()));
  }
  const auto rows = x.value().size() / n;
  Shape os = x.shape();
  os.back() = len;
  Tensor<T> out(os);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().data() + r * n + begin, len, out.data() + r * len);
  const auto ix = x.id();
  return x.graph().record("slice_last", std::move(out), {x}, [ix, rows, n, begin, len](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    auto& d = g.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < len; ++j) d[r * n + begin + j] += dy[r * len + j];
    }
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (shape_size(shape) != x.value().size()) {
    fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), x.value().storage());
  const auto ix = x.id();
  return x.graph().record("reshape", std::move(out), {x}, [ix](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
  });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  need_rank("embedding", "table", table.shape(), 2);
  const auto vocab = table.shape()[0], dim = table.shape()[1];
  if (ids.empty()) fail("embedding", "no ids");
  std::vector<int> idv(ids.begin(), ids.end());
  Tensor<T> out({idv.size(), dim});
  for (std::size_t r = 0; r < idv.size(); ++r) {
    if (idv[r] < 0 || static_cast<std::size_t>(idv[r]) >= vocab) {
      fail("embedding", "id " + std::to_string(idv[r]) + " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(table.value().data() + idv[r] * dim, dim, out.data() + r * dim);
  }
  const auto it = table.id();
  return table.graph().record("embedding", std::move(out), {table}, [it, dim, idv = std::move(idv)](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    auto& d = g.grad(it);
    for (std::size_t r = 0; r < idv.size(); ++r) {
      for (std::size_t j = 0; j < dim; ++j) d[idv[r] * dim + j] += dy[r * dim + j];
    }
  });
}

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> bias, std::size_t stride) {
  same_graph("conv1d", x, w);
  same_graph("conv1d", x, bias);
  if (stride < 1) fail("conv1d", "stride must be >= 1");
  need_rank("conv1d", "input", x.shape(), 3);
  need_rank("conv1d", "weight", w.shape(), 3);
  const auto B = x.shape()[0], T_in = x.shape()[1], C = x.shape()[2];
  const auto O = w.shape()[0], K = w.shape()[1];
  if (w.shape()[2] != C) {
    fail("conv1d", "weight " + shape_str(w.shape()) + " expects " + std::to_string(w.shape()[2]) +
                       " input channels, input " + shape_str(x.shape()) + " has " + std::to_string(C));
  }
  if (bias.shape() != Shape{O}) fail("conv1d", "bias " + shape_str(bias.shape()) + " does not match " + std::to_string(O) + " filters");
  const auto T_out = conv_output_length(T_in, stride);
  const auto pad = static_cast<long>((K - 1) / 2);
  const auto KC = K * C;
  // im2col: one row per output position
  auto cols = std::make_shared<Mat<T>>(Mat<T>::Zero(B * T_out, KC));
  const T* xd = x.value().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T_out; ++t) {
      T* row = cols->data() + (b * T_out + t) * KC;
      for (std::size_t k = 0; k < K; ++k) {
        const long src = static_cast<long>(t * stride + k) - pad;
        if (src < 0 || src >= static_cast<long>(T_in)) continue;
        std::copy_n(xd + (b * T_in + src) * C, C, row + k * C);
      }
    }
  }
  Tensor<T> out({B, T_out, O});
  MapM<T> y(out.data(), B * T_out, O);
  y.noalias() = (*cols) * CMapM<T>(w.value().data(), O, KC).transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.value().data(), O);
  y.rowwise() += bv;
  const auto ix = x.id(), iw = w.id(), ib = bias.id();
  return x.graph().record(
      "conv1d", std::move(out), {x, w, bias},
      [=](Graph<T>& g, std::size_t self) {
        CMapM<T> dy(g.grad(self).data(), B * T_out, O);
        if (g.requires_grad(iw)) MapM<T>(g.grad(iw).data(), O, KC).noalias() += dy.transpose() * (*cols);
        if (g.requires_grad(ib)) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(g.grad(ib).data(), O);
          db += dy.colwise().sum();
        }
        if (g.requires_grad(ix)) {
          Mat<T> dcols = dy * CMapM<T>(g.value(iw).data(), O, KC);
          T* dx = g.grad(ix).data();
          for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t t = 0; t < T_out; ++t) {
              const T* row = dcols.data() + (b * T_out + t) * KC;
              for (std::size_t k = 0; k < K; ++k) {
                const long src = static_cast<long>(t * stride + k) - pad;
                if (src < 0 || src >= static_cast<long>(T_in)) continue;
                T* dst = dx + (b * T_in + src) * C;
                for (std::size_t c = 0; c < C; ++c) dst[c] += row[k * C + c];
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                  std::span<const std::size_t> lengths, const BatchNormOptions& opt) {
  same_graph("batch_norm", x, gamma);
  same_graph("batch_norm", x, beta);
  need_rank("batch_norm", "input", x.shape(), 3);
  const auto B = x.shape()[0], Tn = x.shape()[1], C = x.shape()[2];
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C} || running_mean.shape() != Shape{C} ||
      running_var.shape() != Shape{C}) {
    fail("batch_norm", "per-channel parameters must have shape [" + std::to_string(C) + "]");
  }
  if (lengths.size() != B) fail("batch_norm", "got " + std::to_string(lengths.size()) + " lengths for batch of " + std::to_string(B));
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  std::size_t count = 0;
  for (auto l : lens) {
    if (l > Tn) fail("batch_norm", "length " + std::to_string(l) + " exceeds time extent " + std::to_string(Tn));
    count += l;
  }
  if (count == 0) fail("batch_norm", "no valid positions");

  const T* xd = x.value().data();
  std::vector<T> mean(C, T(0)), inv_std(C, T(0));
  if (opt.training) {
    std::vector<double> m(C, 0.0), v(C, 0.0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lens[b]; ++t)
        for (std::size_t c = 0; c < C; ++c) m[c] += xd[(b * Tn + t) * C + c];
    for (auto& mv : m) mv /= static_cast<double>(count);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lens[b]; ++t)
        for (std::size_t c = 0; c < C; ++c) {
          const double d = xd[(b * Tn + t) * C + c] - m[c];
          v[c] += d * d;
        }
    for (std::size_t c = 0; c < C; ++c) {
      const double var = v[c] / static_cast<double>(count);
      mean[c] = static_cast<T>(m[c]);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      running_mean[c] = static_cast<T>(opt.momentum * running_mean[c] + (1.0 - opt.momentum) * m[c]);
      running_var[c] = static_cast<T>(opt.momentum * running_var[c] + (1.0 - opt.momentum) * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + opt.eps));
    }
  }

  Tensor<T> out(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(x.value().size(), T(0));
  const T* gd = gamma.value().data();
  const T* bd = beta.value().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < lens[b]; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const auto i = (b * Tn + t) * C + c;
        (*xhat)[i] = (xd[i] - mean[c]) * inv_std[c];
        out[i] = gd[c] * (*xhat)[i] + bd[c];
      }

  const auto ix = x.id(), ig = gamma.id(), ibt = beta.id();
  const bool training = opt.training;
  return x.graph().record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [=, lens = std::move(lens), inv_std = std::move(inv_std)](Graph<T>& g, std::size_t self) {
        const T* dy = g.grad(self).data();
        const T* gd = g.value(ig).data();
        std::vector<T> sum_dy(C, T(0)), sum_dy_xhat(C, T(0));
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t t = 0; t < lens[b]; ++t)
            for (std::size_t c = 0; c < C; ++c) {
              const auto i = (b * Tn + t) * C + c;
              sum_dy[c] += dy[i];
              sum_dy_xhat[c] += dy[i] * (*xhat)[i];
            }
        if (g.requires_grad(ig)) {
          auto& d = g.grad(ig);
          for (std::size_t c = 0; c < C; ++c) d[c] += sum_dy_xhat[c];
        }
        if (g.requires_grad(ibt)) {
          auto& d = g.grad(ibt);
          for (std::size_t c = 0; c < C; ++c) d[c] += sum_dy[c];
        }
        if (g.requires_grad(ix)) {
          T* dx = g.grad(ix).data();
          const T n = static_cast<T>(count);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < lens[b]; ++t)
              for (std::size_t c = 0; c < C; ++c) {
                const auto i = (b * Tn + t) * C + c;
                if (training) {
                  dx[i] += gd[c] * inv_std[c] * (dy[i] - sum_dy[c] / n - (*xhat)[i] * sum_dy_xhat[c] / n);
                } else {
                  dx[i] += gd[c] * inv_std[c] * dy[i];
                }
              }
        }
      });
}

template <typename T>
Var<T> lstm_cell(Var<T> gates, Var<T> c_prev, Var<T> h_prev, std::span<const T> active) {
  same_graph("lstm_cell", gates, c_prev);
  same_graph("lstm_cell", gates, h_prev);
  need_rank("lstm_cell", "gates", gates.shape(), 2);
  const auto B = gates.shape()[0];
  const auto H = c_prev.shape().back();
  if (gates.shape()[1] != 4 * H || c_prev.shape() != Shape{B, H} || h_prev.shape() != Shape{B, H}) {
    fail("lstm_cell", "gates " + shape_str(gates.shape()) + " incompatible with state " + shape_str(c_prev.shape()) +
                          " / " + shape_str(h_prev.shape()));
  }
  if (!active.empty() && active.size() != B) fail("lstm_cell", "mask length differs from batch " + std::to_string(B));
  std::vector<T> mask(active.begin(), active.end());
  if (mask.empty()) mask.assign(B, T(1));

  const T* gd = gates.value().data();
  const T* cp = c_prev.value().data();
  const T* hp = h_prev.value().data();
  Tensor<T> out({B, 2 * H});
  for (std::size_t b = 0; b < B; ++b) {
    const T* gr = gd + b * 4 * H;
    T* o = out.data() + b * 2 * H;
    for (std::size_t j = 0; j < H; ++j) {
      const T i = sigm(gr[j]), f = sigm(gr[H + j]), gg = std::tanh(gr[2 * H + j]), og = sigm(gr[3 * H + j]);
      const T c = f * cp[b * H + j] + i * gg;
      const T h = og * std::tanh(c);
      const T m = mask[b];
      o[j] = m * h + (T(1) - m) * hp[b * H + j];
      o[H + j] = m * c + (T(1) - m) * cp[b * H + j];
    }
  }
  const auto igt = gates.id(), ic = c_prev.id(), ih = h_prev.id();
  return gates.graph().record(
      "lstm_cell", std::move(out), {gates, c_prev, h_prev},
      [igt, ic, ih, B, H, mask = std::move(mask)](Graph<T>& g, std::size_t self) {
        const T* dy = g.grad(self).data();
        const T* gd = g.value(igt).data();
        const T* cp = g.value(ic).data();
        T* dgates = g.requires_grad(igt) ? g.grad(igt).data() : nullptr;
        T* dcp = g.requires_grad(ic) ? g.grad(ic).data() : nullptr;
        T* dhp = g.requires_grad(ih) ? g.grad(ih).data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
          const T* gr = gd + b * 4 * H;
          const T m = mask[b];
          for (std::size_t j = 0; j < H; ++j) {
            const T dh_out = dy[b * 2 * H + j];
            const T dc_out = dy[b * 2 * H + H + j];
            if (dhp) dhp[b * H + j] += (T(1) - m) * dh_out;
            if (dcp) dcp[b * H + j] += (T(1) - m) * dc_out;
            if (m == T(0)) continue;
            const T i = sigm(gr[j]), f = sigm(gr[H + j]), gg = std::tanh(gr[2 * H + j]), og = sigm(gr[3 * H + j]);
            const T c = f * cp[b * H + j] + i * gg;
            const T tc = std::tanh(c);
            const T dh = m * dh_out;
            const T dc = m * dc_out + dh * og * (T(1) - tc * tc);
            if (dcp) dcp[b * H + j] += dc * f;
            if (dgates) {
              T* dg = dgates + b * 4 * H;
              dg[j] += dc * gg * i * (T(1) - i);
              dg[H + j] += dc * cp[b * H + j] * f * (T(1) - f);
              dg[2 * H + j] += dc * i * (T(1) - gg * gg);
              dg[3 * H + j] += dh * tc * og * (T(1) - og);
            }
          }
        }
      });
}

template <typename T>
Var<T> time_slice(Var<T> x, std::size_t t) {
  need_rank("time_slice", "input", x.shape(), 3);
  const auto B = x.shape()[0], Tn = x.shape()[1], C = x.shape()[2];
  if (t >= Tn) fail("time_slice", "step " + std::to_string(t) + " outside " + shape_str(x.shape()));
  Tensor<T> out({B, C});
  for (std::size_t b = 0; b < B; ++b) std::copy_n(x.value().data() + (b * Tn + t) * C, C, out.data() + b * C);
  const auto ix = x.id();
  return x.graph().record("time_slice", std::move(out), {x}, [ix, B, Tn, C, t](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    auto& d = g.grad(ix);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) d[(b * Tn + t) * C + c] += dy[b * C + c];
  });
}

template <typename T>
Var<T> stack_time(std::span<const Var<T>> steps) {
  if (steps.empty()) fail("stack_time", "no steps");
  need_rank("stack_time", "step", steps[0].shape(), 2);
  const auto B = steps[0].shape()[0], C = steps[0].shape()[1], Tn = steps.size();
  Tensor<T> out({B, Tn, C});
  std::vector<std::size_t> ids;
  for (std::size_t t = 0; t < Tn; ++t) {
    same_graph("stack_time", steps[0], steps[t]);
    need_same("stack_time", steps[0].shape(), steps[t].shape());
    const auto& v = steps[t].value();
    for (std::size_t b = 0; b < B; ++b) std::copy_n(v.data() + b * C, C, out.data() + (b * Tn + t) * C);
    ids.push_back(steps[t].id());
  }
  return steps[0].graph().record("stack_time", std::move(out), steps, [ids = std::move(ids), B, Tn, C](Graph<T>& g, std::size_t self) {
    const auto& dy = g.grad(self);
    for (std::size_t t = 0; t < Tn; ++t) {
      if (!g.requires_grad(ids[t])) continue;
      auto& d = g.grad(ids[t]);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) d[b * C + c] += dy[(b * Tn + t) * C + c];
    }
  });
}

template <typename T>
Var<T> batched_dot(Var<T> keys, Var<T> q) {
  same_graph("batched_dot", keys, q);
  need_rank("batched_dot", "keys", keys.shape(), 3);
  need_rank("batched_dot", "query", q.shape(), 2);
  const auto B = keys.shape()[0], S = keys.shape()[1], D = keys.shape()[2];
  if (q.shape() != Shape{B, D}) fail("batched_dot", "query " + shape_str(q.shape()) + " does not match keys " + shape_str(keys.shape()));
  Tensor<T> out({B, S});
  const T* kd = keys.value().data();
  const T* qd = q.value().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s) {
      T acc = 0;
      const T* kr = kd + (b * S + s) * D;
      for (std::size_t j = 0; j < D; ++j) acc += kr[j] * qd[b * D + j];
      out[b * S + s] = acc;
    }
  const auto ik = keys.id(), iq = q.id();
  return keys.graph().record("batched_dot", std::move(out), {keys, q}, [ik, iq, B, S, D](Graph<T>& g, std::size_t self) {
    const T* dy = g.grad(self).data();
    const T* kd = g.value(ik).data();
    const T* qd = g.value(iq).data();
    T* dk = g.requires_grad(ik) ? g.grad(ik).data() : nullptr;
    T* dq = g.requires_grad(iq) ? g.grad(iq).data() : nullptr;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t s = 0; s < S; ++s) {
        const T d = dy[b * S + s];
        for (std::size_t j = 0; j < D; ++j) {
          if (dk) dk[(b * S + s) * D + j] += d * qd[b * D + j];
          if (dq) dq[b * D + j] += d * kd[(b * S + s) * D + j];
        }
      }
  });
}

template <typename T>
Var<T> weighted_sum(Var<T> w, Var<T> values) {
  same_graph("weighted_sum", w, values);
  need_rank("weighted_sum", "weights", w.shape(), 2);
  need_rank("weighted_sum", "values", values.shape(), 3);
  const auto B = values.shape()[0], S = values.shape()[1], E = values.shape()[2];
  if (w.shape() != Shape{B, S}) fail("weighted_sum", "weights " + shape_str(w.shape()) + " do not match values " + shape_str(values.shape()));
  Tensor<T> out({B, E});
  const T* wd = w.value().data();
  const T* vd = values.value().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s) {
      const T a = wd[b * S + s];
      if (a == T(0)) continue;
      const T* vr = vd + (b * S + s) * E;
      for (std::size_t j = 0; j < E; ++j) out[b * E + j] += a * vr[j];
    }
  const auto iw = w.id(), iv = values.id();
  return w.graph().record("weighted_sum", std::move(out), {w, values}, [iw, iv, B, S, E](Graph<T>& g, std::size_t self) {
    const T* dy = g.grad(self).data();
    const T* wd = g.value(iw).data();
    const T* vd = g.value(iv).data();
    T* dw = g.requires_grad(iw) ? g.grad(iw).data() : nullptr;
    T* dv = g.requires_grad(iv) ? g.grad(iv).data() : nullptr;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t s = 0; s < S; ++s) {
        T acc = 0;
        for (std::size_t j = 0; j < E; ++j) {
          acc += dy[b * E + j] * vd[(b * S + s) * E + j];
          if (dv) dv[(b * S + s) * E + j] += wd[b * S + s] * dy[b * E + j];
        }
        if (dw) dw[b * S + s] += acc;
      }
  });
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, int ignore_index) {
  need_rank("cross_entropy", "logits", logits.shape(), 2);
  const auto N = logits.shape()[0], V = logits.shape()[1];
  if (targets.size() != N) fail("cross_entropy", std::to_string(targets.size()) + " targets for " + std::to_string(N) + " rows");
  std::vector<int> tg(targets.begin(), targets.end());
  auto probs = std::make_shared<std::vector<T>>(N * V);
  T total = 0;
  for (std::size_t r = 0; r < N; ++r) {
    if (tg[r] == ignore_index) continue;
    if (tg[r] < 0 || static_cast<std::size_t>(tg[r]) >= V) {
      fail("cross_entropy", "target " + std::to_string(tg[r]) + " outside " + std::to_string(V) + " classes");
    }
    const T* row = logits.value().data() + r * V;
    softmax_row(row, probs->data() + r * V, V);
    const T mx = *std::max_element(row, row + V);
    T z = 0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(row[j] - mx);
    total += -(row[tg[r]] - mx - std::log(z));
  }
  const auto il = logits.id();
  return logits.graph().record("cross_entropy", Tensor<T>({1}, {total}), {logits},
                               [il, N, V, ignore_index, tg = std::move(tg), probs](Graph<T>& g, std::size_t self) {
                                 const T dl = g.grad(self)[0];
                                 T* d = g.grad(il).data();
                                 for (std::size_t r = 0; r < N; ++r) {
                                   if (tg[r] == ignore_index) continue;
                                   const T* p = probs->data() + r * V;
                                   for (std::size_t j = 0; j < V; ++j) d[r * V + j] += dl * p[j];
                                   d[r * V + tg[r]] -= dl;
                                 }
                               });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  const auto ix = x.id();
  return x.graph().record("sum", Tensor<T>({1}, {total}), {x}, [ix](Graph<T>& g, std::size_t self) {
    const T dl = g.grad(self)[0];
    for (auto& v : g.grad(ix).values()) v += dl;
  });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits) {
  const auto n = logits.shape().back();
  const auto rows = logits.size() / n;
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = logits.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
    const T lz = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = row[j] - lz;
  }
  return out;
}

#define XST_INSTANTIATE_OPS(T)                                                                              \
  template Var<T> matmul(Var<T>, Var<T>);                                                                   \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                                           \
  template Var<T> add(Var<T>, Var<T>);                                                                      \
  template Var<T> mul(Var<T>, Var<T>);                                                                      \
  template Var<T> scale(Var<T>, T);                                                                         \
  template Var<T> relu(Var<T>);                                                                             \
  template Var<T> tanh(Var<T>);                                                                             \
  template Var<T> sigmoid(Var<T>);                                                                          \
  template Var<T> softmax(Var<T>);                                                                          \
  template Var<T> masked_softmax(Var<T>, std::span<const std::size_t>);                                     \
  template Var<T> concat(std::span<const Var<T>>);                                                          \
  template Var<T> slice_last(Var<T>, std::size_t, std::size_t);                                             \
  template Var<T> reshape(Var<T>, Shape);                                                                   \
  template Var<T> embedding(Var<T>, std::span<const int>);                                                  \
  template Var<T> conv1d(Var<T>, Var<T>, Var<T>, std::size_t);                                              \
  template Var<T> batch_norm(Var<T>, Var<T>, Var<T>, Tensor<T>&, Tensor<T>&, std::span<const std::size_t>,  \
                             const BatchNormOptions&);                                                      \
  template Var<T> lstm_cell(Var<T>, Var<T>, Var<T>, std::span<const T>);                                    \
  template Var<T> time_slice(Var<T>, std::size_t);                                                          \
  template Var<T> stack_time(std::span<const Var<T>>);                                                      \
  template Var<T> batched_dot(Var<T>, Var<T>);                                                              \
  template Var<T> weighted_sum(Var<T>, Var<T>);                                                             \
  template Var<T> cross_entropy(Var<T>, std::span<const int>, int);                                         \
  template Var<T> sum(Var<T>);                                                                              \
  template Tensor<T> log_softmax_rows(const Tensor<T>&);

XST_INSTANTIATE_OPS(float)
XST_INSTANTIATE_OPS(double)

#undef XST_INSTANTIATE_OPS

}  // namespace xst::numcore::ops
