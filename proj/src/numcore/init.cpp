#include "xst/numcore/init.hpp"

#include <cmath>
#include <stdexcept>

#include "xst/numcore/ops.hpp"

namespace xst::numcore {

template <typename T>
Tensor<T> init_param(const Shape& shape, InitScheme scheme, long fan_in, RngStream& rng) {
  if (fan_in <= 0) throw std::invalid_argument("init_param: fan_in must be positive, got " + std::to_string(fan_in));
  Tensor<T> out(shape);
  const double n = static_cast<double>(fan_in);
  switch (scheme) {
    case InitScheme::he_normal: {
      const double sd = std::sqrt(2.0 / n);
      for (auto& v : out.values()) v = static_cast<T>(rng.normal(0.0, sd));
      break;
    }
    case InitScheme::lecun_normal: {
      const double sd = std::sqrt(1.0 / n);
      for (auto& v : out.values()) v = static_cast<T>(rng.normal(0.0, sd));
      break;
    }
    case InitScheme::unit_normal:
      for (auto& v : out.values()) v = static_cast<T>(rng.normal(0.0, 1.0));
      break;
  }
  return out;
}

namespace {

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("dropout: ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
}

}  // namespace

template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double ratio, RngStream& rng, std::optional<std::size_t> shared_axis) {
  check_ratio(ratio);
  const T keep = static_cast<T>(1.0 / (1.0 - ratio));
  Tensor<T> mask(shape);
  if (!shared_axis) {
    for (auto& v : mask.values()) v = rng.bernoulli(ratio) ? T(0) : keep;
    return mask;
  }
  const auto axis = *shared_axis;
  if (axis >= shape.size()) throw ShapeError("dropout: shared axis outside " + shape_str(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const auto along = shape[axis];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const T v = rng.bernoulli(ratio) ? T(0) : keep;
      for (std::size_t a = 0; a < along; ++a) mask[(o * along + a) * inner + j] = v;
    }
  }
  return mask;
}

template <typename T>
Var<T> dropout(Var<T> x, double ratio, RngStream& rng, bool training, std::optional<std::size_t> variational_axis) {
  check_ratio(ratio);
  if (!training || ratio == 0.0) return x;
  auto mask = x.graph().constant(dropout_mask<T>(x.shape(), ratio, rng, variational_axis));
  return ops::mul(x, mask);
}

template Tensor<float> init_param(const Shape&, InitScheme, long, RngStream&);
template Tensor<double> init_param(const Shape&, InitScheme, long, RngStream&);
template Tensor<float> dropout_mask(const Shape&, double, RngStream&, std::optional<std::size_t>);
template Tensor<double> dropout_mask(const Shape&, double, RngStream&, std::optional<std::size_t>);
template Var<float> dropout(Var<float>, double, RngStream&, bool, std::optional<std::size_t>);
template Var<double> dropout(Var<double>, double, RngStream&, bool, std::optional<std::size_t>);

}  // namespace xst::numcore
