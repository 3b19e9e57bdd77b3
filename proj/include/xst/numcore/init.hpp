#pragma once

#include <optional>

#include "xst/numcore/graph.hpp"
#include "xst/numcore/rng.hpp"
#include "xst/numcore/tensor.hpp"

namespace xst::numcore {

enum class InitScheme {
  he_normal,     // N(0, 2 / fan_in)
  lecun_normal,  // N(0, 1 / fan_in); Chainer's default for fully-connected layers
  unit_normal,   // N(0, 1); Chainer's default for embeddings
};

template <typename T>
Tensor<T> init_param(const Shape& shape, InitScheme scheme, long fan_in, RngStream& rng);

// Inverted-dropout keep mask: entries are 0 or 1/(1-ratio). With shared_axis
// set, one draw is broadcast along that axis (variational dropout over time).
template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double ratio, RngStream& rng,
                       std::optional<std::size_t> shared_axis = std::nullopt);

// Identity at inference or when ratio == 0; otherwise x * mask.
template <typename T>
Var<T> dropout(Var<T> x, double ratio, RngStream& rng, bool training,
               std::optional<std::size_t> variational_axis = std::nullopt);

}  // namespace xst::numcore
