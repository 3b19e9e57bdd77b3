#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "xst/numcore/params.hpp"

namespace xst::numcore {

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // L2 term added to the gradient before the moment updates (coupled decay).
  double weight_decay = 0.0001;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
};

// One bias-corrected Adam update over every trainable entry. Moments are
// created lazily on first use.
template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state);

}  // namespace xst::numcore
