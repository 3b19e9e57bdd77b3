#include "xst/numcore/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace xst::numcore {

template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state) {
  const auto& cfg = state.config;
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("adam: alpha must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, e] : params) {
    if (!e.trainable) continue;
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor<T>(e.value.shape())).first;
      state.v.emplace(name, Tensor<T>(e.value.shape()));
    }
    auto& m = mit->second;
    auto& v = state.v.at(name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = static_cast<double>(e.grad[i]) + cfg.weight_decay * static_cast<double>(e.value[i]);
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = cfg.alpha * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
      e.value[i] = static_cast<T>(e.value[i] - update);
    }
  }
}

template void adam_step(ParamSet<float>&, AdamState<float>&);
template void adam_step(ParamSet<double>&, AdamState<double>&);

}  // namespace xst::numcore
