#include "xst/numcore/params.hpp"

#include <cmath>
#include <stdexcept>

namespace xst::numcore {

std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::cnn: return "cnn";
    case ParamGroup::encoder_lstm: return "encoder_lstm";
    case ParamGroup::attention: return "attention";
    case ParamGroup::decoder: return "decoder";
    case ParamGroup::output: return "output";
  }
  return "?";
}

ParamGroup parse_group(std::string_view name) {
  for (auto g : kAllGroups) {
    if (group_name(g) == name) return g;
  }
  throw std::invalid_argument("unknown parameter group '" + std::string(name) + "'");
}

template <typename T>
ParamEntry<T>& ParamSet<T>::add(const std::string& name, Tensor<T> value, ParamGroup group,
                                bool trainable) {
  if (entries_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  ParamEntry<T> e;
  e.grad = Tensor<T>(value.shape());
  e.value = std::move(value);
  e.group = group;
  e.trainable = trainable;
  return entries_.emplace(name, std::move(e)).first->second;
}

template <typename T>
ParamEntry<T>& ParamSet<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
const ParamEntry<T>& ParamSet<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(T(0));
}

template <typename T>
double ParamSet<T>::grad_norm() const {
  double sq = 0.0;
  for (const auto& [_, e] : entries_) {
    if (!e.trainable) continue;
    for (T g : e.grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double ParamSet<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& [_, e] : entries_) {
      if (!e.trainable) continue;
      for (T& g : e.grad.values()) g *= scale;
    }
  }
  return norm;
}

template <typename T>
std::size_t ParamSet<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

template class ParamSet<float>;
template class ParamSet<double>;

}  // namespace xst::numcore
