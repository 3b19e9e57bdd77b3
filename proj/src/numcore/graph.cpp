#include "xst/numcore/graph.hpp"

#include <string>

namespace xst::numcore {

template <typename T>
Var<T> Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.primitive = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::variable(Tensor<T> value) {
  Node n;
  n.primitive = "variable";
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::param(ParamEntry<T>& entry) {
  auto it = param_ids_.find(&entry);
  if (it != param_ids_.end()) return Var<T>(this, it->second);
  Node n;
  n.primitive = "param";
  n.ref = &entry.value;
  n.requires_grad = grad_enabled_ && entry.trainable;
  n.param = &entry;
  auto v = push(std::move(n));
  param_ids_.emplace(&entry, v.id());
  return v;
}

template <typename T>
Var<T> Graph<T>::record(std::string_view primitive, Tensor<T> value,
                        std::initializer_list<Var<T>> inputs, BackwardFn backward) {
  return record(primitive, std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                std::move(backward));
}

template <typename T>
Var<T> Graph<T>::record(std::string_view primitive, Tensor<T> value, std::span<const Var<T>> inputs,
                        BackwardFn backward) {
  Node n;
  n.primitive = primitive;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& in : inputs) {
      if (in.valid() && nodes_[in.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Graph<T>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

template <typename T>
Tensor<T>& Graph<T>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (!grad_enabled_) throw std::logic_error("backward: tape was created without gradients");
  const auto& lv = value(loss.id());
  if (lv.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(lv.shape()));
  }
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    if (!value(i).all_finite()) {
      throw NumericError("non-finite value produced by node #" + std::to_string(i) + " (" +
                         std::string(nodes_[i].primitive) + ")");
    }
  }
  grad(loss.id()).fill(T(1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient reaching node #" + std::to_string(i) + " (" +
                         std::string(n.primitive) + ")");
    }
    if (n.backward) n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (n.param && n.requires_grad && !n.grad.empty()) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace xst::numcore
