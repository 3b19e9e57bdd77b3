#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xst/numcore/params.hpp"
#include "xst/numcore/tensor.hpp"

namespace xst::numcore {

template <typename T>
class Graph;

// Handle to a node on a differentiation tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
// so the tape itself is a topological order. A tape belongs to one thread.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  // Differentiable leaf that is not bound to a ParamSet (used by gradient checks).
  Var<T> variable(Tensor<T> value);
  // Leaf bound to a parameter; its gradient is added to entry.grad by backward().
  // Repeated calls for the same entry return the same node.
  Var<T> param(ParamEntry<T>& entry);

  Var<T> record(std::string_view primitive, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward);
  Var<T> record(std::string_view primitive, Tensor<T> value, std::span<const Var<T>> inputs,
                BackwardFn backward);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, zero-initialised on first access.
  Tensor<T>& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  std::string_view primitive(std::size_t id) const { return nodes_[id].primitive; }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
  void backward(Var<T> loss);

  std::size_t num_nodes() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    std::string_view primitive;
    Tensor<T> value;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    ParamEntry<T>* param = nullptr;
  };

  Var<T> push(Node node);

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::unordered_map<const ParamEntry<T>*, std::size_t> param_ids_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace xst::numcore
