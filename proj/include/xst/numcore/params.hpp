#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "xst/numcore/tensor.hpp"

namespace xst::numcore {

// Parameter groups double as the units of selective transfer.
enum class ParamGroup { cnn, encoder_lstm, attention, decoder, output };

inline constexpr std::array<ParamGroup, 5> kAllGroups = {
    ParamGroup::cnn, ParamGroup::encoder_lstm, ParamGroup::attention, ParamGroup::decoder,
    ParamGroup::output};

std::string_view group_name(ParamGroup g);
ParamGroup parse_group(std::string_view name);  // throws std::invalid_argument

template <typename T>
struct ParamEntry {
  Tensor<T> value;
  Tensor<T> grad;
  ParamGroup group = ParamGroup::cnn;
  // Non-trainable entries (batch-norm running statistics, frozen groups) get
  // no gradient and are skipped by the optimizer.
  bool trainable = true;
};

template <typename T>
class ParamSet {
 public:
  using Map = std::map<std::string, ParamEntry<T>>;

  ParamEntry<T>& add(const std::string& name, Tensor<T> value, ParamGroup group,
                     bool trainable = true);

  ParamEntry<T>& at(const std::string& name);
  const ParamEntry<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }

  typename Map::iterator begin() { return entries_.begin(); }
  typename Map::iterator end() { return entries_.end(); }
  typename Map::const_iterator begin() const { return entries_.begin(); }
  typename Map::const_iterator end() const { return entries_.end(); }

  void zero_grad();
  double grad_norm() const;
  // Scales gradients so the global L2 norm is at most max_norm; returns the
  // pre-clip norm.
  double clip_grad_norm(double max_norm);
  std::size_t num_values() const;

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, e] : entries_) {
      out.add(name, e.value.template cast<U>(), e.group, e.trainable);
    }
    return out;
  }

 private:
  Map entries_;
};

extern template class ParamSet<float>;
extern template class ParamSet<double>;

}  // namespace xst::numcore
