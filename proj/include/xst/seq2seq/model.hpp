#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xst/audiofeat/features.hpp"
#include "xst/numcore/graph.hpp"
#include "xst/numcore/params.hpp"
#include "xst/numcore/rng.hpp"
#include "xst/seq2seq/config.hpp"

namespace xst::seq2seq {

using numcore::Graph;
using numcore::ParamSet;
using numcore::Tensor;
using numcore::Var;

template <typename T>
struct EncoderStates {
  Var<T> states;                     // [B, S, 2 * hidden]
  Var<T> keys;                       // W_a applied to every state, [B, S, dec_hidden]
  std::vector<std::size_t> lengths;  // valid S per row
};

template <typename T>
struct DecoderVars {
  std::vector<Var<T>> h, c;  // per layer, [B, dec_hidden]
  Var<T> attentional;        // previous attentional vector, [B, dec_hidden]
};

template <typename T>
struct StepResult {
  Var<T> logits;   // [B, V]
  Var<T> weights;  // [B, S]
};

// Dropout state for one forward pass. An inactive context (ratio 0 or
// inference) turns every site into the identity.
template <typename T>
struct DropoutContext {
  double ratio = 0.0;
  numcore::RngStream* rng = nullptr;
  bool active() const { return ratio > 0.0 && rng != nullptr; }
  // Per-sequence masks reused across decoder steps.
  std::vector<Tensor<T>> decoder_masks;
};

// Parameter names used by the model and by checkpoint surgery.
std::string cnn_param(std::size_t layer, const std::string& leaf);
std::string encoder_lstm_param(std::size_t layer, bool backward, const std::string& leaf);
std::string decoder_lstm_param(std::size_t layer, const std::string& leaf);

template <typename T>
class Model {
 public:
  // Fresh initialisation; each tensor draws from its own named stream, so
  // the value of one parameter never depends on which others exist.
  Model(ModelConfig cfg, std::uint64_t seed);
  // Adopts existing parameters after checking names and shapes.
  Model(ModelConfig cfg, ParamSet<T> params);

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }

  // Expected name -> (shape, group, trainable) layout for cfg.
  static ParamSet<T> layout(const ModelConfig& cfg);

  EncoderStates<T> encode(Graph<T>& g, std::span<const audiofeat::FeatureSequence* const> batch, bool training,
                          DropoutContext<T>& drop);

  DecoderVars<T> initial_state(Graph<T>& g, std::size_t batch) const;

  // Embeds prev_ids, runs the decoder stack with input feeding, attends and
  // projects to the vocabulary. state is advanced in place.
  StepResult<T> decode_step(Graph<T>& g, std::span<const int> prev_ids, DecoderVars<T>& state,
                            const EncoderStates<T>& enc, DropoutContext<T>& drop);

  // Luong general attention: score_s = h^T W_a hbar_s, masked softmax, context.
  static std::pair<Var<T>, Var<T>> attend(Var<T> h, const EncoderStates<T>& enc);

 private:
  Var<T> p(Graph<T>& g, const std::string& name) { return g.param(params_.at(name)); }
  Var<T> encoder_direction(Graph<T>& g, Var<T> gates_in, const std::string& prefix, bool backward,
                           const std::vector<std::size_t>& lengths);

  ModelConfig cfg_;
  ParamSet<T> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace xst::seq2seq
