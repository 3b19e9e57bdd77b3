#include "xst/seq2seq/model.hpp"

#include <array>
#include <functional>

#include "xst/numcore/init.hpp"
#include "xst/numcore/ops.hpp"

namespace xst::seq2seq {

namespace ops = numcore::ops;
using numcore::InitScheme;
using numcore::ParamGroup;
using numcore::Shape;

std::string cnn_param(std::size_t layer, const std::string& leaf) {
  return "encoder.cnn." + std::to_string(layer) + "." + leaf;
}

std::string encoder_lstm_param(std::size_t layer, bool backward, const std::string& leaf) {
  return "encoder.lstm." + std::to_string(layer) + (backward ? ".bwd." : ".fwd.") + leaf;
}

std::string decoder_lstm_param(std::size_t layer, const std::string& leaf) {
  return "decoder.lstm." + std::to_string(layer) + "." + leaf;
}

namespace {

enum class Fill { he, lecun, unit, zeros, ones, lstm_bias };

struct Spec {
  std::string name;
  Shape shape;
  ParamGroup group;
  bool trainable;
  Fill fill;
  long fan_in;
};

std::vector<Spec> specs(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<Spec> out;
  const auto& e = cfg.encoder;
  const auto& d = cfg.decoder;
  std::size_t in = e.input_dim;
  for (std::size_t i = 0; i < e.cnn_filters.size(); ++i) {
    const auto o = e.cnn_filters[i];
    const long fan = static_cast<long>(e.cnn_width * in);
    out.push_back({cnn_param(i, "weight"), {o, e.cnn_width, in}, ParamGroup::cnn, true, Fill::he, fan});
    out.push_back({cnn_param(i, "bias"), {o}, ParamGroup::cnn, true, Fill::zeros, 1});
    out.push_back({cnn_param(i, "bn.gamma"), {o}, ParamGroup::cnn, true, Fill::ones, 1});
    out.push_back({cnn_param(i, "bn.beta"), {o}, ParamGroup::cnn, true, Fill::zeros, 1});
    out.push_back({cnn_param(i, "bn.running_mean"), {o}, ParamGroup::cnn, false, Fill::zeros, 1});
    out.push_back({cnn_param(i, "bn.running_var"), {o}, ParamGroup::cnn, false, Fill::ones, 1});
    in = o;
  }
  const auto H = e.per_direction_hidden();
  for (std::size_t l = 0; l < e.lstm_layers; ++l) {
    for (bool bwd : {false, true}) {
      out.push_back({encoder_lstm_param(l, bwd, "weight_ih"), {4 * H, in}, ParamGroup::encoder_lstm, true, Fill::he,
                     static_cast<long>(in)});
      out.push_back({encoder_lstm_param(l, bwd, "weight_hh"), {4 * H, H}, ParamGroup::encoder_lstm, true, Fill::he,
                     static_cast<long>(H)});
      out.push_back({encoder_lstm_param(l, bwd, "bias"), {4 * H}, ParamGroup::encoder_lstm, true, Fill::lstm_bias, 1});
    }
    in = 2 * H;
  }
  const auto enc_out = e.output_dim();
  const auto D = d.lstm_hidden;
  out.push_back({"attention.W_a", {D, enc_out}, ParamGroup::attention, true, Fill::lecun, static_cast<long>(enc_out)});
  out.push_back({"decoder.embedding", {d.vocab_size, d.embed_dim}, ParamGroup::decoder, true, Fill::unit,
                 static_cast<long>(d.embed_dim)});
  std::size_t din = d.embed_dim + D;
  for (std::size_t l = 0; l < d.lstm_layers; ++l) {
    out.push_back({decoder_lstm_param(l, "weight_ih"), {4 * D, din}, ParamGroup::decoder, true, Fill::he,
                   static_cast<long>(din)});
    out.push_back({decoder_lstm_param(l, "weight_hh"), {4 * D, D}, ParamGroup::decoder, true, Fill::he,
                   static_cast<long>(D)});
    out.push_back({decoder_lstm_param(l, "bias"), {4 * D}, ParamGroup::decoder, true, Fill::lstm_bias, 1});
    din = D;
  }
  out.push_back({"decoder.attn_combine", {D, enc_out + D}, ParamGroup::decoder, true, Fill::lecun,
                 static_cast<long>(enc_out + D)});
  out.push_back({"output.weight", {d.vocab_size, D}, ParamGroup::output, true, Fill::lecun, static_cast<long>(D)});
  out.push_back({"output.bias", {d.vocab_size}, ParamGroup::output, true, Fill::zeros, 1});
  return out;
}

template <typename T>
Tensor<T> initial_value(const Spec& s, std::uint64_t seed) {
  numcore::RngStream rng(seed, "init/" + s.name);
  switch (s.fill) {
    case Fill::he:
      return numcore::init_param<T>(s.shape, InitScheme::he_normal, s.fan_in, rng);
    case Fill::lecun:
      return numcore::init_param<T>(s.shape, InitScheme::lecun_normal, s.fan_in, rng);
    case Fill::unit:
      return numcore::init_param<T>(s.shape, InitScheme::unit_normal, s.fan_in, rng);
    case Fill::zeros:
      return Tensor<T>(s.shape);
    case Fill::ones:
      return Tensor<T>(s.shape, T(1));
    case Fill::lstm_bias: {
      Tensor<T> b(s.shape);
      const auto H = s.shape[0] / 4;
      for (std::size_t i = H; i < 2 * H; ++i) b[i] = T(1);  // forget gate
      return b;
    }
  }
  return {};
}

template <typename T>
Var<T> apply_mask(Var<T> x, const Tensor<T>* mask) {
  if (!mask) return x;
  return ops::mul(x, x.graph().constant(*mask));
}

}  // namespace

template <typename T>
ParamSet<T> Model<T>::layout(const ModelConfig& cfg) {
  ParamSet<T> out;
  for (const auto& s : specs(cfg)) out.add(s.name, Tensor<T>(s.shape), s.group, s.trainable);
  return out;
}

template <typename T>
Model<T>::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  for (const auto& s : specs(cfg_)) params_.add(s.name, initial_value<T>(s, seed), s.group, s.trainable);
}

template <typename T>
Model<T>::Model(ModelConfig cfg, ParamSet<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  const auto want = specs(cfg_);
  if (want.size() != params_.size()) {
    throw ConfigError("model: expected " + std::to_string(want.size()) + " parameters, got " +
                      std::to_string(params_.size()));
  }
  for (const auto& s : want) {
    if (!params_.contains(s.name)) throw ConfigError("model: missing parameter " + s.name);
    auto& e = params_.at(s.name);
    if (e.value.shape() != s.shape) {
      throw numcore::ShapeError("model: parameter " + s.name + " has shape " + numcore::shape_str(e.value.shape()) +
                                ", expected " + numcore::shape_str(s.shape));
    }
    e.group = s.group;
    if (!s.trainable) e.trainable = false;
    if (e.grad.shape() != e.value.shape()) e.grad = Tensor<T>(s.shape);
  }
}

template <typename T>
Var<T> Model<T>::encoder_direction(Graph<T>& g, Var<T> gates_in, const std::string& prefix, bool backward,
                                   const std::vector<std::size_t>& lengths) {
  const auto B = gates_in.shape()[0];
  const auto S = gates_in.shape()[1];
  const auto H = cfg_.encoder.per_direction_hidden();
  auto w_hh = p(g, prefix + "weight_hh");
  Var<T> h = g.constant(Tensor<T>({B, H}));
  Var<T> c = g.constant(Tensor<T>({B, H}));
  std::vector<Var<T>> outs(S);
  std::vector<T> active(B);
  for (std::size_t k = 0; k < S; ++k) {
    const std::size_t t = backward ? S - 1 - k : k;
    bool all = true;
    for (std::size_t b = 0; b < B; ++b) {
      active[b] = t < lengths[b] ? T(1) : T(0);
      all = all && active[b] == T(1);
    }
    auto gates = ops::add(ops::time_slice(gates_in, t), ops::linear(h, w_hh));
    auto hc = all ? ops::lstm_cell(gates, c, h) : ops::lstm_cell(gates, c, h, std::span<const T>(active));
    h = ops::slice_last(hc, 0, H);
    c = ops::slice_last(hc, H, H);
    outs[t] = h;
  }
  return ops::stack_time(std::span<const Var<T>>(outs));
}

template <typename T>
EncoderStates<T> Model<T>::encode(Graph<T>& g, std::span<const audiofeat::FeatureSequence* const> batch, bool training,
                                  DropoutContext<T>& drop) {
  const auto& e = cfg_.encoder;
  if (batch.empty()) throw ConfigError("encode: empty batch");
  std::size_t Tmax = 0;
  std::vector<std::size_t> lengths;
  for (const auto* f : batch) {
    if (f->num_frames() == 0) throw numcore::ShapeError("encode: utterance '" + f->utterance_id + "' has no frames");
    if (f->frames.dim(1) != e.input_dim) {
      throw numcore::ShapeError("encode: utterance '" + f->utterance_id + "' has " + std::to_string(f->frames.dim(1)) +
                                "-dim frames, model expects " + std::to_string(e.input_dim));
    }
    Tmax = std::max(Tmax, f->num_frames());
    lengths.push_back(f->num_frames());
  }
  const auto B = batch.size();
  Tensor<T> x({B, Tmax, e.input_dim});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& fr = batch[b]->frames;
    for (std::size_t i = 0; i < fr.size(); ++i) x[b * Tmax * e.input_dim + i] = static_cast<T>(fr[i]);
  }
  Var<T> h = g.constant(std::move(x));
  numcore::ops::BatchNormOptions bn;
  bn.training = training;
  for (std::size_t i = 0; i < e.cnn_filters.size(); ++i) {
    h = ops::conv1d(h, p(g, cnn_param(i, "weight")), p(g, cnn_param(i, "bias")), e.cnn_stride);
    h = ops::relu(h);
    for (auto& len : lengths) len = ops::conv_output_length(len, e.cnn_stride);
    h = ops::batch_norm(h, p(g, cnn_param(i, "bn.gamma")), p(g, cnn_param(i, "bn.beta")),
                        params_.at(cnn_param(i, "bn.running_mean")).value,
                        params_.at(cnn_param(i, "bn.running_var")).value, lengths, bn);
  }
  for (std::size_t l = 0; l < e.lstm_layers; ++l) {
    std::array<Var<T>, 2> dirs;
    for (bool bwd : {false, true}) {
      const auto prefix = encoder_lstm_param(l, bwd, "");
      auto gates_in = ops::linear(h, p(g, prefix + "weight_ih"), p(g, prefix + "bias"));
      dirs[bwd ? 1 : 0] = encoder_direction(g, gates_in, prefix, bwd, lengths);
    }
    h = ops::concat(std::span<const Var<T>>(dirs));
    if (drop.active()) {
      auto mask = numcore::dropout_mask<T>(h.shape(), drop.ratio, *drop.rng, 1);
      h = apply_mask(h, &mask);
    }
  }
  EncoderStates<T> out;
  out.states = h;
  out.keys = ops::linear(h, p(g, "attention.W_a"));
  out.lengths = std::move(lengths);
  return out;
}

template <typename T>
DecoderVars<T> Model<T>::initial_state(Graph<T>& g, std::size_t batch) const {
  const auto D = cfg_.decoder.lstm_hidden;
  DecoderVars<T> s;
  for (std::size_t l = 0; l < cfg_.decoder.lstm_layers; ++l) {
    s.h.push_back(g.constant(Tensor<T>({batch, D})));
    s.c.push_back(g.constant(Tensor<T>({batch, D})));
  }
  s.attentional = g.constant(Tensor<T>({batch, D}));
  return s;
}

template <typename T>
std::pair<Var<T>, Var<T>> Model<T>::attend(Var<T> h, const EncoderStates<T>& enc) {
  if (h.shape().size() != 2 || h.shape()[1] != enc.keys.shape()[2] || h.shape()[0] != enc.keys.shape()[0]) {
    throw numcore::ShapeError("attend: decoder state " + numcore::shape_str(h.shape()) + " does not fit keys " +
                              numcore::shape_str(enc.keys.shape()));
  }
  auto scores = ops::batched_dot(enc.keys, h);
  auto weights = ops::masked_softmax(scores, std::span<const std::size_t>(enc.lengths));
  auto context = ops::weighted_sum(weights, enc.states);
  return {context, weights};
}

template <typename T>
StepResult<T> Model<T>::decode_step(Graph<T>& g, std::span<const int> prev_ids, DecoderVars<T>& state,
                                    const EncoderStates<T>& enc, DropoutContext<T>& drop) {
  const auto& d = cfg_.decoder;
  const auto B = prev_ids.size();
  for (int id : prev_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= d.vocab_size) {
      throw std::out_of_range("decode_step: token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(d.vocab_size));
    }
  }
  const auto D = d.lstm_hidden;
  if (drop.active() && drop.decoder_masks.empty()) {
    drop.decoder_masks.push_back(numcore::dropout_mask<T>({B, d.embed_dim}, drop.ratio, *drop.rng));
    for (std::size_t l = 0; l < d.lstm_layers; ++l)
      drop.decoder_masks.push_back(numcore::dropout_mask<T>({B, D}, drop.ratio, *drop.rng));
  }
  auto mask = [&](std::size_t i) -> const Tensor<T>* { return drop.active() ? &drop.decoder_masks.at(i) : nullptr; };

  auto emb = apply_mask(ops::embedding(p(g, "decoder.embedding"), prev_ids), mask(0));
  std::array<Var<T>, 2> in_parts{emb, state.attentional};
  Var<T> input = ops::concat(std::span<const Var<T>>(in_parts));
  for (std::size_t l = 0; l < d.lstm_layers; ++l) {
    auto gates = ops::add(ops::linear(input, p(g, decoder_lstm_param(l, "weight_ih")), p(g, decoder_lstm_param(l, "bias"))),
                          ops::linear(state.h[l], p(g, decoder_lstm_param(l, "weight_hh"))));
    auto hc = ops::lstm_cell(gates, state.c[l], state.h[l]);
    state.h[l] = ops::slice_last(hc, 0, D);
    state.c[l] = ops::slice_last(hc, D, D);
    input = apply_mask(state.h[l], mask(l + 1));
  }
  auto [context, weights] = attend(input, enc);
  std::array<Var<T>, 2> comb{context, input};
  state.attentional = ops::tanh(ops::linear(ops::concat(std::span<const Var<T>>(comb)), p(g, "decoder.attn_combine")));
  auto logits = ops::linear(state.attentional, p(g, "output.weight"), p(g, "output.bias"));
  return {logits, weights};
}

template class Model<float>;
template class Model<double>;

}  // namespace xst::seq2seq
