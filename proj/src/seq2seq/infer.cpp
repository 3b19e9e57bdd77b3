#include "xst/seq2seq/infer.hpp"

#include "xst/numcore/ops.hpp"

namespace xst::seq2seq {

namespace {

Tensor<float> tile_rows(const Tensor<float>& x, std::size_t n) {
  auto shape = x.shape();
  shape[0] = n;
  Tensor<float> out(shape);
  for (std::size_t r = 0; r < n; ++r) std::copy(x.values().begin(), x.values().end(), out.data() + r * x.size());
  return out;
}

Tensor<float> row_of(const Tensor<float>& x, std::size_t r) {
  const auto w = x.dim(1);
  Tensor<float> out({1, w});
  std::copy(x.data() + r * w, x.data() + (r + 1) * w, out.data());
  return out;
}

Tensor<float> stack_rows(const std::vector<const Tensor<float>*>& rows) {
  const auto w = rows.front()->dim(1);
  Tensor<float> out({rows.size(), w});
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r]->data(), rows[r]->data() + w, out.data() + r * w);
  return out;
}

}  // namespace

InferenceSession::InferenceSession(Model<float>& model, const audiofeat::FeatureSequence& f) : model_(model) {
  Graph<float> g(false);
  DropoutContext<float> none;
  const audiofeat::FeatureSequence* batch[] = {&f};
  auto enc = model_.encode(g, batch, false, none);
  states_ = enc.states.value();
  keys_ = enc.keys.value();
}

DecoderSnapshot InferenceSession::initial() const {
  const auto& d = model_.config().decoder;
  DecoderSnapshot s;
  s.h.assign(d.lstm_layers, Tensor<float>({1, d.lstm_hidden}));
  s.c.assign(d.lstm_layers, Tensor<float>({1, d.lstm_hidden}));
  s.attentional = Tensor<float>({1, d.lstm_hidden});
  return s;
}

StepOutput InferenceSession::step(const DecoderSnapshot& state, int prev_token) {
  return std::move(step({&state}, {prev_token}).front());
}

std::vector<StepOutput> InferenceSession::step(const std::vector<const DecoderSnapshot*>& states,
                                               const std::vector<int>& prev_tokens) {
  const auto B = states.size();
  if (B == 0 || prev_tokens.size() != B) throw std::invalid_argument("InferenceSession::step: batch size mismatch");
  const auto layers = model_.config().decoder.lstm_layers;
  Graph<float> g(false);
  EncoderStates<float> enc;
  enc.states = g.constant(tile_rows(states_, B));
  enc.keys = g.constant(tile_rows(keys_, B));
  enc.lengths.assign(B, states_.dim(1));
  DecoderVars<float> vars;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<const Tensor<float>*> hs, cs;
    for (const auto* s : states) {
      hs.push_back(&s->h[l]);
      cs.push_back(&s->c[l]);
    }
    vars.h.push_back(g.constant(stack_rows(hs)));
    vars.c.push_back(g.constant(stack_rows(cs)));
  }
  std::vector<const Tensor<float>*> att;
  for (const auto* s : states) att.push_back(&s->attentional);
  vars.attentional = g.constant(stack_rows(att));

  DropoutContext<float> none;
  auto res = model_.decode_step(g, prev_tokens, vars, enc, none);
  const auto logp = numcore::ops::log_softmax_rows(res.logits.value());
  const auto& w = res.weights.value();
  std::vector<StepOutput> out(B);
  const auto V = logp.dim(1), S = w.dim(1);
  for (std::size_t b = 0; b < B; ++b) {
    out[b].log_probs.assign(logp.data() + b * V, logp.data() + (b + 1) * V);
    out[b].weights.assign(w.data() + b * S, w.data() + (b + 1) * S);
    for (std::size_t l = 0; l < layers; ++l) {
      out[b].next.h.push_back(row_of(vars.h[l].value(), b));
      out[b].next.c.push_back(row_of(vars.c[l].value(), b));
    }
    out[b].next.attentional = row_of(vars.attentional.value(), b);
  }
  return out;
}

}  // namespace xst::seq2seq
