#pragma once

#include <vector>

#include "xst/seq2seq/model.hpp"

namespace xst::seq2seq {

// Decoder recurrent state of one hypothesis, detached from any tape.
struct DecoderSnapshot {
  std::vector<Tensor<float>> h, c;  // per layer, [1, dec_hidden]
  Tensor<float> attentional;        // [1, dec_hidden]
};

struct StepOutput {
  std::vector<double> log_probs;  // over the full vocabulary
  DecoderSnapshot next;
  std::vector<float> weights;  // attention over encoder states
};

// Encodes one utterance once and then runs decoder steps on demand with
// frozen parameters and no dropout.
class InferenceSession {
 public:
  InferenceSession(Model<float>& model, const audiofeat::FeatureSequence& f);

  std::size_t encoder_length() const { return states_.dim(1); }
  std::size_t vocab_size() const { return model_.config().decoder.vocab_size; }
  DecoderSnapshot initial() const;

  StepOutput step(const DecoderSnapshot& state, int prev_token);
  // Advances several hypotheses in one batched pass.
  std::vector<StepOutput> step(const std::vector<const DecoderSnapshot*>& states, const std::vector<int>& prev_tokens);

 private:
  Model<float>& model_;
  Tensor<float> states_;  // [1, S, E]
  Tensor<float> keys_;    // [1, S, D]
};

}  // namespace xst::seq2seq
