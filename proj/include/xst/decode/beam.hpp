#pragma once

#include <any>
#include <stdexcept>
#include <vector>

#include "xst/seq2seq/infer.hpp"

namespace xst::decode {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepOutput {
  std::vector<double> log_probs;  // full vocabulary
  std::any next;
  std::vector<float> weights;
};

// Anything that scores the next token given a recurrent state. PAD (0) and
// BOS (1) are never emitted; EOS is id 2.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t encoder_length() const = 0;
  virtual std::any initial_state() = 0;
  virtual std::vector<StepOutput> step(const std::vector<const std::any*>& states,
                                       const std::vector<int>& prev_tokens) = 0;
};

// Adapter over a trained encoder-decoder for one utterance.
class Seq2SeqStepModel : public StepModel {
 public:
  Seq2SeqStepModel(seq2seq::Model<float>& model, const audiofeat::FeatureSequence& f) : session_(model, f) {}
  std::size_t vocab_size() const override { return session_.vocab_size(); }
  std::size_t encoder_length() const override { return session_.encoder_length(); }
  std::any initial_state() override { return session_.initial(); }
  std::vector<StepOutput> step(const std::vector<const std::any*>& states,
                               const std::vector<int>& prev_tokens) override;

 private:
  seq2seq::InferenceSession session_;
};

struct BeamConfig {
  std::size_t beam_size = 5;
  double length_alpha = 0.6;
  std::size_t max_len = 0;  // 0: 2 * T' + 10

  void validate() const;
};

struct Hypothesis {
  std::vector<int> tokens;  // starts with BOS; ends with EOS when finished
  double log_prob = 0.0;
  bool finished = false;
  double score = 0.0;  // log_prob / length_penalty(length)
  std::vector<std::vector<float>> attention;  // one row per emitted token

  // Emitted tokens, EOS included.
  std::size_t length() const { return tokens.size() - 1; }
  // Emitted tokens without the trailing EOS.
  std::vector<int> output() const;
};

// ((5 + length) / 6) ^ alpha
double length_penalty(std::size_t length, double alpha);

// Higher score first; ties prefer the shorter, then the lexicographically
// smaller token sequence.
bool better(const Hypothesis& a, const Hypothesis& b);

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> nbest;  // every finished hypothesis, best first
};

BeamResult beam_search(StepModel& model, const BeamConfig& cfg);
Hypothesis greedy_decode(StepModel& model, std::size_t max_len = 0, double length_alpha = 0.6);

}  // namespace xst::decode
