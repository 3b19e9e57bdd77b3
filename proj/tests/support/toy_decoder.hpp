#pragma once

// Randomly parameterised next-token model over {PAD, BOS, EOS, a, b} plus an
// exhaustive search oracle over every emittable sequence.

#include <cmath>
#include <algorithm>
#include <string>

#include "xst/decode/beam.hpp"
#include "xst/numcore/rng.hpp"

namespace xst::testing {

class ToyDecoder : public decode::StepModel {
 public:
  ToyDecoder(std::uint64_t seed, std::size_t vocab = 5, double spread = 2.0)
      : seed_(seed), vocab_(vocab), spread_(spread) {}

  std::size_t vocab_size() const override { return vocab_; }
  std::size_t encoder_length() const override { return 1; }
  std::any initial_state() override { return std::vector<int>{}; }

  std::vector<double> log_probs(const std::vector<int>& history) const {
    std::string key;
    for (int t : history) key += std::to_string(t) + ",";
    numcore::RngStream rng(seed_, "toy/" + key);
    std::vector<double> logits(vocab_);
    for (auto& l : logits) l = rng.normal(0.0, spread_);
    double mx = *std::max_element(logits.begin(), logits.end()), z = 0;
    for (double l : logits) z += std::exp(l - mx);
    for (auto& l : logits) l = l - mx - std::log(z);
    return logits;
  }

  std::vector<decode::StepOutput> step(const std::vector<const std::any*>& states,
                                       const std::vector<int>& prev) override {
    std::vector<decode::StepOutput> out;
    for (std::size_t i = 0; i < states.size(); ++i) {
      auto hist = std::any_cast<std::vector<int>>(*states[i]);
      if (prev[i] != 1) hist.push_back(prev[i]);
      out.push_back({log_probs(hist), hist, {1.0f}});
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  std::size_t vocab_;
  double spread_;
};

// Enumerates every string of length 1..max_len over the emittable tokens
// (3 + 9 + 27 for three tokens and max_len 3) and keeps the valid outputs:
// EOS only in final position, and EOS-free strings only at max_len.
inline decode::Hypothesis exhaustive_best(const ToyDecoder& model, std::size_t max_len, double alpha,
                                          std::size_t* enumerated = nullptr) {
  const std::size_t E = model.vocab_size() - 2;
  decode::Hypothesis best;
  bool have = false;
  std::size_t count = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < len; ++i) total *= E;
    for (std::size_t code = 0; code < total; ++code) {
      ++count;
      std::vector<int> seq(len);
      for (std::size_t i = 0, c = code; i < len; ++i, c /= E) seq[len - 1 - i] = static_cast<int>(2 + c % E);
      const bool valid_eos = std::find(seq.begin(), seq.end(), 2) == seq.end() - 1;
      const bool no_eos = std::find(seq.begin(), seq.end(), 2) == seq.end();
      if (!valid_eos && !(no_eos && len == max_len)) continue;
      decode::Hypothesis h;
      h.tokens = {1};
      h.tokens.insert(h.tokens.end(), seq.begin(), seq.end());
      std::vector<int> hist;
      for (int t : seq) {
        h.log_prob += model.log_probs(hist)[t];
        hist.push_back(t);
      }
      h.finished = valid_eos;
      h.score = h.log_prob / decode::length_penalty(len, alpha);
      if (!have || decode::better(h, best)) {
        best = h;
        have = true;
      }
    }
  }
  if (enumerated) *enumerated = count;
  return best;
}

}  // namespace xst::testing
