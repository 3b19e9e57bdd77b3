#include "xst/decode/beam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xst/textproc/vocab.hpp"

namespace xst::decode {

using textproc::Vocab;

std::vector<StepOutput> Seq2SeqStepModel::step(const std::vector<const std::any*>& states,
                                               const std::vector<int>& prev_tokens) {
  std::vector<const seq2seq::DecoderSnapshot*> snaps;
  for (const auto* s : states) snaps.push_back(std::any_cast<seq2seq::DecoderSnapshot>(s));
  auto res = session_.step(snaps, prev_tokens);
  std::vector<StepOutput> out;
  out.reserve(res.size());
  for (auto& r : res) out.push_back({std::move(r.log_probs), std::move(r.next), std::move(r.weights)});
  return out;
}

void BeamConfig::validate() const {
  if (beam_size < 1) throw DecodeError("beam: beam_size must be >= 1");
  if (!(length_alpha >= 0.0 && length_alpha <= 1.0)) throw DecodeError("beam: length_alpha outside [0, 1]");
}

std::vector<int> Hypothesis::output() const {
  std::vector<int> out(tokens.begin() + 1, tokens.end());
  if (finished && !out.empty() && out.back() == Vocab::kEos) out.pop_back();
  return out;
}

double length_penalty(std::size_t length, double alpha) {
  if (length == 0) throw DecodeError("length_penalty: length must be >= 1");
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

namespace {

struct Live {
  Hypothesis hyp;
  std::any state;
};

std::size_t resolve_max_len(const StepModel& model, std::size_t max_len) {
  if (model.encoder_length() == 0) throw DecodeError("decode: empty encoder output");
  if (model.vocab_size() <= static_cast<std::size_t>(Vocab::kEos)) throw DecodeError("decode: vocabulary lacks EOS");
  return max_len ? max_len : 2 * model.encoder_length() + 10;
}

}  // namespace

BeamResult beam_search(StepModel& model, const BeamConfig& cfg) {
  cfg.validate();
  const auto max_len = resolve_max_len(model, cfg.max_len);
  const auto V = model.vocab_size();
  const double best_possible_lp = length_penalty(max_len, cfg.length_alpha);

  std::vector<Live> live(1);
  live[0].hyp.tokens = {Vocab::kBos};
  live[0].state = model.initial_state();
  std::vector<Hypothesis> finished;

  for (std::size_t len = 1; len <= max_len && !live.empty(); ++len) {
    std::vector<const std::any*> states;
    std::vector<int> prev;
    for (const auto& l : live) {
      states.push_back(&l.state);
      prev.push_back(l.hyp.tokens.back());
    }
    auto steps = model.step(states, prev);

    struct Cand {
      std::size_t parent;
      int token;
      double log_prob;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      if (steps[i].log_probs.size() != V) throw DecodeError("decode: step returned wrong vocabulary size");
      for (std::size_t v = Vocab::kEos; v < V; ++v)
        cands.push_back({i, static_cast<int>(v), live[i].hyp.log_prob + steps[i].log_probs[v]});
    }
    // all candidates share one length, so ties fall back to token order
    std::stable_sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const auto& ta = live[a.parent].hyp.tokens;
      const auto& tb = live[b.parent].hyp.tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    });
    if (cands.size() > cfg.beam_size) cands.resize(cfg.beam_size);

    std::vector<Live> next;
    for (const auto& c : cands) {
      Live n;
      n.hyp = live[c.parent].hyp;
      n.hyp.tokens.push_back(c.token);
      n.hyp.log_prob = c.log_prob;
      n.hyp.attention.push_back(steps[c.parent].weights);
      if (c.token == Vocab::kEos || len == max_len) {
        n.hyp.finished = c.token == Vocab::kEos;
        n.hyp.score = n.hyp.log_prob / length_penalty(n.hyp.length(), cfg.length_alpha);
        finished.push_back(std::move(n.hyp));
      } else {
        n.state = steps[c.parent].next;
        next.push_back(std::move(n));
      }
    }
    live = std::move(next);

    // A live hypothesis can only lose log-probability, and its penalty is at
    // most lp(max_len), so log_prob / lp(max_len) bounds its final score.
    if (!finished.empty() && !live.empty()) {
      const auto best = std::min_element(finished.begin(), finished.end(), better);
      double bound = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) bound = std::max(bound, l.hyp.log_prob / best_possible_lp);
      if (bound < best->score) break;
    }
  }
  std::sort(finished.begin(), finished.end(), better);
  BeamResult out;
  out.best = finished.front();
  out.nbest = std::move(finished);
  return out;
}

Hypothesis greedy_decode(StepModel& model, std::size_t max_len, double length_alpha) {
  max_len = resolve_max_len(model, max_len);
  const auto V = model.vocab_size();
  Hypothesis h;
  h.tokens = {Vocab::kBos};
  std::any state = model.initial_state();
  for (std::size_t len = 1; len <= max_len; ++len) {
    auto step = std::move(model.step({&state}, {h.tokens.back()}).front());
    std::size_t best = Vocab::kEos;
    for (std::size_t v = Vocab::kEos + 1; v < V; ++v)
      if (step.log_probs[v] > step.log_probs[best]) best = v;
    h.tokens.push_back(static_cast<int>(best));
    h.log_prob += step.log_probs[best];
    h.attention.push_back(std::move(step.weights));
    if (static_cast<int>(best) == Vocab::kEos) {
      h.finished = true;
      break;
    }
    state = std::move(step.next);
  }
  h.score = h.log_prob / length_penalty(h.length(), length_alpha);
  return h;
}

}  // namespace xst::decode
