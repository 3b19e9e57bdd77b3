#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xst/evalmetrics/stemmer.hpp"

namespace xst::evalmetrics {

using Tokens = std::vector<std::string>;

Tokens tokenize(const std::string& line);

// Corpus BLEU over pooled clipped n-gram counts (n = 1..4), no smoothing.
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

struct NgramStats {
  std::vector<long> matches = std::vector<long>(4, 0);
  std::vector<long> totals = std::vector<long>(4, 0);
  long hyp_len = 0;
  long ref_len = 0;
};
NgramStats ngram_stats(const Tokens& hyp, const Tokens& ref);
double bleu_from_stats(const NgramStats& s);

// Levenshtein distance with unit costs.
std::size_t edit_distance(const Tokens& hyp, const Tokens& ref);
double wer(const Tokens& hyp, const Tokens& ref);

struct MatchTiers {
  bool stem = false;
  bool synonym = false;
};

struct MatchResource {
  std::optional<Stemmer> stemmer;
  std::optional<SynonymTable> synonyms;
};

inline constexpr double kInexactWeight = 0.8;

struct UnigramMatch {
  double weight = 0.0;  // sum of matched edge weights
  std::size_t hyp_tokens = 0;
  std::size_t ref_tokens = 0;
  double precision() const { return hyp_tokens ? weight / hyp_tokens : 0.0; }
  double recall() const { return ref_tokens ? weight / ref_tokens : 0.0; }
};

// Maximum bipartite matching tier by tier: exact (1.0), then stem, then
// synonym (0.8 each) over tokens still unmatched.
UnigramMatch unigram_match(const Tokens& hyp, const Tokens& ref, const MatchResource& res, const MatchTiers& tiers);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Token-weighted corpus aggregate.
PrecisionRecall unigram_pr(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                           const MatchResource& res = {}, const MatchTiers& tiers = {});

struct TopKResult {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<PrecisionRecall> sweep;  // index i <-> K = k_min + i
  std::vector<std::string> words;      // the chosen bag
};

// Most frequent training words (ties broken alphabetically).
std::vector<std::string> frequent_words(const std::vector<std::string>& train_text, std::size_t k);

TopKResult naive_topk(const std::vector<std::string>& train_text, const std::vector<std::string>& test_references,
                      std::size_t k_min = 5, std::size_t k_max = 20);

// True when the two utterances share more than half of the types of the
// smaller type set.
bool code_switch_flag(const Tokens& source, const Tokens& target);

struct UtteranceScore {
  std::size_t index = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> wer;
  std::size_t hyp_tokens = 0;
  std::size_t ref_tokens = 0;
};

struct EvalReport {
  double bleu = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> wer;  // corpus: total edits / total reference tokens
  std::optional<std::size_t> k;
  std::vector<UtteranceScore> utterances;

  nlohmann::json to_json() const;
  void write_breakdown_csv(std::ostream& os) const;
};

EvalReport evaluate(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                    const MatchResource& res = {}, const MatchTiers& tiers = {}, bool with_wer = false);

}  // namespace xst::evalmetrics
