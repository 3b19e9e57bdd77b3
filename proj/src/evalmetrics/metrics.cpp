#include "xst/evalmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace xst::evalmetrics {

Tokens tokenize(const std::string& line) {
  Tokens out;
  std::istringstream is(line);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

namespace {

void check_aligned(const std::vector<std::string>& h, const std::vector<std::string>& r, const char* what) {
  if (h.size() != r.size()) {
    throw MetricError(std::string(what) + ": " + std::to_string(h.size()) + " hypotheses but " +
                      std::to_string(r.size()) + " references");
  }
  if (h.empty()) throw MetricError(std::string(what) + ": empty corpus");
}

}  // namespace

NgramStats ngram_stats(const Tokens& hyp, const Tokens& ref) {
  NgramStats s;
  s.hyp_len = static_cast<long>(hyp.size());
  s.ref_len = static_cast<long>(ref.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<std::vector<std::string>, long> ref_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[Tokens(ref.begin() + i, ref.begin() + i + n)];
    std::map<std::vector<std::string>, long> hyp_counts;
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) ++hyp_counts[Tokens(hyp.begin() + i, hyp.begin() + i + n)];
    for (const auto& [g, c] : hyp_counts) {
      const auto it = ref_counts.find(g);
      s.matches[n - 1] += std::min(c, it == ref_counts.end() ? 0L : it->second);
      s.totals[n - 1] += c;
    }
  }
  return s;
}

double bleu_from_stats(const NgramStats& s) {
  if (s.hyp_len == 0) return 0.0;
  double log_p = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
    log_p += std::log(static_cast<double>(s.matches[n]) / s.totals[n]);
  }
  const double bp = s.hyp_len < s.ref_len ? std::exp(1.0 - static_cast<double>(s.ref_len) / s.hyp_len) : 1.0;
  return 100.0 * bp * std::exp(log_p / 4.0);
}

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  check_aligned(hypotheses, references, "bleu");
  NgramStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto s = ngram_stats(tokenize(hypotheses[i]), tokenize(references[i]));
    for (std::size_t n = 0; n < 4; ++n) {
      total.matches[n] += s.matches[n];
      total.totals[n] += s.totals[n];
    }
    total.hyp_len += s.hyp_len;
    total.ref_len += s.ref_len;
  }
  return bleu_from_stats(total);
}

std::size_t edit_distance(const Tokens& hyp, const Tokens& ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

double wer(const Tokens& hyp, const Tokens& ref) {
  if (ref.empty()) throw MetricError("wer: empty reference");
  return static_cast<double>(edit_distance(hyp, ref)) / ref.size();
}

namespace {

// Kuhn's augmenting-path matching restricted to free vertices.
std::size_t augment_matching(std::size_t nh, std::size_t nr, const std::function<bool(std::size_t, std::size_t)>& edge,
                             std::vector<int>& match_h, std::vector<int>& match_r) {
  std::vector<int> tier_r(nr, -1);
  std::vector<char> eligible_r(nr);
  for (std::size_t j = 0; j < nr; ++j) eligible_r[j] = match_r[j] < 0;
  std::vector<char> seen;
  std::function<bool(std::size_t)> try_h = [&](std::size_t i) {
    for (std::size_t j = 0; j < nr; ++j) {
      if (!eligible_r[j] || seen[j] || !edge(i, j)) continue;
      seen[j] = 1;
      if (tier_r[j] < 0 || try_h(static_cast<std::size_t>(tier_r[j]))) {
        tier_r[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  std::size_t added = 0;
  for (std::size_t i = 0; i < nh; ++i) {
    if (match_h[i] >= 0) continue;
    seen.assign(nr, 0);
    if (try_h(i)) ++added;
  }
  for (std::size_t j = 0; j < nr; ++j) {
    if (tier_r[j] >= 0) {
      match_r[j] = tier_r[j];
      match_h[static_cast<std::size_t>(tier_r[j])] = static_cast<int>(j);
    }
  }
  return added;
}

}  // namespace

UnigramMatch unigram_match(const Tokens& hyp, const Tokens& ref, const MatchResource& res, const MatchTiers& tiers) {
  if (tiers.stem && !res.stemmer) throw MetricError("unigram_pr: stem tier requested without a stemmer");
  if (tiers.synonym && !res.synonyms) throw MetricError("unigram_pr: synonym tier requested without a synonym table");
  UnigramMatch m;
  m.hyp_tokens = hyp.size();
  m.ref_tokens = ref.size();
  std::vector<int> match_h(hyp.size(), -1), match_r(ref.size(), -1);
  const auto exact = augment_matching(hyp.size(), ref.size(), [&](auto i, auto j) { return hyp[i] == ref[j]; },
                                      match_h, match_r);
  m.weight += static_cast<double>(exact);
  if (tiers.stem) {
    Tokens hs, rs;
    for (const auto& w : hyp) hs.push_back(res.stemmer->stem(w));
    for (const auto& w : ref) rs.push_back(res.stemmer->stem(w));
    const auto n = augment_matching(hyp.size(), ref.size(), [&](auto i, auto j) { return hs[i] == rs[j]; }, match_h,
                                    match_r);
    m.weight += kInexactWeight * static_cast<double>(n);
  }
  if (tiers.synonym) {
    const auto n = augment_matching(
        hyp.size(), ref.size(), [&](auto i, auto j) { return res.synonyms->synonyms(hyp[i], ref[j]); }, match_h,
        match_r);
    m.weight += kInexactWeight * static_cast<double>(n);
  }
  return m;
}

PrecisionRecall unigram_pr(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                           const MatchResource& res, const MatchTiers& tiers) {
  check_aligned(hypotheses, references, "unigram_pr");
  double w = 0;
  std::size_t nh = 0, nr = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto m = unigram_match(tokenize(hypotheses[i]), tokenize(references[i]), res, tiers);
    w += m.weight;
    nh += m.hyp_tokens;
    nr += m.ref_tokens;
  }
  return {nh ? w / nh : 0.0, nr ? w / nr : 0.0};
}

std::vector<std::string> frequent_words(const std::vector<std::string>& train_text, std::size_t k) {
  std::map<std::string, long> counts;
  for (const auto& line : train_text)
    for (const auto& w : tokenize(line)) ++counts[w];
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(ranked[i].first);
  return out;
}

TopKResult naive_topk(const std::vector<std::string>& train_text, const std::vector<std::string>& test_references,
                      std::size_t k_min, std::size_t k_max) {
  if (k_min == 0 || k_min > k_max) throw MetricError("naive_topk: invalid K range");
  if (frequent_words(train_text, 1).empty()) throw MetricError("naive_topk: empty training text");
  TopKResult best;
  double best_gap = 0.0;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const auto words = frequent_words(train_text, k);
    std::string bag;
    for (const auto& w : words) bag += (bag.empty() ? "" : " ") + w;
    const std::vector<std::string> hyps(test_references.size(), bag);
    const auto pr = unigram_pr(hyps, test_references);
    best.sweep.push_back(pr);
    const double gap = std::abs(pr.precision - pr.recall);
    if (k == k_min || gap < best_gap) {
      best_gap = gap;
      best.k = k;
      best.precision = pr.precision;
      best.recall = pr.recall;
      best.words = words;
    }
  }
  return best;
}

bool code_switch_flag(const Tokens& source, const Tokens& target) {
  if (source.empty() || target.empty()) throw MetricError("code_switch_flag: empty utterance");
  const std::set<std::string> a(source.begin(), source.end()), b(target.begin(), target.end());
  std::size_t shared = 0;
  for (const auto& w : a) shared += b.count(w);
  return 2 * shared > std::min(a.size(), b.size());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"bleu", bleu}, {"precision", precision}, {"recall", recall}};
  if (wer) j["wer"] = *wer;
  if (k) j["k"] = *k;
  return j;
}

void EvalReport::write_breakdown_csv(std::ostream& os) const {
  os << "index,hyp_tokens,ref_tokens,precision,recall" << (wer ? ",wer" : "") << '\n';
  os << std::setprecision(6) << std::fixed;
  for (const auto& u : utterances) {
    os << u.index << ',' << u.hyp_tokens << ',' << u.ref_tokens << ',' << u.precision << ',' << u.recall;
    if (wer) os << ',' << u.wer.value_or(0.0);
    os << '\n';
  }
}

EvalReport evaluate(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                    const MatchResource& res, const MatchTiers& tiers, bool with_wer) {
  check_aligned(hypotheses, references, "evaluate");
  EvalReport r;
  r.bleu = bleu(hypotheses, references);
  const auto pr = unigram_pr(hypotheses, references, res, tiers);
  r.precision = pr.precision;
  r.recall = pr.recall;
  std::size_t edits = 0, ref_total = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto h = tokenize(hypotheses[i]), ref = tokenize(references[i]);
    const auto m = unigram_match(h, ref, res, tiers);
    UtteranceScore u{i, m.precision(), m.recall(), std::nullopt, h.size(), ref.size()};
    if (with_wer) {
      const auto d = edit_distance(h, ref);
      edits += d;
      ref_total += ref.size();
      if (!ref.empty()) u.wer = static_cast<double>(d) / ref.size();
    }
    r.utterances.push_back(u);
  }
  if (with_wer) {
    if (ref_total == 0) throw MetricError("wer: empty reference corpus");
    r.wer = static_cast<double>(edits) / ref_total;
  }
  return r;
}

}  // namespace xst::evalmetrics
