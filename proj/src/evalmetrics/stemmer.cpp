#include "xst/evalmetrics/stemmer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace xst::evalmetrics {

namespace {

bool ends_with(const std::string& w, const std::string& s) {
  return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
}

}  // namespace

Stemmer::Stemmer(std::string_view rules) {
  std::istringstream is{std::string(rules)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string suffix, repl, extra;
    if (!(ls >> suffix) || suffix[0] == '#') continue;
    if (suffix[0] == '!') {
      if (suffix.size() < 2) throw MetricError("stem rules line " + std::to_string(lineno) + ": empty protected suffix");
      protected_.push_back(suffix.substr(1));
      continue;
    }
    if (!(ls >> repl) || (ls >> extra)) {
      throw MetricError("stem rules line " + std::to_string(lineno) + ": expected 'suffix replacement'");
    }
    if (repl == "-") repl.clear();
    if (repl.size() >= suffix.size()) {
      throw MetricError("stem rules line " + std::to_string(lineno) + ": replacement must be shorter than suffix");
    }
    rules_.push_back({suffix, repl});
  }
  std::stable_sort(rules_.begin(), rules_.end(),
                   [](const Rule& a, const Rule& b) { return a.suffix.size() > b.suffix.size(); });
}

std::string Stemmer::stem(std::string word) const {
  for (;;) {
    if (std::any_of(protected_.begin(), protected_.end(), [&](const auto& p) { return ends_with(word, p); })) break;
    bool fired = false;
    for (const auto& r : rules_) {
      if (!ends_with(word, r.suffix)) continue;
      if (word.size() - r.suffix.size() + r.replacement.size() < kMinStem) continue;
      word = word.substr(0, word.size() - r.suffix.size()) + r.replacement;
      fired = true;
      break;
    }
    if (!fired) break;
  }
  return word;
}

SynonymTable SynonymTable::parse(std::string_view text) {
  SynonymTable t;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string w;
    bool any = false;
    while (ls >> w) {
      t.sets_[w].insert(t.num_sets_);
      any = true;
    }
    if (any) ++t.num_sets_;
  }
  return t;
}

SynonymTable SynonymTable::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MetricError("cannot read synonym table " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

bool SynonymTable::synonyms(const std::string& a, const std::string& b) const {
  const auto ia = sets_.find(a), ib = sets_.find(b);
  if (ia == sets_.end() || ib == sets_.end()) return false;
  for (auto s : ia->second)
    if (ib->second.count(s)) return true;
  return false;
}

}  // namespace xst::evalmetrics
