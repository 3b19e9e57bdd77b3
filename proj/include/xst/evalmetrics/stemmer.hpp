#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xst::evalmetrics {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rule text compiled into the library from data/stem_<lang>.txt.
std::string_view builtin_stem_rules(std::string_view language);

// Suffix-stripping stemmer. Rules fire longest suffix first and repeat until
// none applies, so stem(stem(w)) == stem(w).
class Stemmer {
 public:
  static constexpr std::size_t kMinStem = 3;

  explicit Stemmer(std::string_view rules);
  static Stemmer builtin(std::string_view language) { return Stemmer(builtin_stem_rules(language)); }

  std::string stem(std::string word) const;

 private:
  struct Rule {
    std::string suffix, replacement;
  };
  std::vector<Rule> rules_;
  std::vector<std::string> protected_;
};

// One synonym set per line of whitespace-separated words.
class SynonymTable {
 public:
  SynonymTable() = default;
  static SynonymTable parse(std::string_view text);
  static SynonymTable load(const std::string& path);

  bool synonyms(const std::string& a, const std::string& b) const;
  std::size_t num_sets() const { return num_sets_; }

 private:
  std::map<std::string, std::set<std::size_t>> sets_;
  std::size_t num_sets_ = 0;
};

}  // namespace xst::evalmetrics
