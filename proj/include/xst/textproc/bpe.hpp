#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xst::textproc {

class TextError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kEndOfWord = "</w>";

struct Merge {
  std::string left;
  std::string right;
  friend bool operator==(const Merge&, const Merge&) = default;
};

// Ordered merge list. Word-final symbols carry the "</w>" marker.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<Merge> merges, std::string corpus_fingerprint);

  const std::vector<Merge>& merges() const { return merges_; }
  const std::string& corpus_fingerprint() const { return corpus_fingerprint_; }

  // Applies merges by rank to a single word; unseen characters stay singletons.
  std::vector<std::string> segment_word(std::string_view word) const;
  std::vector<std::string> apply(std::string_view line) const;

  void save(std::ostream& os) const;
  static BpeModel load(std::istream& is);
  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);

 private:
  std::vector<Merge> merges_;
  std::string corpus_fingerprint_;
  std::unordered_map<std::string, std::size_t> rank_index_;  // "left right" -> rank
  std::size_t rank_of(const std::string& left, const std::string& right) const;
};

// Greedy most-frequent-pair learning; ties go to the lexicographically
// smallest (left, right). Stops early once no pair occurs at least twice.
BpeModel learn_bpe(std::span<const std::string> corpus, std::size_t num_merges = 1000);

// Splits a line into UTF-8 code points.
std::vector<std::string> utf8_chars(std::string_view word);
std::vector<std::string> split_whitespace(std::string_view line);
std::string normalize_whitespace(std::string_view line);

// Joins subwords back into words using the end-of-word marker.
std::string join_subwords(std::span<const std::string> subwords);

std::string sha256_hex(std::string_view data);

}  // namespace xst::textproc
