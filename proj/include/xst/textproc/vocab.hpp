#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xst/textproc/bpe.hpp"

namespace xst::textproc {

struct TokenSequence {
  std::string utterance_id;
  std::vector<int> ids;  // BOS ... EOS
};

// Token <-> id bijection. Specials occupy ids 0..2; the remaining tokens are
// sorted bytewise, so equal token sets always produce equal vocabularies.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kBosToken = "<s>";
  static constexpr std::string_view kEosToken = "</s>";

  Vocab() : Vocab(std::vector<std::string>{}) {}
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  std::optional<int> find(std::string_view token) const;
  int id(std::string_view token) const;  // throws TextError
  const std::vector<std::string>& tokens() const { return tokens_; }

  // SHA-256 over the sorted token list.
  const std::string& fingerprint() const { return fingerprint_; }

  std::vector<int> encode(const BpeModel& bpe, std::string_view line) const;
  TokenSequence encode(const BpeModel& bpe, const std::string& utterance_id, std::string_view line) const;
  // Skips PAD/BOS, stops at EOS, joins subwords into words.
  std::string decode(std::span<const int> ids) const;
  std::vector<std::string> subwords(std::span<const int> ids) const;

  void save(std::ostream& os) const;
  static Vocab load(std::istream& is);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::string fingerprint_;
};

// Specials + both forms (plain and word-final) of every character in the
// corpus + every merge product + every type produced on the corpus.
Vocab build_vocab(const BpeModel& bpe, std::span<const std::string> corpus);

}  // namespace xst::textproc
