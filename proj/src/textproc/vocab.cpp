#include "xst/textproc/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace xst::textproc {

Vocab::Vocab(std::vector<std::string> tokens) {
  std::set<std::string> uniq(tokens.begin(), tokens.end());
  for (auto sp : {kPadToken, kBosToken, kEosToken}) {
    if (uniq.count(std::string(sp))) throw TextError("vocab: token '" + std::string(sp) + "' collides with a special");
  }
  tokens_ = {std::string(kPadToken), std::string(kBosToken), std::string(kEosToken)};
  tokens_.insert(tokens_.end(), uniq.begin(), uniq.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || tokens_[i].find_first_of(" \t\n\r") != std::string::npos) {
      throw TextError("vocab: tokens must be non-empty and free of whitespace");
    }
    index_.emplace(tokens_[i], static_cast<int>(i));
  }
  std::vector<std::string> sorted = tokens_;
  std::sort(sorted.begin(), sorted.end());
  std::string blob;
  for (const auto& t : sorted) {
    blob += t;
    blob += '\n';
  }
  fingerprint_ = sha256_hex(blob);
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw TextError("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

std::optional<int> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocab::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw TextError("vocab: no entry for subword '" + std::string(token) + "' (vocabulary/BPE mismatch?)");
  return *found;
}

std::vector<int> Vocab::encode(const BpeModel& bpe, std::string_view line) const {
  std::vector<int> ids{kBos};
  for (const auto& sw : bpe.apply(line)) ids.push_back(id(sw));
  ids.push_back(kEos);
  return ids;
}

TokenSequence Vocab::encode(const BpeModel& bpe, const std::string& utterance_id, std::string_view line) const {
  return {utterance_id, encode(bpe, line)};
}

std::vector<std::string> Vocab::subwords(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(token(i));
  }
  return out;
}

std::string Vocab::decode(std::span<const int> ids) const {
  auto sw = subwords(ids);
  return join_subwords(sw);
}

void Vocab::save(std::ostream& os) const {
  for (const auto& t : tokens_) os << t << '\n';
}

Vocab Vocab::load(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < 3 || lines[0] != kPadToken || lines[1] != kBosToken || lines[2] != kEosToken) {
    throw TextError("vocab: file must start with the special tokens <pad>, <s>, </s>");
  }
  Vocab v(std::vector<std::string>(lines.begin() + 3, lines.end()));
  if (v.tokens_ != lines) throw TextError("vocab: tokens are not in canonical (sorted, unique) order");
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw TextError("vocab: cannot write " + path);
  save(os);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw TextError("vocab: cannot read " + path);
  return load(is);
}

Vocab build_vocab(const BpeModel& bpe, std::span<const std::string> corpus) {
  std::set<std::string> types;
  for (const auto& line : corpus) {
    for (const auto& w : split_whitespace(line)) {
      for (const auto& ch : utf8_chars(w)) {
        types.insert(ch);
        types.insert(ch + std::string(kEndOfWord));
      }
    }
    for (const auto& sw : bpe.apply(line)) types.insert(sw);
  }
  for (const auto& m : bpe.merges()) types.insert(m.left + m.right);
  return Vocab(std::vector<std::string>(types.begin(), types.end()));
}

}  // namespace xst::textproc
