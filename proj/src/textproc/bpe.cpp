#include "xst/textproc/bpe.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace xst::textproc {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw TextError("sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t n = 1;
    if (c >= 0xF0) n = 4;
    else if (c >= 0xE0) n = 3;
    else if (c >= 0xC0) n = 2;
    n = std::min(n, word.size() - i);
    out.emplace_back(word.substr(i, n));
    i += n;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string normalize_whitespace(std::string_view line) {
  std::string out;
  for (const auto& w : split_whitespace(line)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string join_subwords(std::span<const std::string> subwords) {
  std::string out;
  for (const auto& s : subwords) {
    if (s.size() >= kEndOfWord.size() && s.compare(s.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
      out.append(s, 0, s.size() - kEndOfWord.size());
      out += ' ';
    } else {
      out += s;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

namespace {

std::vector<std::string> initial_symbols(std::string_view word) {
  auto syms = utf8_chars(word);
  if (!syms.empty()) syms.back() += kEndOfWord;
  return syms;
}

std::string pair_key(const std::string& l, const std::string& r) { return l + ' ' + r; }

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges, std::string corpus_fingerprint)
    : merges_(std::move(merges)), corpus_fingerprint_(std::move(corpus_fingerprint)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    if (!rank_index_.emplace(pair_key(merges_[i].left, merges_[i].right), i).second) {
      throw TextError("bpe: duplicate merge '" + merges_[i].left + " " + merges_[i].right + "'");
    }
  }
}

std::size_t BpeModel::rank_of(const std::string& left, const std::string& right) const {
  auto it = rank_index_.find(pair_key(left, right));
  return it == rank_index_.end() ? std::numeric_limits<std::size_t>::max() : it->second;
}

std::vector<std::string> BpeModel::segment_word(std::string_view word) const {
  auto syms = initial_symbols(word);
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  while (syms.size() > 1) {
    std::size_t best = kNone;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) best = std::min(best, rank_of(syms[i], syms[i + 1]));
    if (best == kNone) break;
    const auto& m = merges_[best];
    std::vector<std::string> next;
    next.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == m.left && syms[i + 1] == m.right) {
        next.push_back(m.left + m.right);
        i += 2;
      } else {
        next.push_back(syms[i]);
        ++i;
      }
    }
    syms = std::move(next);
  }
  return syms;
}

std::vector<std::string> BpeModel::apply(std::string_view line) const {
  std::vector<std::string> out;
  for (const auto& w : split_whitespace(line)) {
    auto seg = segment_word(w);
    out.insert(out.end(), seg.begin(), seg.end());
  }
  return out;
}

void BpeModel::save(std::ostream& os) const {
  os << "xstbpe v1 " << merges_.size() << ' ' << (corpus_fingerprint_.empty() ? "-" : corpus_fingerprint_) << '\n';
  for (const auto& m : merges_) os << m.left << ' ' << m.right << '\n';
}

BpeModel BpeModel::load(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw TextError("bpe: empty model file");
  std::istringstream hs(header);
  std::string magic, version, fp;
  std::size_t n = 0;
  if (!(hs >> magic >> version >> n >> fp) || magic != "xstbpe") throw TextError("bpe: bad header '" + header + "'");
  if (version != "v1") throw TextError("bpe: unsupported version " + version);
  std::vector<Merge> merges;
  std::string line;
  while (merges.size() < n && std::getline(is, line)) {
    std::istringstream ls(line);
    Merge m;
    std::string extra;
    if (!(ls >> m.left >> m.right) || (ls >> extra)) throw TextError("bpe: malformed merge line '" + line + "'");
    merges.push_back(std::move(m));
  }
  if (merges.size() != n) {
    throw TextError("bpe: header announces " + std::to_string(n) + " merges, found " + std::to_string(merges.size()));
  }
  return BpeModel(std::move(merges), fp == "-" ? "" : fp);
}

void BpeModel::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw TextError("bpe: cannot write " + path);
  save(os);
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw TextError("bpe: cannot read " + path);
  return load(is);
}

BpeModel learn_bpe(std::span<const std::string> corpus, std::size_t num_merges) {
  using Pair = std::pair<std::string, std::string>;
  std::map<std::string, long> word_freq;
  std::string joined;
  for (const auto& line : corpus) {
    joined += line;
    joined += '\n';
    for (const auto& w : split_whitespace(line)) ++word_freq[w];
  }
  if (word_freq.empty()) throw TextError("learn_bpe: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> freqs;
  for (const auto& [w, f] : word_freq) {
    words.push_back(initial_symbols(w));
    freqs.push_back(f);
  }

  std::map<Pair, long> stats;
  std::map<Pair, std::set<std::size_t>> where;
  auto account = [&](std::size_t wi, long sign) {
    const auto& s = words[wi];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      Pair p{s[i], s[i + 1]};
      auto& c = stats[p];
      c += sign * freqs[wi];
      if (sign > 0) where[p].insert(wi);
      if (c == 0) stats.erase(p);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  std::vector<Merge> merges;
  while (merges.size() < num_merges && !stats.empty()) {
    // std::map iterates pairs in lexicographic order, so the first maximum wins ties.
    auto best = stats.begin();
    for (auto it = stats.begin(); it != stats.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    if (best->second < 2) break;
    const Pair chosen = best->first;
    merges.push_back({chosen.first, chosen.second});
    const auto touched = where[chosen];
    for (auto wi : touched) {
      account(wi, -1);
      auto& s = words[wi];
      std::vector<std::string> next;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == chosen.first && s[i + 1] == chosen.second) {
          next.push_back(chosen.first + chosen.second);
          i += 2;
        } else {
          next.push_back(s[i]);
          ++i;
        }
      }
      s = std::move(next);
      account(wi, +1);
    }
    where.erase(chosen);
  }
  return BpeModel(std::move(merges), sha256_hex(joined));
}

}  // namespace xst::textproc
