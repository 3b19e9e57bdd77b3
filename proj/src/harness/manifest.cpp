#include "xst/harness/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace xst::harness {

namespace fs = std::filesystem;

namespace {

constexpr const char* kHeader = "utterance_id\tpath\tspeaker_id\tduration_seconds\ttext";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw HarnessError("cannot parse " + what + " '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double Manifest::total_duration() const {
  double t = 0.0;
  for (const auto& r : rows) t += r.duration_seconds;
  return t;
}

const ManifestRow& Manifest::find(const std::string& utterance_id) const {
  for (const auto& r : rows)
    if (r.utterance_id == utterance_id) return r;
  throw HarnessError("utterance '" + utterance_id + "' not in manifest");
}

std::vector<std::string> Manifest::texts() const {
  std::vector<std::string> out;
  for (const auto& r : rows) out.push_back(r.text);
  return out;
}

void Manifest::validate(bool check_paths) const {
  if (task != "asr" && task != "st") throw HarnessError("manifest: task must be asr or st, got '" + task + "'");
  std::set<std::string> ids;
  for (const auto& r : rows) {
    if (r.utterance_id.empty()) throw HarnessError("manifest: empty utterance id");
    if (!ids.insert(r.utterance_id).second) throw HarnessError("manifest: duplicate utterance id " + r.utterance_id);
    if (!(r.duration_seconds > 0.0)) throw HarnessError("manifest: non-positive duration for " + r.utterance_id);
    if (check_paths && !fs::exists(r.path)) throw HarnessError("manifest: missing file " + r.path + " for " + r.utterance_id);
  }
}

Manifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot read manifest " + path);
  const auto base = fs::path(path).parent_path();
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& kv : split_tabs(line.substr(1))) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "task") m.task = v;
        else if (k == "src") m.source_lang = v;
        else if (k == "tgt") m.target_lang = v;
      }
      continue;
    }
    if (!header) {
      if (line != kHeader) throw HarnessError(path + ": expected header '" + std::string(kHeader) + "'");
      header = true;
      continue;
    }
    const auto f = split_tabs(line);
    if (f.size() != 5) throw HarnessError(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
    ManifestRow r;
    r.utterance_id = f[0];
    r.path = fs::path(f[1]).is_absolute() ? f[1] : (base / f[1]).lexically_normal().string();
    r.speaker_id = f[2];
    r.duration_seconds = parse_double(f[3], "duration at line " + std::to_string(lineno));
    r.text = f[4];
    m.rows.push_back(std::move(r));
  }
  if (!header) throw HarnessError(path + ": missing header");
  m.validate(false);
  return m;
}

void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream os(path);
  if (!os) throw HarnessError("cannot write manifest " + path);
  const auto base = fs::absolute(fs::path(path)).parent_path();
  os << "#task=" << m.task << "\tsrc=" << m.source_lang << "\ttgt=" << m.target_lang << '\n' << kHeader << '\n';
  for (const auto& r : m.rows) {
    auto p = fs::path(r.path);
    if (p.is_absolute() || fs::exists(p)) {
      const auto rel = fs::absolute(p).lexically_relative(base);
      if (!rel.empty()) p = rel;
    }
    if (r.text.find_first_of("\t\n") != std::string::npos) throw HarnessError("manifest: text contains tab or newline");
    os << r.utterance_id << '\t' << p.string() << '\t' << r.speaker_id << '\t' << format_double(r.duration_seconds)
       << '\t' << r.text << '\n';
  }
}

Manifest sample_subset(const Manifest& m, double hours, numcore::RngStream& rng) {
  if (!(hours >= 0.0)) throw HarnessError("sample_subset: hours must be >= 0");
  std::vector<std::size_t> order(m.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const double budget = hours * 3600.0;
  Manifest out = m;
  out.rows.clear();
  double total = 0.0;
  std::size_t taken = 0;
  for (; taken < order.size(); ++taken) {
    const double d = m.rows[order[taken]].duration_seconds;
    if (total + d > budget) break;
    total += d;
    out.rows.push_back(m.rows[order[taken]]);
  }
  // A long next utterance can leave a gap wider than a typical utterance.
  if (taken < order.size() && budget - total > m.total_duration() / static_cast<double>(m.rows.size()))
    out.rows.push_back(m.rows[order[taken]]);
  return out;
}

std::vector<audiofeat::FeatureSequence> load_manifest_features(const Manifest& m) {
  std::map<std::string, std::map<std::string, audiofeat::FeatureSequence>> archives;
  std::vector<audiofeat::FeatureSequence> out;
  out.reserve(m.rows.size());
  for (const auto& r : m.rows) {
    auto it = archives.find(r.path);
    if (it == archives.end()) {
      std::map<std::string, audiofeat::FeatureSequence> byid;
      for (auto& f : audiofeat::load_features(r.path)) {
        auto id = f.utterance_id;
        byid.emplace(std::move(id), std::move(f));
      }
      it = archives.emplace(r.path, std::move(byid)).first;
    }
    const auto f = it->second.find(r.utterance_id);
    if (f == it->second.end()) throw HarnessError("no features for '" + r.utterance_id + "' in " + r.path);
    out.push_back(f->second);
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path);
  if (!os) throw HarnessError("cannot write " + path);
  for (const auto& l : lines) os << l << '\n';
}

}  // namespace xst::harness
