#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xst/audiofeat/features.hpp"
#include "xst/numcore/rng.hpp"

namespace xst::harness {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestRow {
  std::string utterance_id;
  std::string path;  // audio (.wav) or feature archive (.xstf)
  std::string speaker_id;
  double duration_seconds = 0.0;
  std::string text;
};

struct Manifest {
  std::string task = "asr";  // asr | st
  std::string source_lang;
  std::string target_lang;
  std::vector<ManifestRow> rows;

  double total_duration() const;
  const ManifestRow& find(const std::string& utterance_id) const;
  std::vector<std::string> texts() const;
  // Unique ids, positive durations, resolvable paths when check_paths is set.
  void validate(bool check_paths = true) const;
};

// TSV: "#task=...\tsrc=...\ttgt=..." line, header line, then one row per
// utterance. Relative paths resolve against the manifest's directory.
Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& m);

// Shuffles, then keeps the longest prefix whose duration fits the budget,
// plus the next utterance when the gap left exceeds the mean duration.
Manifest sample_subset(const Manifest& m, double hours, numcore::RngStream& rng);

// Loads the feature records referenced by a manifest, in manifest order.
std::vector<audiofeat::FeatureSequence> load_manifest_features(const Manifest& m);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::string format_double(double v);

}  // namespace xst::harness
