#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "xst/transfer/checkpoint.hpp"

namespace xst::transfer {

using numcore::ParamGroup;
using numcore::ParamSet;

class TransferError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Groups whose tensors are indexed by the output vocabulary.
bool is_vocab_indexed(ParamGroup g);

struct TransferSource {
  const Checkpoint* checkpoint = nullptr;
  std::set<ParamGroup> groups;
  std::string label;  // recorded as provenance
};

struct TransferSpec {
  std::vector<TransferSource> sources;
  std::set<ParamGroup> frozen;  // fine-tune mask; empty means all trainable
};

struct TransferResult {
  ParamSet<float> params;
  std::map<ParamGroup, std::string> provenance;  // "fresh" when untouched
};

// Copies the selected groups from their sources into fresh. Shapes must
// agree tensor by tensor and vocab-indexed groups require matching vocabulary
// fingerprints.
TransferResult transfer_parameters(ParamSet<float> fresh, const std::string& target_vocab_fingerprint,
                                   const TransferSpec& spec);

// Named presets: "+asr:cnn", "+asr:enc", "+asr:dec", "+asr:all", "none".
std::set<ParamGroup> preset_groups(const std::string& name);
std::set<ParamGroup> parse_groups(const std::string& csv);
std::string groups_str(const std::set<ParamGroup>& groups);
// Encoder groups from one checkpoint, attention and decoder side from another.
TransferSpec mixed_spec(const Checkpoint& encoder_source, const std::string& encoder_label,
                        const Checkpoint& decoder_source, const std::string& decoder_label);

struct GroupReport {
  ParamGroup group;
  std::string expected_source;  // label, or "fresh"
  std::size_t tensors = 0;
  std::vector<std::string> mismatched;
  bool passed() const { return mismatched.empty(); }
};

struct TransferReport {
  std::vector<GroupReport> groups;
  bool passed() const;
  std::string summary() const;
};

// Checks every tensor bit-for-bit against its expected origin.
TransferReport verify_transfer(const ParamSet<float>& result, const TransferSpec& spec,
                               const ParamSet<float>& fresh_snapshot);

}  // namespace xst::transfer
