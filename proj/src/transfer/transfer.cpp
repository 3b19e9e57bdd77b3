#include "xst/transfer/transfer.hpp"

#include <sstream>

namespace xst::transfer {

using numcore::group_name;

bool is_vocab_indexed(ParamGroup g) { return g == ParamGroup::decoder || g == ParamGroup::output; }

namespace {

void check_spec(const TransferSpec& spec) {
  std::set<ParamGroup> seen;
  bool any = false;
  for (const auto& src : spec.sources) {
    if (!src.checkpoint) throw TransferError("transfer: source '" + src.label + "' has no checkpoint");
    for (auto g : src.groups) {
      any = true;
      if (!seen.insert(g).second) {
        throw TransferError("transfer: group '" + std::string(group_name(g)) + "' selected from more than one source");
      }
    }
  }
  if (!any) throw TransferError("transfer: no parameter groups selected");
}

}  // namespace

TransferResult transfer_parameters(ParamSet<float> fresh, const std::string& target_vocab_fingerprint,
                                   const TransferSpec& spec) {
  check_spec(spec);
  TransferResult out;
  for (auto g : numcore::kAllGroups) out.provenance[g] = "fresh";
  for (const auto& src : spec.sources) {
    const auto& ckpt = *src.checkpoint;
    for (auto g : src.groups) {
      if (is_vocab_indexed(g) && ckpt.header.vocab_fingerprint != target_vocab_fingerprint) {
        throw TransferError("transfer: vocabulary fingerprint mismatch for group '" + std::string(group_name(g)) +
                            "' from '" + src.label +
                            "': decoder and output layers are indexed by the vocabulary, so only encoder "
                            "parameters can be transferred between tasks with different vocabularies");
      }
    }
    for (auto& [name, entry] : fresh) {
      if (!src.groups.count(entry.group)) continue;
      if (!ckpt.params.contains(name)) {
        throw TransferError("transfer: source '" + src.label + "' has no parameter " + name);
      }
      const auto& from = ckpt.params.at(name);
      if (from.group != entry.group) {
        throw TransferError("transfer: parameter " + name + " is in group '" + std::string(group_name(from.group)) +
                            "' in '" + src.label + "' but '" + std::string(group_name(entry.group)) +
                            "' in the target");
      }
      if (from.value.shape() != entry.value.shape()) {
        throw TransferError("transfer: shape mismatch for " + name + ": source '" + src.label + "' has " +
                            numcore::shape_str(from.value.shape()) + ", target has " +
                            numcore::shape_str(entry.value.shape()));
      }
    }
    for (auto& [name, entry] : fresh)
      if (src.groups.count(entry.group)) entry.value = ckpt.params.at(name).value;
    for (auto g : src.groups) out.provenance[g] = src.label;
  }
  for (auto& [name, entry] : fresh) {
    if (spec.frozen.count(entry.group)) entry.trainable = false;
    entry.grad = numcore::Tensor<float>(entry.value.shape());
  }
  out.params = std::move(fresh);
  return out;
}

std::set<ParamGroup> preset_groups(const std::string& name) {
  if (name == "none") return {};
  if (name == "+asr:cnn") return {ParamGroup::cnn};
  if (name == "+asr:enc") return {ParamGroup::cnn, ParamGroup::encoder_lstm};
  if (name == "+asr:dec") return {ParamGroup::decoder, ParamGroup::output};
  if (name == "+asr:all") return {numcore::kAllGroups.begin(), numcore::kAllGroups.end()};
  throw TransferError("unknown transfer preset '" + name + "'");
}

std::set<ParamGroup> parse_groups(const std::string& csv) {
  if (csv.rfind("+asr:", 0) == 0 || csv == "none") return preset_groups(csv);
  std::set<ParamGroup> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.insert(numcore::parse_group(item));
    } catch (const std::invalid_argument& e) {
      throw TransferError(e.what());
    }
  }
  return out;
}

std::string groups_str(const std::set<ParamGroup>& groups) {
  std::string s;
  for (auto g : groups) s += (s.empty() ? "" : ",") + std::string(group_name(g));
  return s;
}

TransferSpec mixed_spec(const Checkpoint& encoder_source, const std::string& encoder_label,
                        const Checkpoint& decoder_source, const std::string& decoder_label) {
  TransferSpec spec;
  spec.sources.push_back({&encoder_source, {ParamGroup::cnn, ParamGroup::encoder_lstm}, encoder_label});
  spec.sources.push_back(
      {&decoder_source, {ParamGroup::attention, ParamGroup::decoder, ParamGroup::output}, decoder_label});
  return spec;
}

bool TransferReport::passed() const {
  for (const auto& g : groups)
    if (!g.passed()) return false;
  return true;
}

std::string TransferReport::summary() const {
  std::ostringstream os;
  for (const auto& g : groups) {
    os << group_name(g.group) << " <- " << g.expected_source << ": " << (g.passed() ? "ok" : "MISMATCH") << " ("
       << g.tensors << " tensors";
    if (!g.passed()) os << ", first " << g.mismatched.front();
    os << ")\n";
  }
  return os.str();
}

TransferReport verify_transfer(const ParamSet<float>& result, const TransferSpec& spec,
                               const ParamSet<float>& fresh_snapshot) {
  std::map<ParamGroup, const TransferSource*> origin;
  for (const auto& src : spec.sources)
    for (auto g : src.groups) origin[g] = &src;
  TransferReport report;
  for (auto g : numcore::kAllGroups) {
    GroupReport gr;
    gr.group = g;
    const auto it = origin.find(g);
    gr.expected_source = it == origin.end() ? "fresh" : it->second->label;
    for (const auto& [name, entry] : result) {
      if (entry.group != g) continue;
      ++gr.tensors;
      const ParamSet<float>& ref = it == origin.end() ? fresh_snapshot : it->second->checkpoint->params;
      if (!ref.contains(name) || !(ref.at(name).value == entry.value)) gr.mismatched.push_back(name);
    }
    report.groups.push_back(std::move(gr));
  }
  return report;
}

}  // namespace xst::transfer
