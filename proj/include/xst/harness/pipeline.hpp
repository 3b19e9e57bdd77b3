#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xst/decode/beam.hpp"
#include "xst/evalmetrics/metrics.hpp"
#include "xst/harness/manifest.hpp"
#include "xst/transfer/transfer.hpp"

namespace xst::harness {

struct PrepareOptions {
  audiofeat::MfccConfig mfcc;
  std::optional<std::string> stats_in;  // reuse statistics fitted on another split
  bool global_fallback = true;          // unknown speakers use pooled statistics
};

// MFCCs for every WAV in the manifest, speaker-normalised, stored as
// out_dir/features.xstf with out_dir/speakers.jsonl and out_dir/manifest.tsv.
Manifest prepare_features(const Manifest& audio, const std::string& out_dir, const PrepareOptions& opt = {});

// Loads a checkpoint and rebuilds model plus vocabulary; a checkpoint without
// a vocabulary fingerprint is rejected.
struct LoadedModel {
  seq2seq::Model<float> model;
  textproc::Vocab vocab;
};
LoadedModel load_model(const std::string& checkpoint_path);

struct TranslationOutput {
  std::vector<std::string> utterance_ids;
  std::vector<std::string> hypotheses;
  std::vector<double> scores;
};

TranslationOutput translate(LoadedModel& lm, const Manifest& m, const decode::BeamConfig& beam);
// Hypotheses go to out_path (one line per utterance, manifest order) and
// "utterance_id<TAB>score" lines to out_path + ".scores".
void write_translation(const std::string& out_path, const TranslationOutput& t);

struct AttentionMatrix {
  std::vector<std::string> subwords;     // one per row, EOS included
  std::vector<std::vector<float>> rows;  // decoded length x T'
};

AttentionMatrix dump_attention(LoadedModel& lm, const Manifest& m, const std::string& utterance_id,
                               const decode::BeamConfig& beam);
void write_attention_csv(const std::string& path, const AttentionMatrix& a);

struct EvaluateOptions {
  std::optional<std::string> baseline_train_text;
  std::optional<std::string> synonyms;
  std::optional<std::string> stem_language;
  bool wer = false;
};

evalmetrics::EvalReport evaluate_files(const std::string& hyp_path, const std::string& ref_path,
                                       const EvaluateOptions& opt = {});

struct GenSyntheticOptions {
  std::uint64_t seed = 17;
  std::size_t asr_utterances = 5000;
  bool overfit = true;
  bool transfer = true;
  bool audio = true;
};

// Writes the synthetic tasks under out_dir: overfit/, transfer/ (feature
// archives and manifests) and audio/ (WAV files for the full pipeline).
void gen_synthetic(const std::string& out_dir, const GenSyntheticOptions& opt = {});

// Writes transferred parameters into a copy of target.
transfer::Checkpoint transfer_checkpoint(const transfer::Checkpoint& target, const transfer::TransferSpec& spec);

}  // namespace xst::harness
