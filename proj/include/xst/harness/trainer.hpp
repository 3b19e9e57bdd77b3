#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "xst/harness/config.hpp"
#include "xst/harness/manifest.hpp"
#include "xst/seq2seq/model.hpp"
#include "xst/textproc/vocab.hpp"

namespace xst::harness {

// Features paired with encoded targets and their reference text.
struct Dataset {
  std::vector<audiofeat::FeatureSequence> features;
  std::vector<std::vector<int>> targets;  // BOS ... EOS
  std::vector<std::string> references;

  std::size_t size() const { return features.size(); }
};

Dataset make_dataset(std::vector<audiofeat::FeatureSequence> features, const std::vector<std::string>& texts,
                     const textproc::BpeModel& bpe, const textproc::Vocab& vocab);
Dataset make_dataset(const Manifest& m, const textproc::BpeModel& bpe, const textproc::Vocab& vocab);

struct CurveRow {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_bleu = 0.0;  // greedy decoding
  double dev_precision = 0.0;
  double dev_recall = 0.0;
  double seconds = 0.0;
  double dev_accuracy = 0.0;  // teacher-forced; not written to the CSV
};

void write_curves_csv(std::ostream& os, const std::vector<CurveRow>& rows);
void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows);

struct TrainResult {
  seq2seq::Model<float> final_model;
  seq2seq::Model<float> best_model;
  std::vector<CurveRow> curves;
  int best_epoch = 0;  // 0: the initial parameters
  bool diverged = false;
  std::string message;
};

using EpochCallback = std::function<void(const CurveRow&)>;

// Runs max_epochs of shuffled, length-bucketed mini-batch training from
// initial, evaluating on dev after every epoch. With cfg.output_dir set the
// directory receives config.txt, seed.txt, curves.csv, best.ckpt and
// final.ckpt.
TrainResult train(const ExperimentConfig& cfg, seq2seq::Model<float> initial, const textproc::Vocab& vocab,
                  const Dataset& train_set, const Dataset& dev_set, const EpochCallback& on_epoch = {});

// Greedy hypotheses for every utterance of a dataset.
std::vector<std::string> greedy_hypotheses(seq2seq::Model<float>& model, const textproc::Vocab& vocab,
                                           const std::vector<audiofeat::FeatureSequence>& features,
                                           std::size_t max_len = 0);

// Length buckets (deterministic boundaries) filled in shuffled order, then
// cut into batches whose order is shuffled as well.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<audiofeat::FeatureSequence>& features,
                                                   std::size_t batch_size, numcore::RngStream& rng);

}  // namespace xst::harness
