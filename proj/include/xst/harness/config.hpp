#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xst/audiofeat/features.hpp"
#include "xst/seq2seq/config.hpp"

namespace xst::harness {

struct ExperimentConfig {
  seq2seq::ModelConfig model;  // decoder.vocab_size comes from the vocabulary
  seq2seq::TrainSchedule schedule;
  audiofeat::AugmentConfig augment;
  bool augment_enabled = true;
  std::uint64_t seed = 1;
  int max_epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  int patience = 0;  // epochs without dev BLEU improvement; 0 disables
  double stop_dev_accuracy = 0.0;  // stop once teacher-forced dev accuracy reaches it; 0 disables
  bool dev_decode = true;
  std::size_t dev_max_len = 0;  // 0: decoder default
  bool record_wallclock = false;
  std::string output_dir;
  std::string task = "asr";  // recorded in checkpoint metadata

  void validate() const;
};

// Flat "key = value" text. '#' starts a comment; unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Every key with its resolved value, sorted by key; parse_config inverts it.
std::string config_snapshot(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace xst::harness
