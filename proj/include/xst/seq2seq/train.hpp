#pragma once

#include <vector>

#include "xst/numcore/adam.hpp"
#include "xst/seq2seq/model.hpp"

namespace xst::seq2seq {

struct Example {
  const audiofeat::FeatureSequence* features = nullptr;
  const std::vector<int>* target = nullptr;  // BOS ... EOS
};

struct LossStats {
  double loss = 0.0;  // mean cross-entropy per non-PAD target token
  std::size_t tokens = 0;
  std::size_t correct = 0;  // argmax == target
  double grad_norm = 0.0;   // pre-clip global norm (training_step only)

  double accuracy() const { return tokens ? static_cast<double>(correct) / tokens : 0.0; }
};

struct ForwardOptions {
  bool training = false;
  int epoch = 0;
  TrainSchedule schedule{};
  numcore::RngStream* rng = nullptr;  // required when training
};

// Builds the decoder loss for a batch on g. Scheduled sampling and label
// corruption apply only in training mode; targets are never corrupted.
template <typename T>
std::pair<Var<T>, LossStats> batch_loss(Model<T>& model, Graph<T>& g, std::span<const Example> batch,
                                        const ForwardOptions& opt);

// Forward, backward, clip and one Adam update.
template <typename T>
LossStats training_step(Model<T>& model, std::span<const Example> batch, int epoch, const TrainSchedule& schedule,
                        numcore::RngStream& rng, numcore::AdamState<T>& adam);

// Teacher-forced loss and token accuracy without updates, in batches.
template <typename T>
LossStats evaluate_teacher_forced(Model<T>& model, std::span<const Example> data, std::size_t batch_size = 32);

}  // namespace xst::seq2seq
