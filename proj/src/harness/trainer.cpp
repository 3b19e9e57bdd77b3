#include "xst/harness/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "xst/decode/beam.hpp"
#include "xst/evalmetrics/metrics.hpp"
#include "xst/seq2seq/train.hpp"
#include "xst/transfer/checkpoint.hpp"

namespace xst::harness {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kBucketFrames = 20;

std::vector<seq2seq::Example> examples_of(const Dataset& d) {
  std::vector<seq2seq::Example> out;
  for (std::size_t i = 0; i < d.size(); ++i) out.push_back({&d.features[i], &d.targets[i]});
  return out;
}

void save(const std::string& path, const seq2seq::Model<float>& model, const textproc::Vocab& vocab,
          const ExperimentConfig& cfg, int epochs, double metric) {
  transfer::save_checkpoint(path, transfer::make_checkpoint(model, vocab, {cfg.task, epochs, metric}));
}

}  // namespace

Dataset make_dataset(std::vector<audiofeat::FeatureSequence> features, const std::vector<std::string>& texts,
                     const textproc::BpeModel& bpe, const textproc::Vocab& vocab) {
  if (features.size() != texts.size()) throw HarnessError("dataset: features and texts differ in count");
  Dataset d;
  d.features = std::move(features);
  for (const auto& t : texts) {
    d.targets.push_back(vocab.encode(bpe, t));
    d.references.push_back(textproc::normalize_whitespace(t));
  }
  return d;
}

Dataset make_dataset(const Manifest& m, const textproc::BpeModel& bpe, const textproc::Vocab& vocab) {
  return make_dataset(load_manifest_features(m), m.texts(), bpe, vocab);
}

void write_curves_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << "epoch,train_loss,dev_bleu,dev_precision,dev_recall,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.4f,%.6f,%.6f,%.3f\n", r.epoch, r.train_loss, r.dev_bleu, r.dev_precision,
                  r.dev_recall, r.seconds);
    os << buf;
  }
}

void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows) {
  std::ofstream os(path);
  if (!os) throw HarnessError("cannot write " + path);
  write_curves_csv(os, rows);
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<audiofeat::FeatureSequence>& features,
                                                   std::size_t batch_size, numcore::RngStream& rng) {
  if (batch_size == 0) throw HarnessError("batch_size must be positive");
  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return features[a].num_frames() / kBucketFrames < features[b].num_frames() / kBucketFrames;
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + batch_size));
  for (std::size_t i = batches.size(); i > 1; --i) std::swap(batches[i - 1], batches[rng.index(i)]);
  return batches;
}

std::vector<std::string> greedy_hypotheses(seq2seq::Model<float>& model, const textproc::Vocab& vocab,
                                           const std::vector<audiofeat::FeatureSequence>& features,
                                           std::size_t max_len) {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    decode::Seq2SeqStepModel step(model, f);
    const auto hyp = decode::greedy_decode(step, max_len);
    out.push_back(vocab.decode(hyp.output()));
  }
  return out;
}

TrainResult train(const ExperimentConfig& cfg, seq2seq::Model<float> initial, const textproc::Vocab& vocab,
                  const Dataset& train_set, const Dataset& dev_set, const EpochCallback& on_epoch) {
  cfg.validate();
  if (initial.config().decoder.vocab_size != vocab.size())
    throw HarnessError("train: model vocabulary size " + std::to_string(initial.config().decoder.vocab_size) +
                       " differs from vocabulary size " + std::to_string(vocab.size()));
  if (train_set.size() == 0 && cfg.max_epochs > 0) throw HarnessError("train: empty training set");

  const bool write = !cfg.output_dir.empty();
  const fs::path dir(cfg.output_dir);
  if (write) {
    fs::create_directories(dir);
    std::ofstream(dir / "config.txt") << config_snapshot(cfg);
    std::ofstream(dir / "seed.txt") << cfg.seed << '\n';
    write_curves_csv((dir / "curves.csv").string(), {});
  }

  TrainResult result{initial, initial, {}, 0, false, {}};
  auto& model = result.final_model;
  numcore::AdamState<float> adam;
  adam.config.alpha = cfg.learning_rate;
  adam.config.weight_decay = cfg.schedule.weight_decay;

  const auto dev_examples = examples_of(dev_set);
  double best_metric = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  const numcore::RngStream root(cfg.seed, "train");

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto erng = root.fork("epoch/" + std::to_string(epoch));
    auto batch_rng = erng.fork("batches");
    auto augment_rng = erng.fork("augment");
    auto step_rng = erng.fork("step");
    const auto last_good = model.params();

    double loss_sum = 0.0;
    std::size_t tokens = 0;
    try {
      for (const auto& batch : make_batches(train_set.features, cfg.batch_size, batch_rng)) {
        std::vector<audiofeat::FeatureSequence> augmented;
        if (cfg.augment_enabled) {
          augmented.reserve(batch.size());
          for (auto i : batch) augmented.push_back(audiofeat::augment(train_set.features[i], cfg.augment, augment_rng));
        }
        std::vector<seq2seq::Example> examples;
        for (std::size_t k = 0; k < batch.size(); ++k) {
          const auto i = batch[k];
          examples.push_back({cfg.augment_enabled ? &augmented[k] : &train_set.features[i], &train_set.targets[i]});
        }
        const auto stats = seq2seq::training_step(model, std::span<const seq2seq::Example>(examples), epoch,
                                                  cfg.schedule, step_rng, adam);
        if (!std::isfinite(stats.loss) || !std::isfinite(stats.grad_norm))
          throw numcore::NumericError("non-finite loss");
        loss_sum += stats.loss * static_cast<double>(stats.tokens);
        tokens += stats.tokens;
      }
    } catch (const numcore::NumericError& e) {
      for (auto& [name, entry] : model.params()) entry.value = last_good.at(name).value;
      result.diverged = true;
      result.message = "diverged in epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    CurveRow row;
    row.epoch = epoch;
    row.train_loss = tokens ? loss_sum / static_cast<double>(tokens) : 0.0;
    if (dev_set.size() > 0) {
      row.dev_accuracy = seq2seq::evaluate_teacher_forced(model, std::span<const seq2seq::Example>(dev_examples))
                             .accuracy();
      if (cfg.dev_decode) {
        const auto hyps = greedy_hypotheses(model, vocab, dev_set.features, cfg.dev_max_len);
        row.dev_bleu = evalmetrics::bleu(hyps, dev_set.references);
        const auto pr = evalmetrics::unigram_pr(hyps, dev_set.references);
        row.dev_precision = pr.precision;
        row.dev_recall = pr.recall;
      }
    }
    if (cfg.record_wallclock)
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.curves.push_back(row);
    if (write) write_curves_csv((dir / "curves.csv").string(), result.curves);
    if (on_epoch) on_epoch(row);

    const double metric = cfg.dev_decode ? row.dev_bleu : row.dev_accuracy;
    if (metric > best_metric) {
      best_metric = metric;
      result.best_model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
    if (cfg.stop_dev_accuracy > 0.0 && row.dev_accuracy >= cfg.stop_dev_accuracy) break;
  }

  if (write) {
    const int epochs = result.curves.empty() ? 0 : result.curves.back().epoch;
    const auto metric_of = [&](int epoch) {
      if (epoch == 0) return 0.0;
      const auto& r = result.curves[static_cast<std::size_t>(epoch - 1)];
      return cfg.dev_decode ? r.dev_bleu : r.dev_accuracy;
    };
    save((dir / "final.ckpt").string(), model, vocab, cfg, epochs, metric_of(epochs));
    save((dir / "best.ckpt").string(), result.best_model, vocab, cfg, result.best_epoch, metric_of(result.best_epoch));
  }
  return result;
}

}  // namespace xst::harness
