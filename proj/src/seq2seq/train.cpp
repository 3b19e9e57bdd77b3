#include "xst/seq2seq/train.hpp"

#include "xst/numcore/ops.hpp"
#include "xst/textproc/vocab.hpp"

namespace xst::seq2seq {

namespace ops = numcore::ops;
using textproc::Vocab;

namespace {

template <typename T>
int argmax_row(const Tensor<T>& logits, std::size_t row) {
  const auto V = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t v = 1; v < V; ++v)
    if (logits.at(row, v) > logits.at(row, best)) best = v;
  return static_cast<int>(best);
}

}  // namespace

template <typename T>
std::pair<Var<T>, LossStats> batch_loss(Model<T>& model, Graph<T>& g, std::span<const Example> batch,
                                        const ForwardOptions& opt) {
  if (batch.empty()) throw ConfigError("batch_loss: empty batch");
  if (opt.training && !opt.rng) throw ConfigError("batch_loss: training requires an rng");
  const auto V = model.config().decoder.vocab_size;
  const auto B = batch.size();
  std::size_t L = 0;
  std::vector<const audiofeat::FeatureSequence*> feats;
  for (const auto& ex : batch) {
    const auto& t = *ex.target;
    if (t.size() < 2 || t.front() != Vocab::kBos || t.back() != Vocab::kEos) {
      throw ConfigError("batch_loss: target for '" + ex.features->utterance_id + "' must be BOS ... EOS");
    }
    for (int id : t)
      if (id < 0 || static_cast<std::size_t>(id) >= V) throw std::out_of_range("batch_loss: target id out of range");
    L = std::max(L, t.size() - 1);
    feats.push_back(ex.features);
  }
  std::vector<int> inputs(B * L, Vocab::kPad), targets(B * L, Vocab::kPad);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& t = *batch[b].target;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      inputs[b * L + i] = t[i];
      targets[b * L + i] = t[i + 1];
    }
  }
  const bool corrupt = opt.training && opt.epoch > opt.schedule.corrupt_start_epoch && opt.schedule.corrupt_prob > 0;
  if (corrupt) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 1; i < L; ++i)
        if (inputs[b * L + i] != Vocab::kPad && opt.rng->bernoulli(opt.schedule.corrupt_prob))
          inputs[b * L + i] = static_cast<int>(1 + opt.rng->index(V - 1));
  }

  DropoutContext<T> drop;
  if (opt.training) {
    drop.ratio = opt.schedule.dropout;
    drop.rng = opt.rng;
  }
  auto enc = model.encode(g, feats, opt.training, drop);
  auto state = model.initial_state(g, B);
  std::vector<Var<T>> step_logits;
  std::vector<int> prev(B);
  const bool sample = opt.training && opt.schedule.sample_prob > 0;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t b = 0; b < B; ++b) {
      prev[b] = inputs[b * L + i];
      if (sample && i > 0 && prev[b] != Vocab::kPad && opt.rng->bernoulli(opt.schedule.sample_prob)) {
        prev[b] = argmax_row(step_logits.back().value(), b);
      }
    }
    step_logits.push_back(model.decode_step(g, prev, state, enc, drop).logits);
  }
  auto logits = ops::reshape(ops::stack_time(std::span<const Var<T>>(step_logits)), {B * L, V});

  LossStats stats;
  for (std::size_t n = 0; n < B * L; ++n) {
    if (targets[n] == Vocab::kPad) continue;
    ++stats.tokens;
    if (argmax_row(logits.value(), n) == targets[n]) ++stats.correct;
  }
  auto total = ops::cross_entropy(logits, std::span<const int>(targets), Vocab::kPad);
  auto loss = ops::scale(total, static_cast<T>(1.0 / static_cast<double>(stats.tokens)));
  stats.loss = static_cast<double>(loss.value()[0]);
  return {loss, stats};
}

template <typename T>
LossStats training_step(Model<T>& model, std::span<const Example> batch, int epoch, const TrainSchedule& schedule,
                        numcore::RngStream& rng, numcore::AdamState<T>& adam) {
  schedule.validate();
  Graph<T> g;
  ForwardOptions opt{true, epoch, schedule, &rng};
  auto [loss, stats] = batch_loss(model, g, batch, opt);
  model.params().zero_grad();
  g.backward(loss);
  stats.grad_norm = model.params().clip_grad_norm(schedule.clip_norm);
  adam.config.weight_decay = schedule.weight_decay;
  numcore::adam_step(model.params(), adam);
  return stats;
}

template <typename T>
LossStats evaluate_teacher_forced(Model<T>& model, std::span<const Example> data, std::size_t batch_size) {
  LossStats total;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); i += batch_size) {
    Graph<T> g(false);
    auto [loss, stats] = batch_loss(model, g, data.subspan(i, std::min(batch_size, data.size() - i)), ForwardOptions{});
    loss_sum += stats.loss * stats.tokens;
    total.tokens += stats.tokens;
    total.correct += stats.correct;
  }
  total.loss = total.tokens ? loss_sum / total.tokens : 0.0;
  return total;
}

template std::pair<Var<float>, LossStats> batch_loss(Model<float>&, Graph<float>&, std::span<const Example>,
                                                     const ForwardOptions&);
template std::pair<Var<double>, LossStats> batch_loss(Model<double>&, Graph<double>&, std::span<const Example>,
                                                      const ForwardOptions&);
template LossStats training_step(Model<float>&, std::span<const Example>, int, const TrainSchedule&, numcore::RngStream&,
                                 numcore::AdamState<float>&);
template LossStats training_step(Model<double>&, std::span<const Example>, int, const TrainSchedule&,
                                 numcore::RngStream&, numcore::AdamState<double>&);
template LossStats evaluate_teacher_forced(Model<float>&, std::span<const Example>, std::size_t);
template LossStats evaluate_teacher_forced(Model<double>&, std::span<const Example>, std::size_t);

}  // namespace xst::seq2seq
