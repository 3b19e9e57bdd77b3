// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,9] [--strict] [--workdir DIR] [--report FILE]
//
// Exits 0 once every selected criterion has been evaluated; with --strict
// any FAIL also makes the exit status non-zero.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "xst/evalmetrics/metrics.hpp"
#include "xst/harness/config.hpp"
#include "xst/harness/manifest.hpp"
#include "xst/harness/pipeline.hpp"
#include "xst/harness/synthetic.hpp"
#include "xst/harness/trainer.hpp"
#include "xst/textproc/bpe.hpp"
#include "xst/textproc/vocab.hpp"

#include "../support/bpe_oracle.hpp"
#include "../support/metric_oracles.hpp"
#include "../support/model_gradcheck.hpp"
#include "../support/primitive_checks.hpp"
#include "../support/toy_decoder.hpp"
#include "../support/transfer_checks.hpp"
#include "../support/transfer_experiment.hpp"

namespace fs = std::filesystem;
using namespace xst;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) return "<missing " + p.string() + ">";
  return {std::istreambuf_iterator<char>(is), {}};
}

// 1: analytic gradients against central differences.
Outcome gradients() {
  double worst_prim = 0.0;
  std::string worst_name;
  for (const auto& c : testing::primitive_checks())
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = c.run(seed);
      if (!(r.max_rel_error <= worst_prim)) {
        worst_prim = r.max_rel_error;
        worst_name = c.name;
      }
    }
  double worst_model = 0.0;
  std::string worst_param;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const auto r = testing::model_gradcheck(seed);
    if (!(r.report.max_rel_error <= worst_model)) {
      worst_model = r.report.max_rel_error;
      worst_param = r.worst_param;
    }
  }
  const bool ok = worst_prim < 1e-4 && worst_model < 1e-3;
  return {ok, "primitives max rel " + fmt("%.2e", worst_prim) + " (" + worst_name + "), model max rel " +
                  fmt("%.2e", worst_model) + " (" + worst_param + ")"};
}

// 2: BLEU, WER and synonym-weighted recall against independent oracles.
Outcome metrics() {
  numcore::RngStream rng(2, "acceptance/metrics");
  double bleu_dev = 0.0;
  std::vector<std::string> hyps, refs;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t vocab = 3 + rng.index(6);
    auto h = testing::random_sentence(rng, 12, vocab), r = testing::random_sentence(rng, 12, vocab);
    bleu_dev = std::max(bleu_dev, std::abs(evalmetrics::bleu({h}, {r}) - testing::oracle_bleu({h}, {r})));
    hyps.push_back(std::move(h));
    refs.push_back(std::move(r));
  }
  bleu_dev = std::max(bleu_dev, std::abs(evalmetrics::bleu(hyps, refs) - testing::oracle_bleu(hyps, refs)));

  std::size_t wer_mismatch = 0;
  for (int i = 0; i < 500; ++i) {
    const auto a = evalmetrics::tokenize(testing::random_sentence(rng, 12, 5));
    const auto b = evalmetrics::tokenize(testing::random_sentence(rng, 12, 5));
    if (evalmetrics::edit_distance(a, b) != testing::oracle_edit_distance(a, b)) ++wer_mismatch;
  }

  evalmetrics::MatchResource res;
  res.synonyms = evalmetrics::SynonymTable::parse("eat feed consume\n");
  evalmetrics::MatchTiers tiers;
  tiers.synonym = true;
  const double recall = evalmetrics::unigram_pr({"eat"}, {"feed"}, res, tiers).recall;

  const bool ok = bleu_dev <= 0.01 && wer_mismatch == 0 && std::abs(recall - 0.8) < 1e-12;
  return {ok, "max |bleu - oracle| " + fmt("%.2e", bleu_dev) + ", edit-distance mismatches " +
                  std::to_string(wer_mismatch) + "/500, eat/feed recall " + fmt("%.3f", recall)};
}

// 3: full-width beam equals exhaustive search on a three-token toy model.
Outcome beam_exhaustive() {
  int agree = 0;
  bool counts_ok = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    testing::ToyDecoder m(seed);
    std::size_t n = 0;
    const auto want = testing::exhaustive_best(m, 3, 0.6, &n);
    counts_ok = counts_ok && n == 39;
    const auto got = decode::beam_search(m, {27, 0.6, 3}).best;
    if (got.tokens == want.tokens && std::abs(got.score - want.score) < 1e-9) ++agree;
  }
  return {agree == 100 && counts_ok,
          std::to_string(agree) + "/100 seeds agree, 39 candidates enumerated: " + (counts_ok ? "yes" : "no")};
}

// 4: memorise a 50-utterance set at batch size 1 within 200 epochs.
Outcome overfit() {
  const auto corpus = harness::make_overfit_task(7);
  const auto texts = corpus.manifest.texts();
  const auto bpe = textproc::learn_bpe(texts, 1000);
  const auto vocab = textproc::build_vocab(bpe, texts);
  const auto data = harness::make_dataset(corpus.features, texts, bpe, vocab);
  auto cfg = testing::scaled_config(vocab.size());
  cfg.max_epochs = 200;
  cfg.batch_size = 1;
  cfg.seed = 1;
  double best_acc = 0.0, best_bleu = 0.0;
  int reached = 0;
  harness::train(cfg, seq2seq::Model<float>(cfg.model, cfg.seed), vocab, data, data, [&](const harness::CurveRow& r) {
    best_acc = std::max(best_acc, r.dev_accuracy);
    best_bleu = std::max(best_bleu, r.dev_bleu);
    if (!reached && r.dev_accuracy >= 0.99 && r.dev_bleu >= 95.0) reached = r.epoch;
    if (r.epoch % 25 == 0)
      std::fprintf(stderr, "  [4] epoch %d loss %.4f acc %.4f bleu %.2f\n", r.epoch, r.train_loss, r.dev_accuracy,
                   r.dev_bleu);
  });
  return {reached > 0, std::string(reached ? "reached at epoch " + std::to_string(reached) : "not reached") +
                           "; best teacher-forced accuracy " + fmt("%.4f", best_acc) + ", best greedy BLEU " +
                           fmt("%.2f", best_bleu)};
}

// 5 and 6 share one experiment.
const testing::TransferExperimentResult& transfer_experiment() {
  static const auto result = [] {
    testing::TransferExperimentOptions opt;
    opt.verbose = std::getenv("XST_VERBOSE") != nullptr;
    return testing::run_transfer_experiment(opt);
  }();
  return result;
}

std::string condition(const testing::ConditionRuns& r) {
  return r.name + " " + fmt("%.0f", r.median_epochs()) + " ep / acc@5 " + fmt("%.3f", r.median_accuracy_at_5());
}

Outcome transfer_speedup() {
  const auto& x = transfer_experiment();
  const bool ok = x.encoder_only.median_epochs() < x.random_init.median_epochs() &&
                  x.full.median_epochs() <= x.encoder_only.median_epochs() &&
                  x.encoder_only.median_accuracy_at_5() > x.random_init.median_accuracy_at_5();
  return {ok, "median epochs to 0.80 dev accuracy: " + condition(x.random_init) + ", " + condition(x.encoder_only) +
                  ", " + condition(x.full) + " (pretrain acc en " + fmt("%.3f", x.pretrain_accuracy_en) + ")"};
}

Outcome foreign_transfer() {
  const auto& x = transfer_experiment();
  const bool ok = x.foreign_encoder.median_epochs() < x.random_init.median_epochs() && x.foreign_decoder_rejected;
  return {ok, condition(x.foreign_encoder) + " vs " + condition(x.random_init) + " (pretrain acc fr " +
                  fmt("%.3f", x.pretrain_accuracy_fr) + "); foreign decoder " +
                  (x.foreign_decoder_rejected ? "rejected: " + x.rejection_message : std::string("not rejected"))};
}

// 7: parameter surgery scenarios.
Outcome surgery() {
  int passed = 0, total = 0;
  std::string failures;
  for (std::uint64_t seed = 1; seed <= 3; ++seed)
    for (const auto& o : testing::transfer_surgery_checks(seed)) {
      ++total;
      if (o.passed) ++passed;
      else failures += " [" + o.scenario + ": " + o.detail + "]";
    }
  return {passed == total, std::to_string(passed) + "/" + std::to_string(total) + " scenarios" + failures};
}

// 8: naive top-K baseline picks the balanced K.
Outcome topk() {
  std::vector<std::string> train, refs;
  testing::balanced_at_eight(train, refs, 5);
  const auto r = evalmetrics::naive_topk(train, refs);
  const auto sweep = testing::oracle_topk_sweep(train, refs, 5, 20);
  std::size_t best = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (std::abs(sweep[i].precision - sweep[i].recall) < std::abs(sweep[best].precision - sweep[best].recall)) best = i;
  bool sweep_ok = r.sweep.size() == sweep.size();
  for (std::size_t i = 0; sweep_ok && i < sweep.size(); ++i)
    sweep_ok = std::abs(r.sweep[i].precision - sweep[i].precision) < 1e-12 &&
               std::abs(r.sweep[i].recall - sweep[i].recall) < 1e-12;
  numcore::RngStream rng(8, "acceptance/topk");
  int in_range = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> t, f;
    for (int i = 0; i < 50; ++i) t.push_back(testing::random_sentence(rng, 10, 40));
    for (int i = 0; i < 10; ++i) f.push_back(testing::random_sentence(rng, 10, 40));
    const auto k = evalmetrics::naive_topk(t, f).k;
    if (k >= 5 && k <= 20) ++in_range;
  }
  const bool ok = r.k == 8 && best + 5 == 8 && sweep_ok && in_range == 50;
  return {ok, "chosen K " + std::to_string(r.k) + ", oracle K " + std::to_string(best + 5) + ", sweep matches " +
                  (sweep_ok ? "yes" : "no") + ", random corpora in [5,20] " + std::to_string(in_range) + "/50"};
}

// 9: the CLI pipeline is reproducible and matches the library composition.
int run(const std::string& cmd, const fs::path& log) {
  const std::string full = cmd + " 2>>\"" + log.string() + "\"";
  return std::system(full.c_str());
}

Outcome determinism(const fs::path& work) {
  const std::string cli = XST_CLI_PATH;
  fs::remove_all(work);
  fs::create_directories(work);
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const auto cfg = work / "experiment.cfg";
  std::ofstream(cfg) << "encoder.cnn_filters = 16,32\nencoder.lstm_hidden = 64\ndecoder.lstm_hidden = 32\n"
                        "max_epochs = 5\nbatch_size = 4\nseed = 3\n";

  std::string failure;
  const auto pipeline = [&](const fs::path& dir) {
    const auto run = [&](const std::string& cmd) { return ::run(cmd, work / "cli.log"); };
    const auto syn = dir / "syn";
    const int rc[] = {
        run(q(cli) + " gen-synthetic --only audio --seed 17 --out " + q(syn)),
        run(q(cli) + " prepare-features --manifest " + q(syn / "audio/train.tsv") + " --out " + q(dir / "ftrain")),
        run(q(cli) + " prepare-features --manifest " + q(syn / "audio/dev.tsv") + " --out " + q(dir / "fdev")),
        run(q(cli) + " learn-bpe --manifest " + q(dir / "ftrain/manifest.tsv") + " --out " + q(dir / "bpe.txt")),
        run(q(cli) + " train --config " + q(cfg) + " --train " + q(dir / "ftrain/manifest.tsv") + " --dev " +
            q(dir / "fdev/manifest.tsv") + " --bpe " + q(dir / "bpe.txt") + " --out " + q(dir / "exp")),
        run(q(cli) + " translate --checkpoint " + q(dir / "exp/final.ckpt") + " --manifest " +
            q(dir / "fdev/manifest.tsv") + " --out " + q(dir / "hyp.txt")),
        run(q(cli) + " evaluate --hyp " + q(dir / "hyp.txt") + " --ref " + q(syn / "audio/dev.txt") + " --json " +
            q(dir / "eval.json")),
    };
    for (int i = 0; i < 7; ++i)
      if (rc[i] != 0 && failure.empty()) failure = "step " + std::to_string(i + 1) + " exited " + std::to_string(rc[i]);
  };
  pipeline(work / "a");
  pipeline(work / "b");
  if (!failure.empty()) return {false, "CLI " + failure};

  const std::vector<std::string> artifacts{"ftrain/features.xstf", "fdev/features.xstf", "bpe.txt",
                                           "exp/curves.csv",       "exp/final.ckpt",     "exp/best.ckpt",
                                           "hyp.txt",              "hyp.txt.scores",     "eval.json"};
  std::string differing;
  for (const auto& a : artifacts)
    if (slurp(work / "a" / a) != slurp(work / "b" / a)) differing += " " + a;

  auto lib_cfg = harness::load_config(cfg.string());
  lib_cfg.output_dir = (work / "lib").string();
  const auto train_m = harness::read_manifest((work / "a/ftrain/manifest.tsv").string());
  const auto dev_m = harness::read_manifest((work / "a/fdev/manifest.tsv").string());
  const auto bpe = textproc::BpeModel::load((work / "a/bpe.txt").string());
  const auto vocab = textproc::build_vocab(bpe, train_m.texts());
  lib_cfg.model.decoder.vocab_size = vocab.size();
  harness::train(lib_cfg, seq2seq::Model<float>(lib_cfg.model, lib_cfg.seed), vocab,
                 harness::make_dataset(train_m, bpe, vocab), harness::make_dataset(dev_m, bpe, vocab));
  auto lm = harness::load_model((work / "lib/final.ckpt").string());
  harness::write_translation((work / "lib/hyp.txt").string(), harness::translate(lm, dev_m, {}));
  for (const auto& a : {"curves.csv", "final.ckpt", "best.ckpt"})
    if (slurp(work / "lib" / a) != slurp(work / "a/exp" / a)) differing += std::string(" lib:") + a;
  if (slurp(work / "lib/hyp.txt") != slurp(work / "a/hyp.txt")) differing += " lib:hyp.txt";

  return {differing.empty(), differing.empty() ? std::to_string(artifacts.size()) +
                                                     " artifacts byte-identical across two CLI runs and the library run"
                                               : "differing:" + differing};
}

// 10: BPE round trip and hand-checked merges.
std::string random_text_line(numcore::RngStream& rng) {
  static const std::vector<std::string> alphabet{"a", "b", "c", "d", "e", "f", "g", "h", "\xc3\xa9", "\xc3\xb1"};
  std::string line;
  const auto words = rng.index(9);
  for (std::size_t w = 0; w < words; ++w) {
    line += std::string(rng.index(3), ' ');
    const auto len = 1 + rng.index(7);
    for (std::size_t i = 0; i < len; ++i) line += alphabet[rng.index(alphabet.size())];
    line += rng.index(2) ? " " : "\t";
  }
  return line;
}

Outcome bpe() {
  numcore::RngStream rng(10, "acceptance/bpe");
  std::vector<std::string> corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(random_text_line(rng));
  const auto model = textproc::learn_bpe(corpus, 200);
  const auto vocab = textproc::build_vocab(model, corpus);
  int roundtrip = 0, vocab_roundtrip = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto line = random_text_line(rng);
    const auto expect = textproc::normalize_whitespace(line);
    if (textproc::join_subwords(model.apply(line)) == expect) ++roundtrip;
    if (vocab.decode(vocab.encode(model, line)) == expect) ++vocab_roundtrip;
  }
  const std::vector<std::string> aa{"aa aa"}, abcd{"ab ab cd"}, hello{"hello"};
  const auto m_aa = textproc::learn_bpe(aa, 10).merges();
  const auto m_ab = textproc::learn_bpe(abcd, 10).merges();
  const bool aa_ok = m_aa == std::vector<textproc::Merge>{{"a", "a</w>"}};
  const bool ab_ok = !m_ab.empty() && m_ab[0] == textproc::Merge{"a", "b</w>"} && m_ab.size() == 1;
  const bool zero_ok = textproc::learn_bpe(hello, 0).apply("hello") ==
                       std::vector<std::string>{"h", "e", "l", "l", "o</w>"};
  const bool oracle_ok = model.merges() == testing::brute_force_merges(corpus, 200);
  const bool ok = roundtrip == 10000 && vocab_roundtrip == 10000 && aa_ok && ab_ok && zero_ok && oracle_ok;
  return {ok, "round trip " + std::to_string(roundtrip) + "/10000 (via ids " + std::to_string(vocab_roundtrip) +
                  "), aa aa " + (aa_ok ? "ok" : "wrong") + ", ab ab cd " + (ab_ok ? "ok" : "wrong") + ", 0 merges " +
                  (zero_ok ? "ok" : "wrong") + ", merges match brute force " + (oracle_ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  bool strict = false;
  std::string workdir = (fs::temp_directory_path() / "xst_acceptance").string();
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--strict", strict, "non-zero exit on any FAIL");
  app.add_option("--workdir", workdir, "scratch directory for the CLI runs")->capture_default_str();
  std::string report_path;
  app.add_option("--report", report_path, "also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);
  std::ofstream report;
  if (!report_path.empty()) report.open(report_path);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"analytic gradients match finite differences", gradients},
      {"metrics match independent oracles", metrics},
      {"beam search equals exhaustive search", beam_exhaustive},
      {"overfit 50 utterances at batch size 1", overfit},
      {"ASR pretraining speeds up translation fine-tuning", transfer_speedup},
      {"cross-language encoder transfer helps, foreign decoder rejected", foreign_transfer},
      {"parameter surgery", surgery},
      {"naive top-K baseline", topk},
      {"end-to-end determinism", [&] { return determinism(workdir); }},
      {"BPE round trip and merges", bpe},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.passed) ++failures;
    char head[64];
    std::snprintf(head, sizeof head, "criterion %2d %s  ", id, o.passed ? "PASS" : "FAIL");
    const auto line = head + criteria[i].first + ": " + o.detail + " [" + fmt("%.1f", secs) + "s]";
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report) report << line << std::endl;
  }
  return strict && failures ? 1 : 0;
}
