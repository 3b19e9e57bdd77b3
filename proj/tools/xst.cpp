#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "xst/harness/config.hpp"
#include "xst/harness/pipeline.hpp"
#include "xst/harness/synthetic.hpp"
#include "xst/harness/trainer.hpp"

using namespace xst;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> corpus_lines(const std::vector<std::string>& texts, const std::vector<std::string>& manifests) {
  std::vector<std::string> out;
  for (const auto& t : texts)
    for (auto& l : harness::read_lines(t)) out.push_back(std::move(l));
  for (const auto& m : manifests)
    for (auto& l : harness::read_manifest(m).texts()) out.push_back(std::move(l));
  return out;
}

transfer::TransferSpec transfer_spec(const std::vector<transfer::Checkpoint>& sources,
                                     const std::vector<std::string>& groups, const std::vector<std::string>& labels,
                                     const std::string& freeze) {
  transfer::TransferSpec spec;
  for (std::size_t i = 0; i < sources.size(); ++i)
    spec.sources.push_back({&sources[i], transfer::parse_groups(groups[i]), labels[i]});
  if (!freeze.empty()) spec.frozen = transfer::parse_groups(freeze);
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech-to-text translation with ASR pretraining"};
  app.require_subcommand(1);

  // prepare-features
  std::string prep_manifest, prep_out, prep_stats;
  auto* prep = app.add_subcommand("prepare-features", "MFCC extraction and speaker normalisation");
  prep->add_option("--manifest", prep_manifest, "audio manifest (TSV)")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  prep->add_option("--stats", prep_stats, "speaker statistics fitted on another split");

  // learn-bpe
  std::vector<std::string> bpe_text, bpe_manifests;
  std::size_t bpe_merges = 1000;
  std::string bpe_out, bpe_vocab_out;
  auto* learn = app.add_subcommand("learn-bpe", "learn subword merges from target text");
  learn->add_option("--text", bpe_text, "text files, one sentence per line");
  learn->add_option("--manifest", bpe_manifests, "manifests whose target text is used");
  learn->add_option("--merges", bpe_merges, "number of merges")->capture_default_str();
  learn->add_option("--out", bpe_out, "merge file")->required();
  learn->add_option("--vocab-out", bpe_vocab_out, "also write the vocabulary built on the same text");

  // apply-bpe
  std::string apply_bpe_path, apply_in, apply_out;
  auto* apply = app.add_subcommand("apply-bpe", "segment text into subwords");
  apply->add_option("--bpe", apply_bpe_path)->required();
  apply->add_option("--in", apply_in)->required();
  apply->add_option("--out", apply_out)->required();

  // sample-subset
  std::string sub_manifest, sub_out;
  double sub_hours = 0.0;
  std::uint64_t sub_seed = 1;
  auto* subset = app.add_subcommand("sample-subset", "random subset within a duration budget");
  subset->add_option("--manifest", sub_manifest)->required();
  subset->add_option("--hours", sub_hours)->required();
  subset->add_option("--seed", sub_seed)->capture_default_str();
  subset->add_option("--out", sub_out)->required();

  // train
  std::string tr_config, tr_train, tr_dev, tr_bpe, tr_vocab, tr_init, tr_out;
  std::vector<std::string> tr_set;
  auto* trn = app.add_subcommand("train", "train or fine-tune a model");
  trn->add_option("--config", tr_config, "key = value configuration file");
  trn->add_option("--set", tr_set, "configuration override key=value");
  trn->add_option("--train", tr_train, "training manifest")->required();
  trn->add_option("--dev", tr_dev, "development manifest")->required();
  trn->add_option("--bpe", tr_bpe, "subword merges")->required();
  trn->add_option("--vocab", tr_vocab, "vocabulary file (default: built from the training text)");
  trn->add_option("--init", tr_init, "initial checkpoint; its architecture and vocabulary are used");
  trn->add_option("--out", tr_out, "experiment directory")->required();

  // transfer
  std::string xf_target, xf_from, xf_groups, xf_from2, xf_groups2, xf_freeze, xf_out;
  auto* xf = app.add_subcommand("transfer", "copy parameter groups between checkpoints");
  xf->add_option("--target", xf_target, "freshly initialised target checkpoint")->required();
  xf->add_option("--from", xf_from, "source checkpoint")->required();
  xf->add_option("--groups", xf_groups, "groups or preset (+asr:enc, ...)")->required();
  xf->add_option("--from2", xf_from2, "second source checkpoint");
  xf->add_option("--groups2", xf_groups2, "groups taken from the second source");
  xf->add_option("--freeze", xf_freeze, "groups kept fixed during fine-tuning");
  xf->add_option("--out", xf_out)->required();

  // translate
  std::string tl_ckpt, tl_manifest, tl_out;
  decode::BeamConfig tl_beam;
  auto* tl = app.add_subcommand("translate", "beam-search decoding");
  tl->add_option("--checkpoint", tl_ckpt)->required();
  tl->add_option("--manifest", tl_manifest)->required();
  tl->add_option("--out", tl_out)->required();
  tl->add_option("--beam", tl_beam.beam_size)->capture_default_str();
  tl->add_option("--alpha", tl_beam.length_alpha)->capture_default_str();
  tl->add_option("--max-len", tl_beam.max_len, "0: 2T'+10")->capture_default_str();

  // evaluate
  std::string ev_hyp, ev_ref, ev_json, ev_csv;
  harness::EvaluateOptions ev_opt;
  auto* ev = app.add_subcommand("evaluate", "BLEU, unigram precision/recall and WER");
  ev->add_option("--hyp", ev_hyp)->required();
  ev->add_option("--ref", ev_ref)->required();
  ev->add_option("--baseline", ev_opt.baseline_train_text, "training text for the naive top-K baseline");
  ev->add_option("--synonyms", ev_opt.synonyms, "synonym sets, one per line");
  ev->add_option("--stem", ev_opt.stem_language, "stem matching language (en, fr)");
  ev->add_flag("--wer", ev_opt.wer, "also report word error rate");
  ev->add_option("--json", ev_json, "report path (default: stdout)");
  ev->add_option("--breakdown", ev_csv, "per-utterance CSV");

  // dump-attention
  std::string da_ckpt, da_manifest, da_utt, da_out;
  decode::BeamConfig da_beam;
  auto* da = app.add_subcommand("dump-attention", "attention matrix of one decoded utterance");
  da->add_option("--checkpoint", da_ckpt)->required();
  da->add_option("--manifest", da_manifest)->required();
  da->add_option("--utt", da_utt)->required();
  da->add_option("--out", da_out)->required();
  da->add_option("--beam", da_beam.beam_size)->capture_default_str();
  da->add_option("--alpha", da_beam.length_alpha)->capture_default_str();

  // gen-synthetic
  std::string gs_out, gs_only = "all";
  harness::GenSyntheticOptions gs_opt;
  auto* gs = app.add_subcommand("gen-synthetic", "write the synthetic tasks");
  gs->add_option("--out", gs_out)->required();
  gs->add_option("--seed", gs_opt.seed)->capture_default_str();
  gs->add_option("--asr-utterances", gs_opt.asr_utterances)->capture_default_str();
  gs->add_option("--only", gs_only, "overfit | transfer | audio | all")
      ->check(CLI::IsMember({"overfit", "transfer", "audio", "all"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      harness::PrepareOptions opt;
      if (!prep_stats.empty()) opt.stats_in = prep_stats;
      const auto m = harness::prepare_features(harness::read_manifest(prep_manifest), prep_out, opt);
      std::cerr << "prepared " << m.rows.size() << " utterances\n";
    } else if (*learn) {
      const auto corpus = corpus_lines(bpe_text, bpe_manifests);
      const auto bpe = textproc::learn_bpe(corpus, bpe_merges);
      bpe.save(bpe_out);
      if (!bpe_vocab_out.empty()) textproc::build_vocab(bpe, corpus).save(bpe_vocab_out);
      std::cerr << "learned " << bpe.merges().size() << " merges\n";
    } else if (*apply) {
      const auto bpe = textproc::BpeModel::load(apply_bpe_path);
      std::vector<std::string> out;
      for (const auto& line : harness::read_lines(apply_in)) {
        std::string joined;
        for (const auto& s : bpe.apply(line)) joined += (joined.empty() ? "" : " ") + s;
        out.push_back(joined);
      }
      harness::write_lines(apply_out, out);
    } else if (*subset) {
      numcore::RngStream rng(sub_seed, "sample-subset");
      const auto m = harness::sample_subset(harness::read_manifest(sub_manifest), sub_hours, rng);
      harness::write_manifest(sub_out, m);
      std::fprintf(stderr, "kept %zu utterances, %.1f s\n", m.rows.size(), m.total_duration());
    } else if (*trn) {
      harness::ExperimentConfig cfg;
      if (!tr_config.empty()) cfg = harness::load_config(tr_config);
      for (const auto& kv : tr_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw harness::HarnessError("--set expects key=value, got '" + kv + "'");
        harness::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      cfg.output_dir = tr_out;
      const auto train_m = harness::read_manifest(tr_train);
      const auto dev_m = harness::read_manifest(tr_dev);
      train_m.validate(true);
      dev_m.validate(true);
      const auto bpe = textproc::BpeModel::load(tr_bpe);
      std::optional<seq2seq::Model<float>> model;
      textproc::Vocab vocab;
      if (!tr_init.empty()) {
        auto lm = harness::load_model(tr_init);
        if (!tr_vocab.empty() && !(textproc::Vocab::load(tr_vocab) == lm.vocab))
          throw harness::HarnessError("--vocab differs from the vocabulary stored in " + tr_init);
        cfg.model = lm.model.config();
        vocab = std::move(lm.vocab);
        model.emplace(std::move(lm.model));
      } else {
        vocab = tr_vocab.empty() ? textproc::build_vocab(bpe, train_m.texts()) : textproc::Vocab::load(tr_vocab);
        cfg.model.decoder.vocab_size = vocab.size();
        model.emplace(cfg.model, cfg.seed);
      }
      cfg.validate();
      fs::create_directories(tr_out);
      bpe.save((fs::path(tr_out) / "bpe.txt").string());
      vocab.save((fs::path(tr_out) / "vocab.txt").string());
      if (!tr_init.empty())
        fs::copy_file(tr_init, fs::path(tr_out) / "init.ckpt", fs::copy_options::overwrite_existing);
      const auto result = harness::train(cfg, std::move(*model), vocab, harness::make_dataset(train_m, bpe, vocab),
                                         harness::make_dataset(dev_m, bpe, vocab), [](const harness::CurveRow& r) {
                                           std::fprintf(stderr, "epoch %d loss %.4f dev bleu %.2f acc %.4f\n", r.epoch,
                                                        r.train_loss, r.dev_bleu, r.dev_accuracy);
                                         });
      if (result.diverged) {
        std::cerr << result.message << "; last good checkpoint kept\n";
        return 2;
      }
    } else if (*xf) {
      std::vector<transfer::Checkpoint> sources{transfer::load_checkpoint(xf_from)};
      std::vector<std::string> groups{xf_groups}, labels{fs::path(xf_from).stem().string()};
      if (!xf_from2.empty()) {
        if (xf_groups2.empty()) throw harness::HarnessError("--from2 needs --groups2");
        sources.push_back(transfer::load_checkpoint(xf_from2));
        groups.push_back(xf_groups2);
        labels.push_back(fs::path(xf_from2).stem().string());
      }
      const auto target = transfer::load_checkpoint(xf_target);
      transfer::save_checkpoint(xf_out, harness::transfer_checkpoint(target, transfer_spec(sources, groups, labels, xf_freeze)));
    } else if (*tl) {
      auto lm = harness::load_model(tl_ckpt);
      harness::write_translation(tl_out, harness::translate(lm, harness::read_manifest(tl_manifest), tl_beam));
    } else if (*ev) {
      const auto report = harness::evaluate_files(ev_hyp, ev_ref, ev_opt);
      const auto text = report.to_json().dump(2);
      if (ev_json.empty()) std::cout << text << '\n';
      else std::ofstream(ev_json) << text << '\n';
      if (!ev_csv.empty()) {
        std::ofstream os(ev_csv);
        report.write_breakdown_csv(os);
      }
    } else if (*da) {
      auto lm = harness::load_model(da_ckpt);
      harness::write_attention_csv(da_out, harness::dump_attention(lm, harness::read_manifest(da_manifest), da_utt, da_beam));
    } else if (*gs) {
      gs_opt.overfit = gs_only == "all" || gs_only == "overfit";
      gs_opt.transfer = gs_only == "all" || gs_only == "transfer";
      gs_opt.audio = gs_only == "all" || gs_only == "audio";
      harness::gen_synthetic(gs_out, gs_opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
