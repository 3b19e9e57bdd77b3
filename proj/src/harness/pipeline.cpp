#include "xst/harness/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "xst/harness/synthetic.hpp"
#include "xst/transfer/checkpoint.hpp"

namespace xst::harness {

namespace fs = std::filesystem;

Manifest prepare_features(const Manifest& audio, const std::string& out_dir, const PrepareOptions& opt) {
  audio.validate(true);
  opt.mfcc.validate();
  std::vector<audiofeat::FeatureSequence> feats;
  feats.reserve(audio.rows.size());
  for (const auto& r : audio.rows)
    feats.push_back(audiofeat::compute_mfcc(audiofeat::read_wav(r.path), opt.mfcc, r.utterance_id, r.speaker_id));
  const auto normalizer = opt.stats_in ? audiofeat::SpeakerNormalizer::load(*opt.stats_in)
                                       : audiofeat::SpeakerNormalizer::fit(feats);
  feats = normalizer.apply(feats, opt.global_fallback);

  fs::create_directories(out_dir);
  const auto features_path = (fs::path(out_dir) / "features.xstf").string();
  audiofeat::save_features(features_path, feats);
  normalizer.save((fs::path(out_dir) / "speakers.jsonl").string());
  Manifest out = audio;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    out.rows[i].path = features_path;
    out.rows[i].duration_seconds = feats[i].duration_seconds();
  }
  write_manifest((fs::path(out_dir) / "manifest.tsv").string(), out);
  return out;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  auto ckpt = transfer::load_checkpoint(checkpoint_path);
  if (ckpt.header.vocab_fingerprint.empty())
    throw HarnessError(checkpoint_path + ": checkpoint carries no vocabulary fingerprint");
  auto vocab = transfer::checkpoint_vocab(ckpt.header);
  return {transfer::checkpoint_model(ckpt), std::move(vocab)};
}

TranslationOutput translate(LoadedModel& lm, const Manifest& m, const decode::BeamConfig& beam) {
  beam.validate();
  TranslationOutput out;
  const auto feats = load_manifest_features(m);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    decode::Seq2SeqStepModel step(lm.model, feats[i]);
    const auto res = decode::beam_search(step, beam);
    out.utterance_ids.push_back(m.rows[i].utterance_id);
    out.hypotheses.push_back(lm.vocab.decode(res.best.output()));
    out.scores.push_back(res.best.score);
  }
  return out;
}

void write_translation(const std::string& out_path, const TranslationOutput& t) {
  write_lines(out_path, t.hypotheses);
  std::vector<std::string> scores;
  for (std::size_t i = 0; i < t.scores.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", t.scores[i]);
    scores.push_back(t.utterance_ids[i] + "\t" + buf);
  }
  write_lines(out_path + ".scores", scores);
}

AttentionMatrix dump_attention(LoadedModel& lm, const Manifest& m, const std::string& utterance_id,
                               const decode::BeamConfig& beam) {
  Manifest one = m;
  one.rows = {m.find(utterance_id)};
  const auto feats = load_manifest_features(one);
  decode::Seq2SeqStepModel step(lm.model, feats.front());
  const auto res = decode::beam_search(step, beam);
  AttentionMatrix a;
  for (std::size_t i = 1; i < res.best.tokens.size(); ++i) a.subwords.push_back(lm.vocab.token(res.best.tokens[i]));
  a.rows = res.best.attention;
  return a;
}

void write_attention_csv(const std::string& path, const AttentionMatrix& a) {
  std::ofstream os(path);
  if (!os) throw HarnessError("cannot write " + path);
  const std::size_t cols = a.rows.empty() ? 0 : a.rows.front().size();
  os << "subword";
  for (std::size_t s = 0; s < cols; ++s) os << ',' << s;
  os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    auto label = a.subwords[r];
    if (label.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : label) quoted += (c == '"') ? std::string("\"\"") : std::string(1, c);
      label = quoted + "\"";
    }
    os << label;
    for (float w : a.rows[r]) {
      std::snprintf(buf, sizeof buf, "%.8g", static_cast<double>(w));
      os << ',' << buf;
    }
    os << '\n';
  }
}

evalmetrics::EvalReport evaluate_files(const std::string& hyp_path, const std::string& ref_path,
                                       const EvaluateOptions& opt) {
  const auto hyps = read_lines(hyp_path);
  const auto refs = read_lines(ref_path);
  if (hyps.size() != refs.size())
    throw HarnessError("evaluate: " + std::to_string(hyps.size()) + " hypotheses but " + std::to_string(refs.size()) +
                       " references");
  evalmetrics::MatchResource res;
  evalmetrics::MatchTiers tiers;
  if (opt.stem_language) {
    res.stemmer = evalmetrics::Stemmer::builtin(*opt.stem_language);
    tiers.stem = true;
  }
  if (opt.synonyms) {
    res.synonyms = evalmetrics::SynonymTable::load(*opt.synonyms);
    tiers.synonym = true;
  }
  auto report = evalmetrics::evaluate(hyps, refs, res, tiers, opt.wer);
  if (opt.baseline_train_text) report.k = evalmetrics::naive_topk(read_lines(*opt.baseline_train_text), refs).k;
  return report;
}

namespace {

void write_corpus(const fs::path& dir, const std::string& name, const SyntheticCorpus& c) {
  const auto feats = (dir / (name + ".xstf")).string();
  audiofeat::save_features(feats, c.features);
  Manifest m = c.manifest;
  for (auto& r : m.rows) r.path = feats;
  write_manifest((dir / (name + ".tsv")).string(), m);
  write_lines((dir / (name + ".txt")).string(), m.texts());
}

}  // namespace

void gen_synthetic(const std::string& out_dir, const GenSyntheticOptions& opt) {
  const fs::path root(out_dir);
  if (opt.overfit) {
    fs::create_directories(root / "overfit");
    write_corpus(root / "overfit", "train", make_overfit_task(opt.seed));
  }
  if (opt.transfer) {
    const auto dir = root / "transfer";
    fs::create_directories(dir);
    const auto s = make_transfer_suite(opt.seed, opt.asr_utterances);
    write_corpus(dir, "asr_en_train", s.asr_en);
    write_corpus(dir, "asr_en_dev", s.asr_en_dev);
    write_corpus(dir, "asr_fr_train", s.asr_fr);
    write_corpus(dir, "asr_fr_dev", s.asr_fr_dev);
    write_corpus(dir, "st_train", s.st_train);
    write_corpus(dir, "st_dev", s.st_dev);
    write_lines((dir / "en_lexicon.txt").string(), lexicon_corpus(s.en));
    write_lines((dir / "fr_lexicon.txt").string(), lexicon_corpus(s.fr));
  }
  if (opt.audio) {
    const auto dir = root / "audio";
    const SyntheticWorld world(opt.seed);
    const auto en = world.make_language("en", 12);
    SyntheticTaskSpec spec;
    spec.source = spec.target = &en;
    spec.min_tokens = 1;
    spec.max_tokens = 4;
    spec.num_speakers = 3;
    spec.speaker_prefix = "au";
    spec.seed = opt.seed;
    for (auto [name, n] : {std::pair{"train", 40}, std::pair{"dev", 10}}) {
      spec.name = name;
      spec.num_utterances = static_cast<std::size_t>(n);
      auto m = write_audio_corpus(world, spec, (dir / "wav").string());
      write_manifest((dir / (std::string(name) + ".tsv")).string(), m);
      write_lines((dir / (std::string(name) + ".txt")).string(), m.texts());
    }
  }
}

transfer::Checkpoint transfer_checkpoint(const transfer::Checkpoint& target, const transfer::TransferSpec& spec) {
  auto result = transfer::transfer_parameters(target.params, target.header.vocab_fingerprint, spec);
  transfer::Checkpoint out{target.header, std::move(result.params)};
  std::string origin;
  for (const auto& [group, label] : result.provenance) {
    if (label == "fresh") continue;
    origin += (origin.empty() ? "" : ",") + std::string(numcore::group_name(group)) + "<-" + label;
  }
  out.header.meta.task += origin.empty() ? "" : " [" + origin + "]";
  return out;
}

}  // namespace xst::harness
