#include "xst/harness/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

namespace xst::harness {

namespace {

constexpr std::size_t kDims = audiofeat::kNumCeps;
constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

std::string spell(numcore::RngStream& rng) {
  const std::size_t syllables = 2 + rng.index(2);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kConsonants[rng.index(14)];
    w += kVowels[rng.index(5)];
  }
  return w;
}

std::vector<std::string> unique_spellings(std::size_t n, numcore::RngStream& rng) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    auto w = spell(rng);
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

SyntheticWorld::SyntheticWorld(std::uint64_t seed, std::size_t num_phones, std::size_t frames_per_phone)
    : seed_(seed), frames_per_phone_(frames_per_phone) {
  if (num_phones < 2 || frames_per_phone == 0) throw HarnessError("synthetic world needs >= 2 phones and >= 1 frame");
  for (std::size_t p = 0; p < num_phones; ++p) {
    numcore::RngStream rng(seed, "phone/" + std::to_string(p));
    std::vector<float> proto(frames_per_phone * kDims);
    for (auto& v : proto) v = static_cast<float>(rng.normal(0.0, 1.0));
    prototypes_.push_back(std::move(proto));
  }
}

SyntheticLanguage SyntheticWorld::make_language(const std::string& code, std::size_t num_words) const {
  const std::size_t p = num_phones();
  if (num_words > p * p * (p + 1)) throw HarnessError("synthetic language: too many words for the phone inventory");
  numcore::RngStream rng(seed_, "lang/" + code);
  SyntheticLanguage lang{code, unique_spellings(num_words, rng), {}};
  std::set<std::vector<int>> seen;
  while (lang.phones.size() < num_words) {
    std::vector<int> ph(2 + rng.index(2));
    for (auto& x : ph) x = static_cast<int>(rng.index(p));
    if (seen.insert(ph).second) lang.phones.push_back(std::move(ph));
  }
  return lang;
}

SyntheticLanguage SyntheticWorld::make_cognates(const SyntheticLanguage& base, const std::string& code) const {
  numcore::RngStream rng(seed_, "cognate/" + code);
  SyntheticLanguage lang{code, unique_spellings(base.words.size(), rng), {}};
  std::set<std::vector<int>> seen;
  for (const auto& ph : base.phones) {
    for (;;) {
      auto changed = ph;
      const auto at = rng.index(changed.size());
      changed[at] = static_cast<int>((changed[at] + 1 + rng.index(num_phones() - 1)) % num_phones());
      if (seen.insert(changed).second) {
        lang.phones.push_back(std::move(changed));
        break;
      }
    }
  }
  return lang;
}

std::vector<float> SyntheticWorld::speaker_offset(const std::string& speaker_id) const {
  numcore::RngStream rng(seed_, "speaker/" + speaker_id);
  std::vector<float> off(kDims);
  for (auto& v : off) v = static_cast<float>(rng.normal(0.0, 0.5));
  return off;
}

audiofeat::FeatureSequence SyntheticWorld::render(const std::vector<int>& phones, const std::string& utterance_id,
                                                  const std::string& speaker_id, double noise_std,
                                                  numcore::RngStream& rng) const {
  const auto offset = speaker_offset(speaker_id);
  std::vector<float> data;
  for (int p : phones) {
    const auto& proto = prototypes_.at(static_cast<std::size_t>(p));
    for (std::size_t f = 0; f < frames_per_phone_; ++f) {
      const std::size_t repeats = rng.bernoulli(0.2) ? 2 : 1;
      for (std::size_t r = 0; r < repeats; ++r)
        for (std::size_t d = 0; d < kDims; ++d)
          data.push_back(proto[f * kDims + d] + offset[d] + static_cast<float>(rng.normal(0.0, noise_std)));
    }
  }
  const std::size_t frames = data.size() / kDims;
  return {utterance_id, speaker_id, numcore::Tensor<float>({frames, kDims}, std::move(data)), 10.0};
}

audiofeat::Waveform SyntheticWorld::render_audio(const std::vector<int>& phones, const std::string& speaker_id,
                                                 numcore::RngStream& rng) const {
  constexpr double kRate = 16000.0;
  constexpr std::size_t kPhoneSamples = 960;  // 60 ms
  numcore::RngStream spk(seed_, "voice/" + speaker_id);
  const double warp = spk.uniform(0.92, 1.08);
  audiofeat::Waveform w;
  w.sample_rate = kRate;
  for (int p : phones) {
    numcore::RngStream tone(seed_, "tone/" + std::to_string(p));
    const double f1 = tone.uniform(250.0, 1000.0) * warp;
    const double f2 = tone.uniform(1200.0, 3600.0) * warp;
    const double a2 = tone.uniform(0.2, 0.8);
    for (std::size_t i = 0; i < kPhoneSamples; ++i) {
      const double t = static_cast<double>(w.samples.size()) / kRate;
      const double s = 0.4 * std::sin(2.0 * std::numbers::pi * f1 * t) + 0.4 * a2 * std::sin(2.0 * std::numbers::pi * f2 * t);
      w.samples.push_back(s + rng.normal(0.0, 0.01));
    }
  }
  return w;
}

namespace {

struct Draft {
  std::string id, speaker, text;
  std::vector<int> phones;
};

std::vector<Draft> draft_utterances(const SyntheticTaskSpec& spec) {
  if (!spec.source || !spec.target) throw HarnessError("synthetic task needs source and target languages");
  if (spec.source->words.size() != spec.target->words.size())
    throw HarnessError("synthetic task: source and target lexicons must be index-aligned");
  if (spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens || spec.num_speakers == 0)
    throw HarnessError("synthetic task: bad token range or speaker count");
  const auto prefix = spec.speaker_prefix.empty() ? spec.name : spec.speaker_prefix;
  numcore::RngStream rng(spec.seed, "corpus/" + spec.name);
  std::vector<Draft> out;
  for (std::size_t u = 0; u < spec.num_utterances; ++u) {
    Draft d;
    d.id = spec.name + "_" + std::to_string(u);
    d.speaker = prefix + "_spk" + std::to_string(rng.index(spec.num_speakers));
    const std::size_t n = spec.min_tokens + rng.index(spec.max_tokens - spec.min_tokens + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto w = rng.index(spec.source->words.size());
      d.phones.insert(d.phones.end(), spec.source->phones[w].begin(), spec.source->phones[w].end());
      d.text += (i ? " " : "") + spec.target->words[w];
    }
    out.push_back(std::move(d));
  }
  return out;
}

Manifest empty_manifest(const SyntheticTaskSpec& spec) {
  Manifest m;
  m.task = spec.task;
  m.source_lang = spec.source->code;
  m.target_lang = spec.target->code;
  return m;
}

}  // namespace

SyntheticCorpus make_corpus(const SyntheticWorld& world, const SyntheticTaskSpec& spec) {
  const auto drafts = draft_utterances(spec);
  SyntheticCorpus c{empty_manifest(spec), {}};
  numcore::RngStream rng(spec.seed, "render/" + spec.name);
  for (const auto& d : drafts) {
    auto f = world.render(d.phones, d.id, d.speaker, spec.noise_std, rng);
    c.manifest.rows.push_back({d.id, "", d.speaker, f.duration_seconds(), d.text});
    c.features.push_back(std::move(f));
  }
  c.features = audiofeat::speaker_normalize(c.features);
  return c;
}

Manifest write_audio_corpus(const SyntheticWorld& world, const SyntheticTaskSpec& spec, const std::string& dir) {
  const auto drafts = draft_utterances(spec);
  std::filesystem::create_directories(dir);
  auto m = empty_manifest(spec);
  numcore::RngStream rng(spec.seed, "audio/" + spec.name);
  for (const auto& d : drafts) {
    const auto w = world.render_audio(d.phones, d.speaker, rng);
    const auto path = (std::filesystem::path(dir) / (d.id + ".wav")).string();
    audiofeat::write_wav(path, w);
    m.rows.push_back({d.id, path, d.speaker, w.duration_seconds(), d.text});
  }
  return m;
}

SyntheticCorpus make_overfit_task(std::uint64_t seed) {
  const SyntheticWorld world(seed);
  const auto lang = world.make_language("en", 30);
  SyntheticTaskSpec spec;
  spec.name = "overfit";
  spec.source = spec.target = &lang;
  spec.num_utterances = 50;
  spec.seed = seed;
  return make_corpus(world, spec);
}

TransferSuite make_transfer_suite(std::uint64_t seed, std::size_t asr_utterances, std::size_t st_utterances,
                                  std::size_t st_dev_utterances) {
  constexpr std::size_t kWords = 24;
  SyntheticWorld world(seed);
  auto en = world.make_language("en", kWords);
  auto sp = world.make_cognates(en, "sp");
  auto fr = world.make_language("fr", kWords);
  TransferSuite s{world, std::move(en), std::move(sp), std::move(fr), {}, {}, {}, {}, {}, {}};
  const auto task = [&](const std::string& name, const std::string& speakers, const SyntheticLanguage& src,
                        const SyntheticLanguage& tgt, const std::string& kind, std::size_t n) {
    SyntheticTaskSpec spec;
    spec.name = name;
    spec.speaker_prefix = speakers;
    spec.source = &src;
    spec.target = &tgt;
    spec.task = kind;
    spec.num_utterances = n;
    spec.num_speakers = 8;
    spec.min_tokens = 1;
    spec.max_tokens = 4;
    spec.seed = seed;
    return make_corpus(s.world, spec);
  };
  s.asr_en = task("asr_en", "en", s.en, s.en, "asr", asr_utterances);
  s.asr_en_dev = task("asr_en_dev", "en", s.en, s.en, "asr", 200);
  s.asr_fr = task("asr_fr", "fr", s.fr, s.fr, "asr", asr_utterances);
  s.asr_fr_dev = task("asr_fr_dev", "fr", s.fr, s.fr, "asr", 200);
  s.st_train = task("st", "sp", s.sp, s.en, "st", st_utterances);
  s.st_dev = task("st_dev", "sp", s.sp, s.en, "st", st_dev_utterances);
  return s;
}

std::vector<std::string> lexicon_corpus(const SyntheticLanguage& lang) {
  std::vector<std::string> out;
  for (int rep = 0; rep < 2; ++rep) out.insert(out.end(), lang.words.begin(), lang.words.end());
  return out;
}

}  // namespace xst::harness
