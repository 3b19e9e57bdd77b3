#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xst/audiofeat/features.hpp"
#include "xst/harness/manifest.hpp"

namespace xst::harness {

// Words of one synthetic language: spelling plus phone string.
struct SyntheticLanguage {
  std::string code;
  std::vector<std::string> words;
  std::vector<std::vector<int>> phones;
};

// Shared acoustic space. Each phone owns a short 13-dim prototype pattern;
// each speaker adds a fixed offset. Every draw is keyed by name, so the same
// seed always describes the same world.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(std::uint64_t seed, std::size_t num_phones = 24, std::size_t frames_per_phone = 4);

  std::uint64_t seed() const { return seed_; }
  std::size_t num_phones() const { return prototypes_.size(); }

  // Words of 2 to 3 phones with distinct phone strings and spellings.
  SyntheticLanguage make_language(const std::string& code, std::size_t num_words) const;
  // Same word list with one phone of every word replaced and new spellings.
  SyntheticLanguage make_cognates(const SyntheticLanguage& base, const std::string& code) const;

  audiofeat::FeatureSequence render(const std::vector<int>& phones, const std::string& utterance_id,
                                    const std::string& speaker_id, double noise_std, numcore::RngStream& rng) const;
  // Sum-of-tones waveform (16 kHz) with one tone pair per phone.
  audiofeat::Waveform render_audio(const std::vector<int>& phones, const std::string& speaker_id,
                                   numcore::RngStream& rng) const;

 private:
  std::uint64_t seed_;
  std::size_t frames_per_phone_;
  std::vector<std::vector<float>> prototypes_;  // per phone: frames * 13
  std::vector<float> speaker_offset(const std::string& speaker_id) const;
};

struct SyntheticTaskSpec {
  std::string name;  // utterance id prefix
  const SyntheticLanguage* source = nullptr;  // spoken words
  const SyntheticLanguage* target = nullptr;  // text words; index-aligned with source
  std::string task = "asr";
  std::size_t num_utterances = 100;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 8;
  std::size_t num_speakers = 4;
  std::string speaker_prefix;  // defaults to name; share it across splits of one task
  double noise_std = 0.3;
  std::uint64_t seed = 1;
};

// Features are speaker-normalised within the corpus.
struct SyntheticCorpus {
  Manifest manifest;  // paths left empty
  std::vector<audiofeat::FeatureSequence> features;
};

SyntheticCorpus make_corpus(const SyntheticWorld& world, const SyntheticTaskSpec& spec);

// Waveform corpus; write_audio_corpus stores one WAV per utterance under dir
// and returns the manifest that points at them.
Manifest write_audio_corpus(const SyntheticWorld& world, const SyntheticTaskSpec& spec, const std::string& dir);

// The overfit task: 50 utterances of 3 to 8 words over a 30-word lexicon.
SyntheticCorpus make_overfit_task(std::uint64_t seed);

// Related tasks over one acoustic world: English and French ASR for
// pretraining, and Spanish-to-English translation whose Spanish words are
// one-phone variants of the English ones.
struct TransferSuite {
  SyntheticWorld world;
  SyntheticLanguage en, sp, fr;
  SyntheticCorpus asr_en, asr_en_dev, asr_fr, asr_fr_dev, st_train, st_dev;
};
TransferSuite make_transfer_suite(std::uint64_t seed, std::size_t asr_utterances = 5000,
                                  std::size_t st_utterances = 200, std::size_t st_dev_utterances = 100);

// Word list repeated twice, which makes learned merges whole words.
std::vector<std::string> lexicon_corpus(const SyntheticLanguage& lang);

}  // namespace xst::harness
