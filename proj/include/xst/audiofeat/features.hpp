#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xst/numcore/rng.hpp"
#include "xst/numcore/tensor.hpp"

namespace xst::audiofeat {

inline constexpr std::size_t kNumCeps = 13;

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  double duration_seconds() const { return samples.size() / sample_rate; }
};

struct FeatureSequence {
  std::string utterance_id;
  std::string speaker_id;
  numcore::Tensor<float> frames;  // [T, 13]
  double frame_shift_ms = 10.0;

  std::size_t num_frames() const { return frames.empty() ? 0 : frames.dim(0); }
  double duration_seconds() const { return num_frames() * frame_shift_ms / 1000.0; }
};

// Throws FeatureError unless frames is T x 13 with T >= 1 and all finite.
void validate(const FeatureSequence& f);

struct MfccConfig {
  double window_ms = 25.0;
  double shift_ms = 10.0;
  std::size_t num_mel_filters = 23;
  std::size_t num_ceps = kNumCeps;
  double pre_emphasis = 0.97;
  double log_floor = 1e-10;

  void validate() const;
};

struct AugmentConfig {
  double noise_std = 0.25;
  double frame_drop_prob = 0.10;

  void validate() const;
};

std::size_t window_samples(const MfccConfig& cfg, double sample_rate);
std::size_t shift_samples(const MfccConfig& cfg, double sample_rate);
std::size_t fft_size_for(std::size_t window);

// 1 + floor((N - window) / shift); throws when N < window.
std::size_t mfcc_frame_count(std::size_t num_samples, const MfccConfig& cfg, double sample_rate);

// Triangular filters on the HTK mel scale over bins 0..fft_size/2.
// Result is [num_filters, fft_size/2 + 1].
numcore::Tensor<double> mel_filterbank(std::size_t num_filters, std::size_t fft_size, double sample_rate);

// Pre-emphasised, Hamming-windowed frames, [T, window].
numcore::Tensor<double> analysis_frames(const Waveform& w, const MfccConfig& cfg);

// Mel filter energies of the magnitude spectrum, [T, num_mel_filters].
numcore::Tensor<double> filterbank_energies(const Waveform& w, const MfccConfig& cfg);

FeatureSequence compute_mfcc(const Waveform& w, const MfccConfig& cfg = {}, std::string utterance_id = {},
                             std::string speaker_id = {});

struct SpeakerStats {
  std::string speaker_id;
  std::vector<double> mean;
  std::vector<double> var;
  std::size_t frame_count = 0;
};

inline constexpr double kVarianceFloor = 1e-8;
inline constexpr const char* kGlobalSpeaker = "*";

class SpeakerNormalizer {
 public:
  SpeakerNormalizer() = default;

  // Per-speaker statistics plus pooled global statistics under kGlobalSpeaker.
  static SpeakerNormalizer fit(const std::vector<FeatureSequence>& feats);

  // Unknown speakers are an error unless global_fallback is set.
  FeatureSequence apply(const FeatureSequence& f, bool global_fallback = false) const;
  std::vector<FeatureSequence> apply(const std::vector<FeatureSequence>& feats, bool global_fallback = false) const;

  const std::map<std::string, SpeakerStats>& stats() const { return stats_; }

  // JSON lines: one {speaker_id, mean, var, frame_count} object per speaker.
  void save(std::ostream& os) const;
  void save(const std::string& path) const;
  static SpeakerNormalizer load(std::istream& is);
  static SpeakerNormalizer load(const std::string& path);

 private:
  std::map<std::string, SpeakerStats> stats_;
};

// Fit on feats and normalise them in one pass.
std::vector<FeatureSequence> speaker_normalize(const std::vector<FeatureSequence>& feats,
                                               SpeakerNormalizer* fitted = nullptr);

// Gaussian noise then whole-frame zero masking; length is preserved.
FeatureSequence augment(const FeatureSequence& f, const AugmentConfig& cfg, numcore::RngStream& rng);

// Binary feature records ("XSTF"); a file may hold any number of records.
void write_features(std::ostream& os, const FeatureSequence& f);
std::optional<FeatureSequence> read_features(std::istream& is);
void save_features(const std::string& path, const std::vector<FeatureSequence>& feats);
std::vector<FeatureSequence> load_features(const std::string& path);

// RIFF/WAVE reader for 16-bit PCM and 32-bit float; channels are averaged.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

}  // namespace xst::audiofeat
