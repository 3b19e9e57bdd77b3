#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xst/audiofeat/features.hpp"

namespace xst::audiofeat {

using numcore::Tensor;

void validate(const FeatureSequence& f) {
  if (f.frames.rank() != 2 || f.frames.dim(1) != kNumCeps) {
    throw FeatureError("features for '" + f.utterance_id + "' must be T x 13, got " +
                       numcore::shape_str(f.frames.shape()));
  }
  if (!f.frames.all_finite()) throw FeatureError("features for '" + f.utterance_id + "' contain non-finite values");
}

void MfccConfig::validate() const {
  if (!(shift_ms > 0.0 && window_ms > shift_ms)) throw FeatureError("mfcc: need window_ms > shift_ms > 0");
  if (num_ceps != kNumCeps) throw FeatureError("mfcc: num_ceps is fixed at 13");
  if (num_ceps > num_mel_filters) throw FeatureError("mfcc: num_ceps exceeds num_mel_filters");
  if (!(log_floor > 0.0)) throw FeatureError("mfcc: log_floor must be positive");
}

void AugmentConfig::validate() const {
  if (!(noise_std >= 0.0)) throw FeatureError("augment: noise_std must be >= 0");
  if (!(frame_drop_prob >= 0.0 && frame_drop_prob <= 1.0)) throw FeatureError("augment: frame_drop_prob outside [0, 1]");
}

std::size_t window_samples(const MfccConfig& cfg, double sample_rate) {
  return static_cast<std::size_t>(std::llround(cfg.window_ms * sample_rate / 1000.0));
}

std::size_t shift_samples(const MfccConfig& cfg, double sample_rate) {
  return static_cast<std::size_t>(std::llround(cfg.shift_ms * sample_rate / 1000.0));
}

std::size_t fft_size_for(std::size_t window) {
  std::size_t n = 1;
  while (n < window) n <<= 1;
  return n;
}

std::size_t mfcc_frame_count(std::size_t num_samples, const MfccConfig& cfg, double sample_rate) {
  const auto win = window_samples(cfg, sample_rate);
  const auto hop = shift_samples(cfg, sample_rate);
  if (win == 0 || hop == 0) throw FeatureError("mfcc: window or shift rounds to zero samples");
  if (num_samples < win) {
    throw FeatureError("mfcc: waveform has " + std::to_string(num_samples) + " samples, shorter than one window (" +
                       std::to_string(win) + ")");
  }
  return 1 + (num_samples - win) / hop;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void check_waveform(const Waveform& w) {
  if (!(w.sample_rate > 0.0)) throw FeatureError("waveform: sample_rate must be positive");
  if (w.samples.empty()) throw FeatureError("waveform: no samples");
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw FeatureError("waveform: non-finite sample");
  }
}

}  // namespace

Tensor<double> mel_filterbank(std::size_t num_filters, std::size_t fft_size, double sample_rate) {
  const std::size_t bins = fft_size / 2 + 1;
  Tensor<double> fb({num_filters, bins});
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(num_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_to_hz(top * i / (num_filters + 1));
  for (std::size_t m = 0; m < num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = k * sample_rate / fft_size;
      double wgt = 0.0;
      if (f > lo && f <= mid) wgt = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) wgt = (hi - f) / (hi - mid);
      fb.at(m, k) = wgt;
    }
  }
  return fb;
}

Tensor<double> analysis_frames(const Waveform& w, const MfccConfig& cfg) {
  cfg.validate();
  check_waveform(w);
  const auto win = window_samples(cfg, w.sample_rate);
  const auto hop = shift_samples(cfg, w.sample_rate);
  const auto T = mfcc_frame_count(w.samples.size(), cfg, w.sample_rate);

  std::vector<double> emph(w.samples.size());
  emph[0] = w.samples[0];
  for (std::size_t i = 1; i < emph.size(); ++i) emph[i] = w.samples[i] - cfg.pre_emphasis * w.samples[i - 1];

  std::vector<double> hamming(win);
  for (std::size_t n = 0; n < win; ++n) {
    hamming[n] = win == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (win - 1));
  }
  Tensor<double> frames({T, win});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < win; ++n) frames.at(t, n) = emph[t * hop + n] * hamming[n];
  return frames;
}

Tensor<double> filterbank_energies(const Waveform& w, const MfccConfig& cfg) {
  auto frames = analysis_frames(w, cfg);
  const std::size_t T = frames.dim(0), win = frames.dim(1);
  const std::size_t nfft = fft_size_for(win);
  const std::size_t bins = nfft / 2 + 1;
  const auto fb = mel_filterbank(cfg.num_mel_filters, nfft, w.sample_rate);

  auto* in = fftw_alloc_real(nfft);
  auto* out = fftw_alloc_complex(bins);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
  Tensor<double> energies({T, cfg.num_mel_filters});
  std::vector<double> mag(bins);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < nfft; ++n) in[n] = n < win ? frames.at(t, n) : 0.0;
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
    for (std::size_t m = 0; m < cfg.num_mel_filters; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fb.at(m, k) * mag[k];
      energies.at(t, m) = e;
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  fftw_free(in);
  return energies;
}

FeatureSequence compute_mfcc(const Waveform& w, const MfccConfig& cfg, std::string utterance_id,
                             std::string speaker_id) {
  const auto energies = filterbank_energies(w, cfg);
  const std::size_t T = energies.dim(0), M = cfg.num_mel_filters;
  FeatureSequence f;
  f.utterance_id = std::move(utterance_id);
  f.speaker_id = std::move(speaker_id);
  f.frame_shift_ms = cfg.shift_ms;
  f.frames = Tensor<float>({T, kNumCeps});
  std::vector<double> loge(M);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t m = 0; m < M; ++m) loge[m] = std::log(std::max(energies.at(t, m), cfg.log_floor));
    for (std::size_t c = 0; c < kNumCeps; ++c) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += loge[m] * std::cos(std::numbers::pi * c * (m + 0.5) / M);
      f.frames.at(t, c) = static_cast<float>(acc * std::sqrt((c == 0 ? 1.0 : 2.0) / M));
    }
  }
  validate(f);
  return f;
}

}  // namespace xst::audiofeat
