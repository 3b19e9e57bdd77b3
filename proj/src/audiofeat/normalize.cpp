#include <cmath>
#include <fstream>

#include <json.hpp>

#include "xst/audiofeat/features.hpp"

namespace xst::audiofeat {

namespace {

void accumulate(SpeakerStats& s, const FeatureSequence& f, std::vector<double>& sum, std::vector<double>& sumsq) {
  for (std::size_t t = 0; t < f.num_frames(); ++t) {
    for (std::size_t c = 0; c < kNumCeps; ++c) {
      const double x = f.frames.at(t, c);
      sum[c] += x;
      sumsq[c] += x * x;
    }
  }
  s.frame_count += f.num_frames();
}

SpeakerStats finish(std::string id, const std::vector<const FeatureSequence*>& utts) {
  SpeakerStats s;
  s.speaker_id = std::move(id);
  std::vector<double> sum(kNumCeps, 0.0), sumsq(kNumCeps, 0.0);
  for (const auto* f : utts) accumulate(s, *f, sum, sumsq);
  if (s.frame_count == 0) throw FeatureError("speaker '" + s.speaker_id + "' has no frames");
  s.mean.resize(kNumCeps);
  s.var.resize(kNumCeps);
  const double n = static_cast<double>(s.frame_count);
  for (std::size_t c = 0; c < kNumCeps; ++c) {
    s.mean[c] = sum[c] / n;
    // second pass for variance keeps precision on large offsets
    double acc = 0.0;
    for (const auto* f : utts)
      for (std::size_t t = 0; t < f->num_frames(); ++t) {
        const double d = f->frames.at(t, c) - s.mean[c];
        acc += d * d;
      }
    s.var[c] = acc / n;
  }
  return s;
}

}  // namespace

SpeakerNormalizer SpeakerNormalizer::fit(const std::vector<FeatureSequence>& feats) {
  if (feats.empty()) throw FeatureError("speaker_normalize: no utterances");
  std::map<std::string, std::vector<const FeatureSequence*>> by_speaker;
  std::vector<const FeatureSequence*> all;
  for (const auto& f : feats) {
    validate(f);
    if (f.speaker_id.empty()) throw FeatureError("utterance '" + f.utterance_id + "' has no speaker_id");
    if (f.speaker_id == kGlobalSpeaker) throw FeatureError("speaker id '*' is reserved");
    by_speaker[f.speaker_id].push_back(&f);
    all.push_back(&f);
  }
  SpeakerNormalizer n;
  for (const auto& [id, utts] : by_speaker) n.stats_.emplace(id, finish(id, utts));
  n.stats_.emplace(kGlobalSpeaker, finish(kGlobalSpeaker, all));
  return n;
}

FeatureSequence SpeakerNormalizer::apply(const FeatureSequence& f, bool global_fallback) const {
  validate(f);
  auto it = stats_.find(f.speaker_id);
  if (it == stats_.end() || f.speaker_id == kGlobalSpeaker) {
    if (!global_fallback) throw FeatureError("no normalization statistics for speaker '" + f.speaker_id + "'");
    it = stats_.find(kGlobalSpeaker);
    if (it == stats_.end()) throw FeatureError("no global normalization statistics available");
  }
  const auto& s = it->second;
  FeatureSequence out = f;
  for (std::size_t t = 0; t < f.num_frames(); ++t) {
    for (std::size_t c = 0; c < kNumCeps; ++c) {
      const double sd = std::sqrt(std::max(s.var[c], kVarianceFloor));
      out.frames.at(t, c) = static_cast<float>((f.frames.at(t, c) - s.mean[c]) / sd);
    }
  }
  return out;
}

std::vector<FeatureSequence> SpeakerNormalizer::apply(const std::vector<FeatureSequence>& feats,
                                                      bool global_fallback) const {
  std::vector<FeatureSequence> out;
  out.reserve(feats.size());
  for (const auto& f : feats) out.push_back(apply(f, global_fallback));
  return out;
}

void SpeakerNormalizer::save(std::ostream& os) const {
  for (const auto& [id, s] : stats_) {
    nlohmann::json j{{"speaker_id", s.speaker_id}, {"mean", s.mean}, {"var", s.var}, {"frame_count", s.frame_count}};
    os << j.dump() << '\n';
  }
}

void SpeakerNormalizer::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw FeatureError("cannot write speaker stats to " + path);
  save(os);
}

SpeakerNormalizer SpeakerNormalizer::load(std::istream& is) {
  SpeakerNormalizer n;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SpeakerStats s;
    try {
      auto j = nlohmann::json::parse(line);
      s.speaker_id = j.at("speaker_id").get<std::string>();
      s.mean = j.at("mean").get<std::vector<double>>();
      s.var = j.at("var").get<std::vector<double>>();
      s.frame_count = j.at("frame_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FeatureError("speaker stats line " + std::to_string(lineno) + ": " + e.what());
    }
    if (s.mean.size() != kNumCeps || s.var.size() != kNumCeps) {
      throw FeatureError("speaker stats line " + std::to_string(lineno) + ": expected 13 means and variances");
    }
    n.stats_[s.speaker_id] = std::move(s);
  }
  return n;
}

SpeakerNormalizer SpeakerNormalizer::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FeatureError("cannot read speaker stats from " + path);
  return load(is);
}

std::vector<FeatureSequence> speaker_normalize(const std::vector<FeatureSequence>& feats, SpeakerNormalizer* fitted) {
  auto n = SpeakerNormalizer::fit(feats);
  auto out = n.apply(feats);
  if (fitted) *fitted = std::move(n);
  return out;
}

FeatureSequence augment(const FeatureSequence& f, const AugmentConfig& cfg, numcore::RngStream& rng) {
  cfg.validate();
  FeatureSequence out = f;
  if (cfg.noise_std > 0.0) {
    for (auto& v : out.frames.values()) v = static_cast<float>(v + rng.normal(0.0, cfg.noise_std));
  }
  if (cfg.frame_drop_prob > 0.0) {
    for (std::size_t t = 0; t < out.num_frames(); ++t) {
      if (rng.bernoulli(cfg.frame_drop_prob))
        for (std::size_t c = 0; c < kNumCeps; ++c) out.frames.at(t, c) = 0.0f;
    }
  }
  return out;
}

}  // namespace xst::audiofeat
