#include <algorithm>
#include <cstring>
#include <fstream>

#include "xst/audiofeat/features.hpp"
#include "xst/numcore/binio.hpp"

namespace xst::audiofeat {

namespace bio = numcore::binio;

namespace {

constexpr char kMagic[4] = {'X', 'S', 'T', 'F'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

void write_features(std::ostream& os, const FeatureSequence& f) {
  validate(f);
  os.write(kMagic, 4);
  bio::put_uint<std::uint16_t>(os, kVersion);
  bio::put_string(os, f.utterance_id);
  bio::put_string(os, f.speaker_id);
  bio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(f.num_frames()));
  bio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(kNumCeps));
  for (float v : f.frames.values()) bio::put_f32(os, v);
}

std::optional<FeatureSequence> read_features(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() == 0) return std::nullopt;
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) throw FeatureError("feature record: bad magic");
  try {
    const auto version = bio::get_uint<std::uint16_t>(is, "feature version");
    if (version != kVersion) throw FeatureError("feature record: unsupported version " + std::to_string(version));
    FeatureSequence f;
    f.utterance_id = bio::get_string(is, "utterance id");
    f.speaker_id = bio::get_string(is, "speaker id");
    const auto T = bio::get_uint<std::uint32_t>(is, "frame count");
    const auto dims = bio::get_uint<std::uint32_t>(is, "dims");
    if (dims != kNumCeps) throw FeatureError("feature record '" + f.utterance_id + "': expected 13 dims, got " + std::to_string(dims));
    if (T == 0) throw FeatureError("feature record '" + f.utterance_id + "': zero frames");
    f.frames = numcore::Tensor<float>({T, kNumCeps});
    for (auto& v : f.frames.values()) v = bio::get_f32(is, "frames of '" + f.utterance_id + "'");
    validate(f);
    return f;
  } catch (const bio::TruncatedError& e) {
    throw FeatureError(std::string("feature record: ") + e.what());
  }
}

void save_features(const std::string& path, const std::vector<FeatureSequence>& feats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FeatureError("cannot write features to " + path);
  for (const auto& f : feats) write_features(os, f);
  if (!os) throw FeatureError("write failed for " + path);
}

std::vector<FeatureSequence> load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FeatureError("cannot read features from " + path);
  std::vector<FeatureSequence> out;
  while (auto f = read_features(is)) out.push_back(std::move(*f));
  return out;
}

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FeatureError("cannot open " + path);
  char tag[4];
  auto expect_tag = [&](const char* want) {
    if (!is.read(tag, 4) || std::memcmp(tag, want, 4) != 0) throw FeatureError(path + ": not a RIFF/WAVE file");
  };
  try {
    expect_tag("RIFF");
    bio::get_uint<std::uint32_t>(is, "riff size");
    expect_tag("WAVE");
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    while (is.read(tag, 4)) {
      const auto size = bio::get_uint<std::uint32_t>(is, "chunk size");
      if (std::memcmp(tag, "fmt ", 4) == 0) {
        format = bio::get_uint<std::uint16_t>(is, "format");
        channels = bio::get_uint<std::uint16_t>(is, "channels");
        rate = bio::get_uint<std::uint32_t>(is, "sample rate");
        bio::get_uint<std::uint32_t>(is, "byte rate");
        bio::get_uint<std::uint16_t>(is, "block align");
        bits = bio::get_uint<std::uint16_t>(is, "bits per sample");
        is.ignore(size - 16 + (size & 1));
        have_fmt = true;
      } else if (std::memcmp(tag, "data", 4) == 0) {
        if (!have_fmt) throw FeatureError(path + ": data chunk before fmt chunk");
        if (channels == 0 || rate == 0) throw FeatureError(path + ": invalid fmt chunk");
        const bool pcm16 = format == 1 && bits == 16;
        const bool f32 = format == 3 && bits == 32;
        if (!pcm16 && !f32) throw FeatureError(path + ": only 16-bit PCM and 32-bit float WAV are supported");
        const std::size_t frames = size / (channels * (bits / 8));
        Waveform w;
        w.sample_rate = rate;
        w.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
          double acc = 0.0;
          for (std::uint16_t c = 0; c < channels; ++c) {
            if (pcm16) acc += static_cast<std::int16_t>(bio::get_uint<std::uint16_t>(is, "samples")) / 32768.0;
            else acc += bio::get_f32(is, "samples");
          }
          w.samples[i] = acc / channels;
        }
        if (w.samples.empty()) throw FeatureError(path + ": no samples");
        return w;
      } else {
        is.ignore(size + (size & 1));
      }
    }
  } catch (const bio::TruncatedError& e) {
    throw FeatureError(path + ": " + e.what());
  }
  throw FeatureError(path + ": no data chunk");
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FeatureError("cannot write " + path);
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const auto rate = static_cast<std::uint32_t>(w.sample_rate);
  os.write("RIFF", 4);
  bio::put_uint<std::uint32_t>(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  bio::put_uint<std::uint32_t>(os, 16);
  bio::put_uint<std::uint16_t>(os, 1);
  bio::put_uint<std::uint16_t>(os, 1);
  bio::put_uint<std::uint32_t>(os, rate);
  bio::put_uint<std::uint32_t>(os, rate * 2);
  bio::put_uint<std::uint16_t>(os, 2);
  bio::put_uint<std::uint16_t>(os, 16);
  os.write("data", 4);
  bio::put_uint<std::uint32_t>(os, 2 * n);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
    bio::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
  }
}

}  // namespace xst::audiofeat
