#include "xst/transfer/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "xst/numcore/binio.hpp"

namespace xst::transfer {

namespace bio = numcore::binio;
using numcore::ParamGroup;
using numcore::Tensor;

namespace {

constexpr char kMagic[4] = {'X', 'S', 'T', 'C'};

nlohmann::json header_json(const CheckpointHeader& h) {
  return {{"config", seq2seq::to_json(h.config)},
          {"vocab", {{"tokens", h.vocab_tokens}, {"fingerprint", h.vocab_fingerprint}}},
          {"meta", {{"task", h.meta.task}, {"epochs", h.meta.epochs}, {"dev_metric", h.meta.dev_metric}}}};
}

CheckpointHeader parse_header(const std::string& text, std::uint16_t version) {
  CheckpointHeader h;
  h.version = version;
  try {
    auto j = nlohmann::json::parse(text);
    h.config = seq2seq::model_config_from_json(j.at("config"));
    h.vocab_tokens = j.at("vocab").at("tokens").get<std::vector<std::string>>();
    h.vocab_fingerprint = j.at("vocab").at("fingerprint").get<std::string>();
    h.meta.task = j.at("meta").at("task").get<std::string>();
    h.meta.epochs = j.at("meta").at("epochs").get<int>();
    h.meta.dev_metric = j.at("meta").at("dev_metric").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw RecordError(std::string("checkpoint header: ") + e.what());
  } catch (const seq2seq::ConfigError& e) {
    throw RecordError(std::string("checkpoint header: ") + e.what());
  }
  if (h.vocab_fingerprint.empty()) throw RecordError("checkpoint header: missing vocabulary fingerprint");
  return h;
}

CheckpointHeader read_header(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw TruncatedError("checkpoint: truncated before magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw RecordError("checkpoint: bad magic, not an XSTC file");
  try {
    const auto version = bio::get_uint<std::uint16_t>(is, "version");
    if (version != kCheckpointVersion) {
      throw VersionError("checkpoint: unsupported format version " + std::to_string(version) + " (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    }
    const auto text = bio::get_string(is, "header", 1u << 28);
    return parse_header(text, version);
  } catch (const bio::TruncatedError& e) {
    throw TruncatedError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace

Checkpoint make_checkpoint(const seq2seq::Model<float>& model, const textproc::Vocab& vocab, CheckpointMeta meta) {
  if (model.config().decoder.vocab_size != vocab.size()) {
    throw CheckpointError("checkpoint: model output size " + std::to_string(model.config().decoder.vocab_size) +
                          " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  Checkpoint c;
  c.header.config = model.config();
  c.header.vocab_tokens = vocab.tokens();
  c.header.vocab_fingerprint = vocab.fingerprint();
  c.header.meta = std::move(meta);
  c.params = model.params();
  return c;
}

textproc::Vocab checkpoint_vocab(const CheckpointHeader& header) {
  std::vector<std::string> plain(header.vocab_tokens.begin() + std::min<std::size_t>(3, header.vocab_tokens.size()),
                                 header.vocab_tokens.end());
  textproc::Vocab v(plain);
  if (v.tokens() != header.vocab_tokens || v.fingerprint() != header.vocab_fingerprint) {
    throw RecordError("checkpoint: stored vocabulary does not match its fingerprint");
  }
  return v;
}

seq2seq::Model<float> checkpoint_model(const Checkpoint& ckpt) {
  try {
    return seq2seq::Model<float>(ckpt.header.config, ckpt.params);
  } catch (const numcore::ShapeError& e) {
    throw RecordError(std::string("checkpoint: ") + e.what());
  } catch (const seq2seq::ConfigError& e) {
    throw RecordError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  bio::put_uint<std::uint16_t>(os, kCheckpointVersion);
  bio::put_string(os, header_json(ckpt.header).dump());
  bio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, e] : ckpt.params) {
    if (!e.value.all_finite()) throw CheckpointError("checkpoint: parameter " + name + " is not finite");
    bio::put_string(os, name);
    os.put(static_cast<char>(e.group));
    os.put(static_cast<char>(e.trainable ? 1 : 0));
    bio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) bio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (float v : e.value.values()) bio::put_f32(os, v);
  }
  const auto bytes = os.str();
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  bio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(crc));
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint " + path);
  save_checkpoint(os, ckpt);
  if (!os) throw CheckpointError("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(std::istream& in) {
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream is(bytes, std::ios::binary);
  Checkpoint ckpt;
  ckpt.header = read_header(is);
  std::string current = "tensor count";
  try {
    const auto count = bio::get_uint<std::uint32_t>(is, current);
    for (std::uint32_t i = 0; i < count; ++i) {
      current = "tensor record #" + std::to_string(i);
      const auto name = bio::get_string(is, current + " name");
      current = "tensor " + name;
      const int group = is.get();
      const int trainable = is.get();
      if (!is) throw bio::TruncatedError("truncated input while reading " + current);
      if (group < 0 || group >= static_cast<int>(numcore::kAllGroups.size()) || trainable < 0 || trainable > 1) {
        throw RecordError("checkpoint: tensor " + name + " has an invalid group or trainable flag");
      }
      const auto rank = bio::get_uint<std::uint32_t>(is, current);
      if (rank == 0 || rank > 8) throw RecordError("checkpoint: tensor " + name + " has invalid rank " + std::to_string(rank));
      numcore::Shape shape(rank);
      std::uint64_t n = 1;
      for (auto& d : shape) {
        d = bio::get_uint<std::uint32_t>(is, current);
        if (d == 0) throw RecordError("checkpoint: tensor " + name + " has a zero extent");
        n *= d;
      }
      const auto remaining = bytes.size() - static_cast<std::size_t>(is.tellg());
      if (n * 4 > remaining) throw bio::TruncatedError("truncated input while reading " + current);
      Tensor<float> t(shape);
      for (auto& v : t.values()) v = bio::get_f32(is, current);
      if (ckpt.params.contains(name)) throw RecordError("checkpoint: duplicate tensor " + name);
      ckpt.params.add(name, std::move(t), static_cast<ParamGroup>(group), trainable == 1);
    }
    current = "checksum";
    const auto body = static_cast<std::size_t>(is.tellg());
    const auto stored = bio::get_uint<std::uint32_t>(is, current);
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(body));
    if (stored != static_cast<std::uint32_t>(crc)) throw ChecksumError("checkpoint: checksum mismatch");
    if (is.peek() != std::char_traits<char>::eof()) throw RecordError("checkpoint: trailing bytes after checksum");
  } catch (const bio::TruncatedError&) {
    throw TruncatedError("checkpoint: file truncated while reading " + current);
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read checkpoint " + path);
  return load_checkpoint(is);
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read checkpoint " + path);
  return read_header(is);
}

}  // namespace xst::transfer
