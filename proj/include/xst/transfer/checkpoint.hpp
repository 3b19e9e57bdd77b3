#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "xst/numcore/params.hpp"
#include "xst/seq2seq/model.hpp"
#include "xst/textproc/vocab.hpp"

namespace xst::transfer {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class VersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class RecordError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string task;
  int epochs = 0;
  double dev_metric = 0.0;
};

struct CheckpointHeader {
  std::uint16_t version = kCheckpointVersion;
  seq2seq::ModelConfig config;
  std::vector<std::string> vocab_tokens;  // full id-ordered token list
  std::string vocab_fingerprint;
  CheckpointMeta meta;
};

struct Checkpoint {
  CheckpointHeader header;
  numcore::ParamSet<float> params;
};

Checkpoint make_checkpoint(const seq2seq::Model<float>& model, const textproc::Vocab& vocab, CheckpointMeta meta);
textproc::Vocab checkpoint_vocab(const CheckpointHeader& header);
seq2seq::Model<float> checkpoint_model(const Checkpoint& ckpt);

// Layout: "XSTC", u16 version, u32 header length, header JSON, u32 tensor
// count, name-ordered tensor records, u32 CRC-32 of everything before it.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
// Reads only the header; tensors are not materialised.
CheckpointHeader read_checkpoint_header(const std::string& path);

void save_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& is);

}  // namespace xst::transfer
