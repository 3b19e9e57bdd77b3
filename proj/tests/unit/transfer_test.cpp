#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/transfer_checks.hpp"

namespace xst::transfer {
namespace {

using testing::tiny_model_config;
using testing::toy_vocab;
using testing::trained_checkpoint;

std::string serialize(const Checkpoint& c) {
  std::ostringstream os(std::ios::binary);
  save_checkpoint(os, c);
  return os.str();
}

Checkpoint parse(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return load_checkpoint(is);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto vocab = toy_vocab("w", 6);
  auto c = trained_checkpoint(tiny_model_config(9), vocab, 1, "en-asr");
  auto back = parse(serialize(c));
  ASSERT_EQ(back.params.size(), c.params.size());
  for (const auto& [name, e] : c.params) {
    const auto& b = back.params.at(name);
    EXPECT_EQ(b.value, e.value) << name;
    EXPECT_EQ(b.group, e.group);
    EXPECT_EQ(b.trainable, e.trainable);
  }
  EXPECT_EQ(back.header.vocab_fingerprint, vocab.fingerprint());
  EXPECT_EQ(back.header.meta.task, "en-asr");
  EXPECT_EQ(checkpoint_vocab(back.header), vocab);
  EXPECT_EQ(serialize(back), serialize(c));
}

TEST(Checkpoint, HeaderOnlyRead) {
  const auto path = (std::filesystem::temp_directory_path() / "xst_header_test.ckpt").string();
  auto vocab = toy_vocab("w", 6);
  save_checkpoint(path, trained_checkpoint(tiny_model_config(9), vocab, 2, "fr-asr"));
  auto h = read_checkpoint_header(path);
  EXPECT_EQ(h.vocab_fingerprint, vocab.fingerprint());
  EXPECT_EQ(h.config.decoder.vocab_size, 9u);
  EXPECT_EQ(h.meta.epochs, 10);
  std::filesystem::remove(path);
}

TEST(Checkpoint, TruncationNamesTensor) {
  auto bytes = serialize(trained_checkpoint(tiny_model_config(9), toy_vocab("w", 6), 3, "x"));
  const auto pos = bytes.find("encoder.lstm.0.bwd.weight_hh");
  ASSERT_NE(pos, std::string::npos);
  try {
    parse(bytes.substr(0, pos + 60));
    FAIL() << "expected truncation error";
  } catch (const TruncatedError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.lstm.0.bwd.weight_hh"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, DistinctErrors) {
  auto bytes = serialize(trained_checkpoint(tiny_model_config(9), toy_vocab("w", 6), 4, "x"));
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  EXPECT_THROW(parse(wrong_version), VersionError);
  auto flipped = bytes;
  flipped[bytes.size() - 10] ^= 0x20;
  EXPECT_THROW(parse(flipped), ChecksumError);
  EXPECT_THROW(parse("NOPE"), RecordError);
  EXPECT_THROW(parse(bytes.substr(0, 3)), TruncatedError);
}

TEST(Checkpoint, ShapeDisagreementWithConfig) {
  auto c = trained_checkpoint(tiny_model_config(9), toy_vocab("w", 6), 5, "x");
  c.header.config.decoder.embed_dim = 7;
  EXPECT_THROW(checkpoint_model(parse(serialize(c))), RecordError);
}

TEST(Transfer, SurgeryScenarios) {
  for (const auto& r : testing::transfer_surgery_checks(7)) EXPECT_TRUE(r.passed) << r.scenario << "\n" << r.detail;
}

TEST(Transfer, EncoderOnlyLeavesDecoderFresh) {
  const auto cfg = tiny_model_config(9);
  auto vocab = toy_vocab("w", 6);
  auto src = trained_checkpoint(cfg, toy_vocab("q", 6), 8, "other");
  seq2seq::Model<float> fresh(cfg, 9);
  TransferSpec spec;
  spec.sources.push_back({&src, preset_groups("+asr:enc"), "other"});
  auto r = transfer_parameters(fresh.params(), vocab.fingerprint(), spec);
  EXPECT_EQ(r.params.at("decoder.embedding").value, fresh.params().at("decoder.embedding").value);
  EXPECT_EQ(r.params.at("attention.W_a").value, fresh.params().at("attention.W_a").value);
  EXPECT_EQ(r.provenance.at(ParamGroup::cnn), "other");
  EXPECT_EQ(r.provenance.at(ParamGroup::decoder), "fresh");
}

TEST(Transfer, MismatchedVocabularyRejectsDecoder) {
  const auto cfg = tiny_model_config(9);
  auto src = trained_checkpoint(cfg, toy_vocab("q", 6), 10, "other");
  seq2seq::Model<float> fresh(cfg, 11);
  TransferSpec spec;
  spec.sources.push_back({&src, {ParamGroup::output}, "other"});
  try {
    transfer_parameters(fresh.params(), toy_vocab("w", 6).fingerprint(), spec);
    FAIL();
  } catch (const TransferError& e) {
    EXPECT_NE(std::string(e.what()).find("only encoder"), std::string::npos);
  }
}

TEST(Transfer, ShapeMismatchNamesParameterAndShapes) {
  auto big = tiny_model_config(9);
  big.encoder.lstm_hidden = 5;
  auto src = trained_checkpoint(big, toy_vocab("w", 6), 12, "big");
  seq2seq::Model<float> fresh(tiny_model_config(9), 13);
  TransferSpec spec;
  spec.sources.push_back({&src, {ParamGroup::encoder_lstm}, "big"});
  try {
    transfer_parameters(fresh.params(), toy_vocab("w", 6).fingerprint(), spec);
    FAIL();
  } catch (const TransferError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("encoder.lstm.0.bwd.bias"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[20]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[16]"), std::string::npos) << msg;
  }
}

TEST(Transfer, SpecValidation) {
  const auto cfg = tiny_model_config(9);
  auto vocab = toy_vocab("w", 6);
  auto a = trained_checkpoint(cfg, vocab, 14, "a");
  seq2seq::Model<float> fresh(cfg, 15);
  TransferSpec overlap;
  overlap.sources.push_back({&a, {ParamGroup::cnn}, "a"});
  overlap.sources.push_back({&a, {ParamGroup::cnn, ParamGroup::output}, "b"});
  EXPECT_THROW(transfer_parameters(fresh.params(), vocab.fingerprint(), overlap), TransferError);
  TransferSpec empty;
  empty.sources.push_back({&a, {}, "a"});
  EXPECT_THROW(transfer_parameters(fresh.params(), vocab.fingerprint(), empty), TransferError);
  EXPECT_THROW(preset_groups("+asr:xyz"), TransferError);
  EXPECT_EQ(parse_groups("cnn,encoder_lstm"), preset_groups("+asr:enc"));
}

TEST(Transfer, FrozenGroupsBecomeNonTrainable) {
  const auto cfg = tiny_model_config(9);
  auto vocab = toy_vocab("w", 6);
  auto a = trained_checkpoint(cfg, vocab, 16, "a");
  seq2seq::Model<float> fresh(cfg, 17);
  TransferSpec spec;
  spec.sources.push_back({&a, preset_groups("+asr:enc"), "a"});
  spec.frozen = {ParamGroup::cnn};
  auto r = transfer_parameters(fresh.params(), vocab.fingerprint(), spec);
  EXPECT_FALSE(r.params.at("encoder.cnn.0.weight").trainable);
  EXPECT_TRUE(r.params.at("encoder.lstm.0.fwd.bias").trainable);
}

}  // namespace
}  // namespace xst::transfer
