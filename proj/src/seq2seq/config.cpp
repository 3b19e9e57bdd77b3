#include "xst/seq2seq/config.hpp"

#include "xst/numcore/ops.hpp"

namespace xst::seq2seq {

std::size_t EncoderConfig::output_length(std::size_t frames) const {
  for (std::size_t i = 0; i < cnn_filters.size(); ++i) frames = numcore::ops::conv_output_length(frames, cnn_stride);
  return frames;
}

void ModelConfig::validate() const {
  const auto& e = encoder;
  const auto& d = decoder;
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string("model config: ") + what + " must be positive");
  };
  positive(e.input_dim, "encoder input_dim");
  positive(e.cnn_width, "cnn_width");
  positive(e.cnn_stride, "cnn_stride");
  positive(e.lstm_layers, "encoder lstm_layers");
  positive(e.per_direction_hidden(), "encoder lstm_hidden");
  for (auto f : e.cnn_filters) positive(f, "cnn filter count");
  if (e.hidden_convention == HiddenConvention::total && e.lstm_hidden % 2 != 0) {
    throw ConfigError("model config: total encoder hidden size must be even");
  }
  positive(d.embed_dim, "decoder embed_dim");
  positive(d.lstm_layers, "decoder lstm_layers");
  positive(d.lstm_hidden, "decoder lstm_hidden");
  if (d.vocab_size < 4) throw ConfigError("model config: vocab_size must cover the specials plus one token");
}

void TrainSchedule::validate() const {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("schedule: ") + what + " outside [0, 1]");
  };
  prob(sample_prob, "sample_prob");
  prob(corrupt_prob, "corrupt_prob");
  if (corrupt_start_epoch < 0) throw ConfigError("schedule: corrupt_start_epoch must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("schedule: dropout outside [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("schedule: weight_decay must be >= 0");
  if (!(clip_norm > 0.0)) throw ConfigError("schedule: clip_norm must be positive");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  const auto& e = cfg.encoder;
  const auto& d = cfg.decoder;
  return {
      {"encoder",
       {{"input_dim", e.input_dim},
        {"cnn_filters", e.cnn_filters},
        {"cnn_width", e.cnn_width},
        {"cnn_stride", e.cnn_stride},
        {"lstm_layers", e.lstm_layers},
        {"lstm_hidden", e.lstm_hidden},
        {"hidden_convention", e.hidden_convention == HiddenConvention::per_direction ? "per_direction" : "total"}}},
      {"decoder",
       {{"embed_dim", d.embed_dim},
        {"lstm_layers", d.lstm_layers},
        {"lstm_hidden", d.lstm_hidden},
        {"vocab_size", d.vocab_size}}},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    const auto& e = j.at("encoder");
    cfg.encoder.input_dim = e.at("input_dim");
    cfg.encoder.cnn_filters = e.at("cnn_filters").get<std::vector<std::size_t>>();
    cfg.encoder.cnn_width = e.at("cnn_width");
    cfg.encoder.cnn_stride = e.at("cnn_stride");
    cfg.encoder.lstm_layers = e.at("lstm_layers");
    cfg.encoder.lstm_hidden = e.at("lstm_hidden");
    const auto conv = e.at("hidden_convention").get<std::string>();
    if (conv != "per_direction" && conv != "total") throw ConfigError("unknown hidden_convention '" + conv + "'");
    cfg.encoder.hidden_convention = conv == "total" ? HiddenConvention::total : HiddenConvention::per_direction;
    const auto& d = j.at("decoder");
    cfg.decoder.embed_dim = d.at("embed_dim");
    cfg.decoder.lstm_layers = d.at("lstm_layers");
    cfg.decoder.lstm_hidden = d.at("lstm_hidden");
    cfg.decoder.vocab_size = d.at("vocab_size");
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("model config: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace xst::seq2seq
