#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace xst::seq2seq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HiddenConvention { per_direction, total };

struct EncoderConfig {
  std::size_t input_dim = 13;
  std::vector<std::size_t> cnn_filters{128, 512};
  std::size_t cnn_width = 9;
  std::size_t cnn_stride = 2;
  std::size_t lstm_layers = 3;
  std::size_t lstm_hidden = 512;
  HiddenConvention hidden_convention = HiddenConvention::per_direction;

  std::size_t per_direction_hidden() const {
    return hidden_convention == HiddenConvention::per_direction ? lstm_hidden : lstm_hidden / 2;
  }
  std::size_t output_dim() const { return 2 * per_direction_hidden(); }
  // T' after every strided convolution.
  std::size_t output_length(std::size_t frames) const;
};

struct DecoderConfig {
  std::size_t embed_dim = 128;
  std::size_t lstm_layers = 3;
  std::size_t lstm_hidden = 256;
  std::size_t vocab_size = 0;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;

  void validate() const;
};

struct TrainSchedule {
  double sample_prob = 0.2;
  double corrupt_prob = 0.3;
  int corrupt_start_epoch = 20;
  double dropout = 0.3;
  double weight_decay = 1e-4;
  double clip_norm = 5.0;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace xst::seq2seq
