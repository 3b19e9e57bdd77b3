#include "xst/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "xst/harness/manifest.hpp"

namespace xst::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw HarnessError("config: bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw HarnessError("config: expected true/false for " + key + ", got '" + v + "'");
}

std::string list_str(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename N, typename Ptr>
Field number_field(const std::string& key, Ptr ptr) {
  return {[ptr](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<N>) return format_double(std::invoke(ptr, c));
            else return std::to_string(std::invoke(ptr, c));
          },
          [ptr, key](ExperimentConfig& c, const std::string& v) { std::invoke(ptr, c) = parse_number<N>(key, v); }};
}

Field bool_field(const std::string& key, bool ExperimentConfig::*ptr) {
  return {[ptr](const ExperimentConfig& c) { return std::string(c.*ptr ? "true" : "false"); },
          [ptr, key](ExperimentConfig& c, const std::string& v) { c.*ptr = parse_bool(key, v); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto num = [&t](const std::string& key, auto accessor, auto tag) {
      using N = decltype(tag);
      t.emplace(key, number_field<N>(key, accessor));
    };
    num("seed", [](auto& c) -> auto& { return c.seed; }, std::uint64_t{});
    num("max_epochs", [](auto& c) -> auto& { return c.max_epochs; }, int{});
    num("batch_size", [](auto& c) -> auto& { return c.batch_size; }, std::size_t{});
    num("learning_rate", [](auto& c) -> auto& { return c.learning_rate; }, double{});
    num("patience", [](auto& c) -> auto& { return c.patience; }, int{});
    num("stop_dev_accuracy", [](auto& c) -> auto& { return c.stop_dev_accuracy; }, double{});
    num("dev_max_len", [](auto& c) -> auto& { return c.dev_max_len; }, std::size_t{});
    num("encoder.input_dim", [](auto& c) -> auto& { return c.model.encoder.input_dim; }, std::size_t{});
    num("encoder.cnn_width", [](auto& c) -> auto& { return c.model.encoder.cnn_width; }, std::size_t{});
    num("encoder.cnn_stride", [](auto& c) -> auto& { return c.model.encoder.cnn_stride; }, std::size_t{});
    num("encoder.lstm_layers", [](auto& c) -> auto& { return c.model.encoder.lstm_layers; }, std::size_t{});
    num("encoder.lstm_hidden", [](auto& c) -> auto& { return c.model.encoder.lstm_hidden; }, std::size_t{});
    num("decoder.embed_dim", [](auto& c) -> auto& { return c.model.decoder.embed_dim; }, std::size_t{});
    num("decoder.lstm_layers", [](auto& c) -> auto& { return c.model.decoder.lstm_layers; }, std::size_t{});
    num("decoder.lstm_hidden", [](auto& c) -> auto& { return c.model.decoder.lstm_hidden; }, std::size_t{});
    num("schedule.sample_prob", [](auto& c) -> auto& { return c.schedule.sample_prob; }, double{});
    num("schedule.corrupt_prob", [](auto& c) -> auto& { return c.schedule.corrupt_prob; }, double{});
    num("schedule.corrupt_start_epoch", [](auto& c) -> auto& { return c.schedule.corrupt_start_epoch; }, int{});
    num("schedule.dropout", [](auto& c) -> auto& { return c.schedule.dropout; }, double{});
    num("schedule.weight_decay", [](auto& c) -> auto& { return c.schedule.weight_decay; }, double{});
    num("schedule.clip_norm", [](auto& c) -> auto& { return c.schedule.clip_norm; }, double{});
    num("augment.noise_std", [](auto& c) -> auto& { return c.augment.noise_std; }, double{});
    num("augment.frame_drop_prob", [](auto& c) -> auto& { return c.augment.frame_drop_prob; }, double{});
    t.emplace("augment.enabled", bool_field("augment.enabled", &ExperimentConfig::augment_enabled));
    t.emplace("dev_decode", bool_field("dev_decode", &ExperimentConfig::dev_decode));
    t.emplace("record_wallclock", bool_field("record_wallclock", &ExperimentConfig::record_wallclock));
    t.emplace("encoder.cnn_filters",
              Field{[](const ExperimentConfig& c) { return list_str(c.model.encoder.cnn_filters); },
                    [](ExperimentConfig& c, const std::string& v) {
                      c.model.encoder.cnn_filters = parse_list("encoder.cnn_filters", v);
                    }});
    t.emplace("encoder.hidden_convention",
              Field{[](const ExperimentConfig& c) {
                      return std::string(c.model.encoder.hidden_convention == seq2seq::HiddenConvention::total
                                             ? "total"
                                             : "per_direction");
                    },
                    [](ExperimentConfig& c, const std::string& v) {
                      if (v == "total") c.model.encoder.hidden_convention = seq2seq::HiddenConvention::total;
                      else if (v == "per_direction")
                        c.model.encoder.hidden_convention = seq2seq::HiddenConvention::per_direction;
                      else throw HarnessError("config: encoder.hidden_convention must be per_direction or total");
                    }});
    t.emplace("output_dir", Field{[](const ExperimentConfig& c) { return c.output_dir; },
                                  [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }});
    t.emplace("task", Field{[](const ExperimentConfig& c) { return c.task; },
                            [](ExperimentConfig& c, const std::string& v) { c.task = v; }});
    return t;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (max_epochs < 0) throw HarnessError("config: max_epochs must be >= 0");
  if (batch_size == 0) throw HarnessError("config: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw HarnessError("config: learning_rate must be positive");
  if (patience < 0) throw HarnessError("config: patience must be >= 0");
  if (!(stop_dev_accuracy >= 0.0 && stop_dev_accuracy <= 1.0))
    throw HarnessError("config: stop_dev_accuracy must lie in [0, 1]");
  if (model.encoder.cnn_filters.empty()) throw HarnessError("config: encoder.cnn_filters must not be empty");
  schedule.validate();
  augment.validate();
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw HarnessError("config: unknown key '" + key + "'");
  it->second.set(cfg, value);
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw HarnessError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_snapshot(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& kv : fields()) out.push_back(kv.first);
  return out;
}

}  // namespace xst::harness
