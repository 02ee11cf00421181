#include "flowline/config.hpp"

#include <algorithm>
#include <fstream>
#include <type_traits>

#include <fmt/format.h>

namespace flowline {

using nlohmann::json;

namespace {

const json* find_key(const json& doc, const std::string& key) {
  if (!doc.is_object()) return nullptr;
  auto it = doc.find(key);
  return it == doc.end() ? nullptr : &*it;
}

template <typename T>
T convert(const json& value, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError(key, "");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!value.is_number_unsigned()) throw ConfigError(key, "");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError(key, "");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) throw ConfigError(key, "");
    } else {
      if (!value.is_string()) throw ConfigError(key, "");
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(key, "invalid value for key: " + key);
  }
}

template <typename T>
T required(const json& doc, const std::string& key, const std::string& path = "") {
  const std::string full = path.empty() ? key : path + "." + key;
  const json* value = find_key(doc, key);
  if (value == nullptr) throw ConfigError(full, "missing key: " + full);
  return convert<T>(*value, full);
}

template <typename T>
void optional(const json& doc, const std::string& key, T& out, const std::string& path = "") {
  const json* value = find_key(doc, key);
  if (value != nullptr) out = convert<T>(*value, path.empty() ? key : path + "." + key);
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, fmt::format("invalid value for key: {} ({})", key, what));
}

}  // namespace

int LineConfig::max_process_time() const {
  int p_max = 0;
  for (const auto& m : machines) p_max = std::max(p_max, m.process_time);
  return p_max;
}

double LineConfig::max_output() const {
  return static_cast<double>(t_sim) / static_cast<double>(max_process_time());
}

void LineConfig::validate() const {
  check(!machines.empty(), "machines", "at least one machine required");
  for (std::size_t j = 0; j < machines.size(); ++j) {
    const auto& m = machines[j];
    const std::string prefix = fmt::format("machines[{}].", j);
    check(m.process_time >= 1, prefix + "p", "must be >= 1");
    check(m.degradation_rate >= 0.0 && m.degradation_rate <= 1.0, prefix + "d", "must lie in [0, 1]");
    check(m.buffer_capacity >= 1, prefix + "b", "must be >= 1");
  }
  check(breakdown_state >= 1, "n", "must be >= 1");
  check(critical_threshold >= 0 && critical_threshold < breakdown_state, "n_c", "must satisfy 0 <= n_c < n");
  check(t_cbm >= 1, "t_cbm", "must be >= 1");
  check(t_cm >= 1, "t_cm", "must be >= 1");
  check(t_idle >= 1, "t_idle", "must be >= 1");
  check(t_sim >= 1, "t_sim", "must be >= 1");
}

void RewardConfig::validate() const {
  check(c_cbm >= 0.0, "c_cbm", "must be >= 0");
  check(c_cm >= 0.0, "c_cm", "must be >= 0");
  check(c_pl >= 0.0, "c_pl", "must be >= 0");
  check(beta > 0.0, "beta", "must be > 0");
}

TrainingConfig TrainingConfig::preset(RewardMode mode) {
  TrainingConfig cfg;
  if (mode == RewardMode::r1) {
    cfg.batch_size = 151;
    cfg.gamma = 0.870;
    cfg.learning_rate = 5.4e-4;
    cfg.target_sync_episodes = 200;
    cfg.epsilon_decay_rate = 4.8e-5;
    cfg.hidden_layers = {17, 11};
  }
  return cfg;
}

void TrainingConfig::validate() const {
  check(episodes >= 0, "training.episodes", "must be >= 0");
  check(batch_size >= 1, "training.batch_size", "must be >= 1");
  check(gamma > 0.0 && gamma <= 1.0, "training.gamma", "must satisfy 0 < gamma <= 1");
  check(learning_rate > 0.0, "training.lr", "must be > 0");
  check(target_sync_episodes >= 1, "training.target_sync_episodes", "must be >= 1");
  check(epsilon_min > 0.0 && epsilon_min <= epsilon_start && epsilon_start <= 1.0, "training.epsilon_start",
        "must satisfy 0 < epsilon_min <= epsilon_start <= 1");
  check(epsilon_decay_rate >= 0.0 && epsilon_decay_rate < 1.0, "training.epsilon_decay_rate", "must lie in [0, 1)");
  check(smoothing_window >= 1, "training.smoothing_window", "must be >= 1");
  check(replay_capacity >= batch_size, "training.replay_capacity", "must be >= batch_size");
  check(!hidden_layers.empty(), "training.hidden_layers", "at least one hidden layer required");
  for (int h : hidden_layers) check(h >= 1, "training.hidden_layers", "layer sizes must be >= 1");
  check(grad_clip_norm >= 0.0, "training.grad_clip_norm", "must be >= 0");
  check(lr_decay > 0.0 && lr_decay <= 1.0, "training.lr_decay", "must lie in (0, 1]");
}

std::string to_string(RewardMode mode) { return mode == RewardMode::r1 ? "R1" : "R2"; }

RewardMode reward_mode_from_string(const std::string& text) {
  if (text == "R1" || text == "r1") return RewardMode::r1;
  if (text == "R2" || text == "r2") return RewardMode::r2;
  throw ConfigError("reward_mode", "invalid value for key: reward_mode (expected R1 or R2)");
}

LineConfig parse_line_config(const json& doc) {
  LineConfig line;
  const json* machines = find_key(doc, "machines");
  if (machines == nullptr) throw ConfigError("machines", "missing key: machines");
  if (!machines->is_array()) throw ConfigError("machines", "invalid value for key: machines");
  for (std::size_t j = 0; j < machines->size(); ++j) {
    const json& m = (*machines)[j];
    const std::string path = fmt::format("machines[{}]", j);
    MachineConfig mc;
    mc.process_time = required<int>(m, "p", path);
    mc.degradation_rate = required<double>(m, "d", path);
    mc.buffer_capacity = required<int>(m, "b", path);
    line.machines.push_back(mc);
  }
  line.breakdown_state = required<int>(doc, "n");
  line.critical_threshold = required<int>(doc, "n_c");
  line.t_cbm = required<int>(doc, "t_cbm");
  line.t_cm = required<int>(doc, "t_cm");
  line.t_idle = required<int>(doc, "t_idle");
  line.t_sim = required<int>(doc, "t_sim");
  line.seed = required<std::uint64_t>(doc, "seed");
  line.validate();
  return line;
}

RewardConfig parse_reward_config(const json& doc) {
  RewardConfig reward;
  optional(doc, "c_cbm", reward.c_cbm);
  optional(doc, "c_cm", reward.c_cm);
  optional(doc, "c_pl", reward.c_pl);
  optional(doc, "beta", reward.beta);
  optional(doc, "verbatim_sum", reward.verbatim_sum);
  if (const json* mode = find_key(doc, "reward_mode")) {
    reward.mode = reward_mode_from_string(convert<std::string>(*mode, "reward_mode"));
  }
  reward.validate();
  return reward;
}

TrainingConfig parse_training_config(const json& doc, RewardMode mode) {
  TrainingConfig cfg = TrainingConfig::preset(mode);
  const json* section = find_key(doc, "training");
  if (section == nullptr) return cfg;
  if (!section->is_object()) throw ConfigError("training", "invalid value for key: training");
  const json& t = *section;
  const std::string p = "training";
  optional(t, "episodes", cfg.episodes, p);
  optional(t, "batch_size", cfg.batch_size, p);
  optional(t, "gamma", cfg.gamma, p);
  optional(t, "lr", cfg.learning_rate, p);
  optional(t, "target_sync_episodes", cfg.target_sync_episodes, p);
  optional(t, "epsilon_start", cfg.epsilon_start, p);
  optional(t, "epsilon_min", cfg.epsilon_min, p);
  optional(t, "epsilon_decay_rate", cfg.epsilon_decay_rate, p);
  optional(t, "smoothing_window", cfg.smoothing_window, p);
  optional(t, "replay_capacity", cfg.replay_capacity, p);
  optional(t, "grad_clip_norm", cfg.grad_clip_norm, p);
  optional(t, "lr_decay", cfg.lr_decay, p);
  if (const json* g = find_key(t, "decay_granularity")) {
    const auto text = convert<std::string>(*g, "training.decay_granularity");
    if (text == "per_episode") {
      cfg.decay_granularity = DecayGranularity::per_episode;
    } else if (text == "per_step") {
      cfg.decay_granularity = DecayGranularity::per_step;
    } else {
      throw ConfigError("training.decay_granularity", "invalid value for key: training.decay_granularity");
    }
  }
  if (const json* h = find_key(t, "hidden_layers")) {
    if (!h->is_array()) throw ConfigError("training.hidden_layers", "invalid value for key: training.hidden_layers");
    cfg.hidden_layers.clear();
    for (const auto& v : *h) cfg.hidden_layers.push_back(convert<int>(v, "training.hidden_layers"));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig config;
  config.line = parse_line_config(doc);
  config.reward = parse_reward_config(doc);
  config.training = parse_training_config(doc, config.reward.mode);
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", fmt::format("malformed JSON in {}: {}", path.string(), e.what()));
  }
  return parse_experiment_config(doc);
}

json to_json(const LineConfig& line) {
  json machines = json::array();
  for (const auto& m : line.machines) {
    machines.push_back({{"p", m.process_time}, {"d", m.degradation_rate}, {"b", m.buffer_capacity}});
  }
  return {{"machines", machines}, {"n", line.breakdown_state}, {"n_c", line.critical_threshold},
          {"t_cbm", line.t_cbm},  {"t_cm", line.t_cm},         {"t_idle", line.t_idle},
          {"t_sim", line.t_sim},  {"seed", line.seed}};
}

json to_json(const ExperimentConfig& config) {
  json doc = to_json(config.line);
  const auto& r = config.reward;
  doc["c_cbm"] = r.c_cbm;
  doc["c_cm"] = r.c_cm;
  doc["c_pl"] = r.c_pl;
  doc["beta"] = r.beta;
  doc["reward_mode"] = to_string(r.mode);
  doc["verbatim_sum"] = r.verbatim_sum;
  const auto& t = config.training;
  doc["training"] = {
      {"episodes", t.episodes},
      {"batch_size", t.batch_size},
      {"gamma", t.gamma},
      {"lr", t.learning_rate},
      {"target_sync_episodes", t.target_sync_episodes},
      {"epsilon_start", t.epsilon_start},
      {"epsilon_min", t.epsilon_min},
      {"epsilon_decay_rate", t.epsilon_decay_rate},
      {"decay_granularity", t.decay_granularity == DecayGranularity::per_step ? "per_step" : "per_episode"},
      {"smoothing_window", t.smoothing_window},
      {"replay_capacity", t.replay_capacity},
      {"hidden_layers", t.hidden_layers},
      {"grad_clip_norm", t.grad_clip_norm},
      {"lr_decay", t.lr_decay},
  };
  return doc;
}

}  // namespace flowline
