#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace flowline {

/// Raised for missing, mistyped or out-of-range configuration values.
/// `key()` names the offending JSON key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

struct MachineConfig {
  int process_time = 1;           // p, steps per part
  double degradation_rate = 0.0;  // d, per operating step
  int buffer_capacity = 1;        // b, upstream buffer
};

struct LineConfig {
  std::vector<MachineConfig> machines;
  int breakdown_state = 10;  // n
  int critical_threshold = 0;  // n_c
  int t_cbm = 5;
  int t_cm = 20;
  int t_idle = 1;
  int t_sim = 400;
  std::uint64_t seed = 0;

  int machine_count() const { return static_cast<int>(machines.size()); }
  int max_process_time() const;
  /// Ideal output t_sim / p_max.
  double max_output() const;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

enum class RewardMode { r1, r2 };

struct RewardConfig {
  double c_cbm = 0.5;
  double c_cm = 1.5;
  double c_pl = 0.1;
  double beta = 10.0;
  RewardMode mode = RewardMode::r2;
  // charge c_cbm + c_cm on every maintenance action instead of the cost of
  // the kind actually performed
  bool verbatim_sum = false;

  void validate() const;
};

enum class DecayGranularity { per_episode, per_step };

struct TrainingConfig {
  int episodes = 3000;
  int batch_size = 137;
  double gamma = 0.993;
  double learning_rate = 3.6e-4;
  int target_sync_episodes = 98;
  double epsilon_start = 1.0;
  double epsilon_min = 0.1;
  double epsilon_decay_rate = 2.9e-5;
  DecayGranularity decay_granularity = DecayGranularity::per_step;
  int smoothing_window = 100;
  int replay_capacity = 100000;
  std::vector<int> hidden_layers{14, 18};
  double grad_clip_norm = 0.0;  // 0 disables clipping
  double lr_decay = 1.0;        // multiplicative per episode; 1 keeps lr constant

  /// Tuned settings for each reward design.
  static TrainingConfig preset(RewardMode mode);

  void validate() const;
};

/// Everything one run needs: the line, its reward and the learner settings.
struct ExperimentConfig {
  LineConfig line;
  RewardConfig reward;
  TrainingConfig training;
};

std::string to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& text);

LineConfig parse_line_config(const nlohmann::json& doc);
RewardConfig parse_reward_config(const nlohmann::json& doc);
/// Reads the optional `training` object; unset keys fall back to the preset
/// for `mode`.
TrainingConfig parse_training_config(const nlohmann::json& doc, RewardMode mode);
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::json to_json(const LineConfig& line);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace flowline
