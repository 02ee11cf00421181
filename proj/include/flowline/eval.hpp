#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowline/config.hpp"
#include "flowline/env.hpp"
#include "flowline/policy.hpp"

namespace flowline {

struct CbmRecord {
  int machine = 0;    // 0-based
  int condition = 0;  // cs when the CBM started
};

struct CmEvent {
  int machine = 0;  // 0-based
  int clock = 0;    // simulation step at which the CM started

  friend bool operator==(const CmEvent&, const CmEvent&) = default;
};

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  std::int64_t produced_parts = 0;
  double maintenance_cost = 0.0;
  double total_reward = 0.0;
  int cbm_count = 0;
  int cm_count = 0;
  int idle_count = 0;
  std::vector<int> per_machine_cbm;
  std::vector<CbmRecord> cbm_conditions;
  std::vector<CmEvent> cm_events;
};

/// Plays one episode to t_sim on the given seed.
EpisodeMetrics run_episode(Policy& policy, Environment& env, std::uint64_t seed);

/// Episode k uses seed base_seed + k. Results are independent of `workers`.
std::vector<EpisodeMetrics> run_episodes(const Policy& policy, const LineConfig& line, const RewardConfig& reward,
                                         int n_episodes, std::uint64_t base_seed, int workers = 1);

/// mean_parts / (t_sim / p_max).
double production_rate(double mean_parts, const LineConfig& line);

struct PolicySummary {
  std::string policy;
  int episodes = 0;
  double mean_parts = 0.0;
  double mean_cost = 0.0;
  double mean_reward = 0.0;
  double production_rate = 0.0;
  double mean_cbm = 0.0;
  double mean_cm = 0.0;
  double mean_idle = 0.0;
  std::vector<double> mean_cbm_per_machine;
};

/// Throws std::invalid_argument on an empty list.
PolicySummary summarize(const std::string& policy, const std::vector<EpisodeMetrics>& metrics, const LineConfig& line);

/// Mean condition at CBM per machine; nullopt for machines never maintained by CBM.
std::vector<std::optional<double>> condition_at_cbm_stats(const std::vector<EpisodeMetrics>& metrics,
                                                          int machine_count);

/// CM events of one episode sorted by clock. Throws std::out_of_range.
std::vector<CmEvent> cm_timeline(const std::vector<EpisodeMetrics>& metrics, std::size_t episode);

/// Mean number of CM events per episode starting at or after 0.75 * t_sim.
double final_quartile_cm(const std::vector<EpisodeMetrics>& metrics, const LineConfig& line);

/// `episode,policy,parts,cost,cbm,cm,idle`
void write_episode_csv(const std::string& policy, const std::vector<EpisodeMetrics>& metrics,
                       const std::filesystem::path& path);
/// `policy,machine,cbm_count_mean,cbm_condition_mean` (machine is 1-based)
void write_machine_csv(const std::string& policy, const std::vector<EpisodeMetrics>& metrics, int machine_count,
                       const std::filesystem::path& path);
/// `episode,policy,machine,clock` (machine is 1-based)
void write_cm_timeline_csv(const std::string& policy, const std::vector<EpisodeMetrics>& metrics,
                           const std::filesystem::path& path);

}  // namespace flowline
