#include "flowline/eval.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace flowline {

EpisodeMetrics run_episode(Policy& policy, Environment& env, std::uint64_t seed) {
  EpisodeMetrics metrics;
  metrics.seed = seed;
  metrics.per_machine_cbm.assign(static_cast<std::size_t>(env.line().machine_count()), 0);
  env.reset(seed);
  policy.begin_episode(seed);
  while (!env.terminal()) {
    const Transition tr = env.step(policy.act(env));
    metrics.total_reward += tr.reward;
    switch (tr.info.kind) {
      case MaintenanceKind::none:
        ++metrics.idle_count;
        break;
      case MaintenanceKind::cbm:
        ++metrics.cbm_count;
        ++metrics.per_machine_cbm[static_cast<std::size_t>(tr.info.machine)];
        metrics.cbm_conditions.push_back({tr.info.machine, tr.info.condition_at_action});
        break;
      case MaintenanceKind::cm:
        ++metrics.cm_count;
        metrics.cm_events.push_back({tr.info.machine, tr.info.clock_at_action});
        break;
    }
  }
  const auto& reward = env.reward_config();
  metrics.produced_parts = env.state().produced_parts;
  metrics.maintenance_cost = reward.c_cbm * metrics.cbm_count + reward.c_cm * metrics.cm_count;
  return metrics;
}

std::vector<EpisodeMetrics> run_episodes(const Policy& policy, const LineConfig& line, const RewardConfig& reward,
                                         int n_episodes, std::uint64_t base_seed, int workers) {
  std::vector<EpisodeMetrics> results(static_cast<std::size_t>(std::max(n_episodes, 0)));
  if (results.empty()) return results;
  const int pool = std::clamp(workers, 1, n_episodes);

  auto work = [&](int worker) {
    auto local = policy.clone();
    Environment env(line, reward);
    for (int k = worker; k < n_episodes; k += pool) {
      results[static_cast<std::size_t>(k)] = run_episode(*local, env, base_seed + static_cast<std::uint64_t>(k));
    }
  };
  if (pool == 1) {
    work(0);
    return results;
  }
  std::vector<std::jthread> threads;
  for (int w = 0; w < pool; ++w) threads.emplace_back(work, w);
  threads.clear();
  return results;
}

double production_rate(double mean_parts, const LineConfig& line) { return mean_parts / line.max_output(); }

PolicySummary summarize(const std::string& policy, const std::vector<EpisodeMetrics>& metrics,
                        const LineConfig& line) {
  if (metrics.empty()) throw std::invalid_argument("cannot summarize an empty episode list");
  PolicySummary s;
  s.policy = policy;
  s.episodes = static_cast<int>(metrics.size());
  s.mean_cbm_per_machine.assign(static_cast<std::size_t>(line.machine_count()), 0.0);
  for (const auto& m : metrics) {
    s.mean_parts += static_cast<double>(m.produced_parts);
    s.mean_cost += m.maintenance_cost;
    s.mean_reward += m.total_reward;
    s.mean_cbm += m.cbm_count;
    s.mean_cm += m.cm_count;
    s.mean_idle += m.idle_count;
    for (std::size_t j = 0; j < m.per_machine_cbm.size(); ++j) s.mean_cbm_per_machine[j] += m.per_machine_cbm[j];
  }
  const double count = static_cast<double>(metrics.size());
  s.mean_parts /= count;
  s.mean_cost /= count;
  s.mean_reward /= count;
  s.mean_cbm /= count;
  s.mean_cm /= count;
  s.mean_idle /= count;
  for (auto& v : s.mean_cbm_per_machine) v /= count;
  s.production_rate = production_rate(s.mean_parts, line);
  return s;
}

std::vector<std::optional<double>> condition_at_cbm_stats(const std::vector<EpisodeMetrics>& metrics,
                                                          int machine_count) {
  std::vector<double> sum(static_cast<std::size_t>(machine_count), 0.0);
  std::vector<int> count(static_cast<std::size_t>(machine_count), 0);
  for (const auto& m : metrics) {
    for (const auto& rec : m.cbm_conditions) {
      sum[static_cast<std::size_t>(rec.machine)] += rec.condition;
      ++count[static_cast<std::size_t>(rec.machine)];
    }
  }
  std::vector<std::optional<double>> means(static_cast<std::size_t>(machine_count));
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (count[j] > 0) means[j] = sum[j] / count[j];
  }
  return means;
}

std::vector<CmEvent> cm_timeline(const std::vector<EpisodeMetrics>& metrics, std::size_t episode) {
  if (episode >= metrics.size()) {
    throw std::out_of_range(fmt::format("episode {} out of range ({} episodes)", episode, metrics.size()));
  }
  auto events = metrics[episode].cm_events;
  std::stable_sort(events.begin(), events.end(), [](const CmEvent& a, const CmEvent& b) { return a.clock < b.clock; });
  return events;
}

double final_quartile_cm(const std::vector<EpisodeMetrics>& metrics, const LineConfig& line) {
  if (metrics.empty()) return 0.0;
  const double start = 0.75 * line.t_sim;
  double total = 0.0;
  for (const auto& m : metrics) {
    total += static_cast<double>(
        std::count_if(m.cm_events.begin(), m.cm_events.end(), [&](const CmEvent& e) { return e.clock >= start; }));
  }
  return total / static_cast<double>(metrics.size());
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  return out;
}

}  // namespace

void write_episode_csv(const std::string& policy, const std::vector<EpisodeMetrics>& metrics,
                       const std::filesystem::path& path) {
  auto out = open_csv(path, "episode,policy,parts,cost,cbm,cm,idle");
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const auto& m = metrics[k];
    out << fmt::format("{},{},{},{:.4f},{},{},{}\n", k, policy, m.produced_parts, m.maintenance_cost, m.cbm_count,
                       m.cm_count, m.idle_count);
  }
}

void write_machine_csv(const std::string& policy, const std::vector<EpisodeMetrics>& metrics, int machine_count,
                       const std::filesystem::path& path) {
  auto out = open_csv(path, "policy,machine,cbm_count_mean,cbm_condition_mean");
  const auto conditions = condition_at_cbm_stats(metrics, machine_count);
  for (int j = 0; j < machine_count; ++j) {
    double count = 0.0;
    for (const auto& m : metrics) count += m.per_machine_cbm[static_cast<std::size_t>(j)];
    if (!metrics.empty()) count /= static_cast<double>(metrics.size());
    const auto& cond = conditions[static_cast<std::size_t>(j)];
    out << fmt::format("{},{},{:.4f},{}\n", policy, j + 1, count, cond ? fmt::format("{:.4f}", *cond) : "");
  }
}

void write_cm_timeline_csv(const std::string& policy, const std::vector<EpisodeMetrics>& metrics,
                           const std::filesystem::path& path) {
  auto out = open_csv(path, "episode,policy,machine,clock");
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    for (const auto& e : cm_timeline(metrics, k)) out << fmt::format("{},{},{},{}\n", k, policy, e.machine + 1, e.clock);
  }
}

}  // namespace flowline
