#include "flowline/baselines.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "flowline/eval.hpp"

namespace flowline {

void FifoQueue::update(const SimState& state, int threshold) {
  std::erase_if(entries_, [&](const Entry& e) {
    return state.machines[static_cast<std::size_t>(e.machine)].condition <= threshold;
  });
  for (std::size_t j = 0; j < state.machines.size(); ++j) {
    const auto& m = state.machines[j];
    const int machine = static_cast<int>(j);
    if (m.condition <= threshold || contains(machine)) continue;
    const Entry entry{m.reached_at[static_cast<std::size_t>(threshold) + 1], machine};
    entries_.insert(std::upper_bound(entries_.begin(), entries_.end(), entry), entry);
  }
}

std::optional<int> FifoQueue::pop() {
  if (entries_.empty()) return std::nullopt;
  const int head = entries_.front().machine;
  entries_.erase(entries_.begin());
  return head;
}

bool FifoQueue::contains(int machine) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.machine == machine; });
}

std::vector<int> FifoQueue::order() const {
  std::vector<int> out;
  for (const auto& e : entries_) out.push_back(e.machine);
  return out;
}

std::string FifoPolicy::name() const { return fmt::format("fifo:{}", threshold_); }

Action FifoPolicy::act(const Environment& env) {
  queue_.update(env.state(), threshold_);
  if (auto head = queue_.pop()) return Action::maintain(*head);
  return Action::idle();
}

Action random_action(Rng& rng, int machine_count) {
  return Action{static_cast<int>(rng.below(static_cast<std::uint64_t>(machine_count) + 1))};
}

Action RandomPolicy::act(const Environment& env) { return random_action(rng_, env.line().machine_count()); }

SweepResult sweep_threshold(const LineConfig& line, const RewardConfig& reward, int episodes_per_value,
                            std::uint64_t base_seed, int workers) {
  if (episodes_per_value < 1) throw std::invalid_argument("sweep needs at least one episode per threshold");
  SweepResult result;
  for (int threshold = 0; threshold <= line.breakdown_state; ++threshold) {
    const auto metrics = run_episodes(FifoPolicy(threshold), line, reward, episodes_per_value, base_seed, workers);
    const auto summary = summarize("fifo", metrics, line);
    result.rows.push_back({threshold, summary.mean_parts, summary.mean_cost, summary.mean_cbm, summary.mean_cm});
  }
  for (const auto& row : result.rows) {
    if (row.mean_parts > result.rows[static_cast<std::size_t>(result.best_max_parts)].mean_parts) {
      result.best_max_parts = row.threshold;
    }
    if (row.mean_cost < result.rows[static_cast<std::size_t>(result.best_min_cost)].mean_cost) {
      result.best_min_cost = row.threshold;
    }
  }
  return result;
}

void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "threshold,mean_parts,mean_cost,mean_cbm,mean_cm\n";
  for (const auto& r : sweep.rows) {
    out << fmt::format("{},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.threshold, r.mean_parts, r.mean_cost, r.mean_cbm,
                       r.mean_cm);
  }
}

}  // namespace flowline
