#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "flowline/policy.hpp"
#include "flowline/rng.hpp"
#include "flowline/sim.hpp"

namespace flowline {

/// Maintenance requests ordered by the clock at which each machine's
/// condition first exceeded the threshold; ties go to the lower index.
class FifoQueue {
 public:
  /// Enqueues machines that crossed `threshold` since they were last
  /// maintained and drops members whose condition fell back to or below it.
  void update(const SimState& state, int threshold);
  std::optional<int> pop();

  bool empty() const { return entries_.empty(); }
  bool contains(int machine) const;
  std::vector<int> order() const;
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    int crossed_at;
    int machine;
    auto operator<=>(const Entry&) const = default;
  };
  std::vector<Entry> entries_;
};

/// Maintains the head of the FIFO queue, idles while the queue is empty.
class FifoPolicy : public Policy {
 public:
  explicit FifoPolicy(int threshold) : threshold_(threshold) {}

  std::string name() const override;
  void begin_episode(std::uint64_t) override { queue_.clear(); }
  Action act(const Environment& env) override;
  std::unique_ptr<Policy> clone() const override { return std::make_unique<FifoPolicy>(threshold_); }

  int threshold() const { return threshold_; }
  const FifoQueue& queue() const { return queue_; }

 private:
  int threshold_;
  FifoQueue queue_;
};

/// Uniform over {0..i}; reseeded from the episode seed.
class RandomPolicy : public Policy {
 public:
  std::string name() const override { return "random"; }
  void begin_episode(std::uint64_t episode_seed) override { rng_ = Rng(episode_seed ^ 0x5eed5eed5eed5eedULL); }
  Action act(const Environment& env) override;
  std::unique_ptr<Policy> clone() const override { return std::make_unique<RandomPolicy>(*this); }

 private:
  Rng rng_{0};
};

Action random_action(Rng& rng, int machine_count);

enum class SweepCriterion { max_parts, min_cost };

struct SweepRow {
  int threshold = 0;
  double mean_parts = 0.0;
  double mean_cost = 0.0;
  double mean_cbm = 0.0;
  double mean_cm = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // thresholds 0..n
  int best_max_parts = 0;
  int best_min_cost = 0;

  int best(SweepCriterion criterion) const {
    return criterion == SweepCriterion::max_parts ? best_max_parts : best_min_cost;
  }
};

/// Evaluates FIFO for every threshold 0..n on the same seeds. Ties resolve
/// to the lowest threshold.
SweepResult sweep_threshold(const LineConfig& line, const RewardConfig& reward, int episodes_per_value,
                            std::uint64_t base_seed, int workers = 1);

/// `threshold,mean_parts,mean_cost,mean_cbm,mean_cm`
void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path);

}  // namespace flowline
