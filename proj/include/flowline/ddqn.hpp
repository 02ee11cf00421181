#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "flowline/config.hpp"
#include "flowline/env.hpp"
#include "flowline/mlp.hpp"
#include "flowline/rng.hpp"

namespace flowline {

/// Fixed-capacity ring of transitions, oldest evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

  /// `count` distinct indices drawn uniformly (Floyd's algorithm).
  /// Throws std::invalid_argument if count > size().
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

/// r if terminal, else r + gamma * Q(s', argmax_a Q(s', a; online); target).
double ddqn_target(double reward, std::span<const double> next_obs, const Mlp& online, const Mlp& target,
                   double gamma, bool terminal);

/// Batched ddqn_target; next_inputs holds one next observation per column.
std::vector<double> ddqn_targets(std::span<const double> rewards, const Eigen::MatrixXd& next_inputs,
                                 std::span<const char> terminals, const Mlp& online, const Mlp& target,
                                 double gamma);

/// Uniform random action with probability epsilon, otherwise greedy with
/// lowest-index tie-break. Draws exactly one uniform for the coin and, when
/// exploring, one more for the action.
Action select_action(const Eigen::VectorXd& q_values, double epsilon, Rng& rng);

struct EpisodeRecord {
  int episode = 0;
  double reward = 0.0;
  std::int64_t produced_parts = 0;
  double maintenance_cost = 0.0;
  int decisions = 0;
  double epsilon = 0.0;
  double smoothed_reward = 0.0;
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
};

struct TrainingResult {
  Mlp best_params;
  Mlp final_params;
  TrainingLog log;
  double best_smoothed_reward = 0.0;
  int best_episode = -1;  // -1 when no episode ran
};

using EpisodeCallback = std::function<void(const EpisodeRecord&)>;

/// Network shape for a line: [2i, hidden..., i+1].
std::vector<int> network_shape(const LineConfig& line, const TrainingConfig& cfg);

/// Training episode k runs on simulator seed `seed + k`; the learner's own
/// randomness (initial weights, exploration, replay sampling) is derived from
/// `seed` as well, so one seed fixes the whole run.
TrainingResult train(const LineConfig& line, const RewardConfig& reward, const TrainingConfig& cfg,
                     std::uint64_t seed, const EpisodeCallback& on_episode = {});

/// `episode,reward,produced_parts,maintenance_cost,decisions,epsilon,smoothed_reward`
void write_training_csv(const TrainingLog& log, const std::filesystem::path& path);

}  // namespace flowline
