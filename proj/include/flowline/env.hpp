#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowline/config.hpp"
#include "flowline/sim.hpp"

namespace flowline {

/// Network input: [cs_1/n .. cs_i/n, level_1/b_1 .. level_i/b_i].
struct Observation {
  std::vector<double> values;

  int machine_count() const { return static_cast<int>(values.size() / 2); }
  std::span<const double> conditions() const { return std::span(values).first(values.size() / 2); }
  std::span<const double> buffers() const { return std::span(values).subspan(values.size() / 2); }

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// 0 = idle, j >= 1 = maintain machine j (1-based).
struct Action {
  int code = 0;

  static constexpr Action idle() { return Action{0}; }
  static constexpr Action maintain(int machine_index) { return Action{machine_index + 1}; }
  bool is_idle() const { return code == 0; }
  int machine_index() const { return code - 1; }

  friend bool operator==(const Action&, const Action&) = default;
};

enum class Scenario { a, b, c };

struct TransitionInfo {
  MaintenanceKind kind = MaintenanceKind::none;
  int machine = -1;               // 0-based machine index, -1 for idle
  int condition_at_action = -1;   // cs of the maintained machine when maintenance started
  int clock_at_action = 0;
  std::int64_t parts_produced = 0;  // during this transition
  Scenario scenario = Scenario::a;
  bool breakdown_present = false;  // some machine at cs = n at the next decision point
};

struct Transition {
  Observation obs;
  Action action;
  double reward = 0.0;
  Observation next_obs;
  bool terminal = false;
  int elapsed = 0;
  TransitionInfo info;
};

Observation observe(const LineConfig& line, const SimState& state);

double reward_r1(std::int64_t parts_before, std::int64_t parts_after);

/// Scenario A: idle, no breakdown. B: idle with a breakdown. C: maintenance,
/// charged the cost of `kind` plus the production-loss term c_pl / elapsed.
/// Throws std::invalid_argument for scenario C with elapsed < 1.
double reward_r2(Scenario scenario, MaintenanceKind kind, int elapsed, const RewardConfig& cfg);

/// Episodic MDP over the simulator; one step spans decision point to decision point.
class Environment {
 public:
  Environment(LineConfig line, RewardConfig reward);

  /// Starts an episode seeded with the line config's seed.
  const Observation& reset();
  const Observation& reset(std::uint64_t seed);
  /// Continues an episode from an arbitrary simulator state.
  const Observation& restore(SimState state);

  /// Throws std::logic_error on a terminal episode, std::out_of_range for an
  /// action outside {0..i}.
  Transition step(Action action);

  bool terminal() const { return terminal_; }
  int action_count() const { return line_.machine_count() + 1; }
  int observation_size() const { return 2 * line_.machine_count(); }
  const Observation& observation() const { return obs_; }
  const SimState& state() const { return state_; }
  const LineConfig& line() const { return line_; }
  const RewardConfig& reward_config() const { return reward_; }

 private:
  LineConfig line_;
  RewardConfig reward_;
  SimState state_;
  Observation obs_;
  bool terminal_ = true;
};

}  // namespace flowline
