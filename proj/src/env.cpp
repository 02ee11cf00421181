#include "flowline/env.hpp"

#include <stdexcept>
#include <string>

namespace flowline {

Observation observe(const LineConfig& line, const SimState& state) {
  const std::size_t count = state.machines.size();
  Observation obs;
  obs.values.resize(2 * count);
  const double n = static_cast<double>(line.breakdown_state);
  for (std::size_t j = 0; j < count; ++j) {
    obs.values[j] = static_cast<double>(state.machines[j].condition) / n;
    obs.values[count + j] =
        static_cast<double>(state.buffer_levels[j]) / static_cast<double>(line.machines[j].buffer_capacity);
  }
  return obs;
}

double reward_r1(std::int64_t parts_before, std::int64_t parts_after) {
  return static_cast<double>(parts_after - parts_before);
}

double reward_r2(Scenario scenario, MaintenanceKind kind, int elapsed, const RewardConfig& cfg) {
  switch (scenario) {
    case Scenario::a:
      return 0.0;
    case Scenario::b:
      return -(cfg.beta * cfg.c_cbm);
    case Scenario::c: {
      if (elapsed < 1) throw std::invalid_argument("scenario C reward needs elapsed >= 1");
      double cost = 0.0;
      if (cfg.verbatim_sum) {
        cost = cfg.c_cbm + cfg.c_cm;
      } else {
        cost = kind == MaintenanceKind::cm ? cfg.c_cm : cfg.c_cbm;
      }
      return -(cost + cfg.c_pl / static_cast<double>(elapsed));
    }
  }
  return 0.0;
}

Environment::Environment(LineConfig line, RewardConfig reward) : line_(std::move(line)), reward_(reward) {
  line_.validate();
  reward_.validate();
}

const Observation& Environment::reset() { return reset(line_.seed); }

const Observation& Environment::reset(std::uint64_t seed) {
  state_ = init_line(line_, seed);
  advance_until_decision(line_, state_, 0);
  terminal_ = state_.clock >= line_.t_sim;
  obs_ = observe(line_, state_);
  return obs_;
}

const Observation& Environment::restore(SimState state) {
  state_ = std::move(state);
  terminal_ = state_.clock >= line_.t_sim;
  obs_ = observe(line_, state_);
  return obs_;
}

Transition Environment::step(Action action) {
  if (terminal_) throw std::logic_error("step called on a terminal episode");
  if (action.code < 0 || action.code > line_.machine_count()) {
    throw std::out_of_range("action " + std::to_string(action.code) + " outside {0.." +
                            std::to_string(line_.machine_count()) + "}");
  }

  Transition tr;
  tr.obs = obs_;
  tr.action = action;
  tr.info.clock_at_action = state_.clock;
  const std::int64_t parts_before = state_.produced_parts;

  int duration = line_.t_idle;
  if (!action.is_idle()) {
    const int j = action.machine_index();
    tr.info.machine = j;
    tr.info.condition_at_action = state_.machines[static_cast<std::size_t>(j)].condition;
    tr.info.kind = apply_maintenance(line_, state_, j);
    duration = tr.info.kind == MaintenanceKind::cm ? line_.t_cm : line_.t_cbm;
  }

  tr.elapsed = advance_until_decision(line_, state_, duration);
  terminal_ = state_.clock >= line_.t_sim;
  obs_ = observe(line_, state_);

  for (const auto& m : state_.machines) {
    if (m.condition >= line_.breakdown_state) tr.info.breakdown_present = true;
  }
  if (action.is_idle()) {
    tr.info.scenario = tr.info.breakdown_present ? Scenario::b : Scenario::a;
  } else {
    tr.info.scenario = Scenario::c;
  }
  tr.info.parts_produced = state_.produced_parts - parts_before;
  tr.reward = reward_.mode == RewardMode::r1 ? reward_r1(parts_before, state_.produced_parts)
                                             : reward_r2(tr.info.scenario, tr.info.kind, tr.elapsed, reward_);
  tr.next_obs = obs_;
  tr.terminal = terminal_;
  return tr;
}

}  // namespace flowline
