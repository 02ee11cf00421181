#include "flowline/sim.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace flowline {

namespace {

MachineStatus resume_status(const MachineState& m) {
  if (!m.holds_part) return MachineStatus::starved;
  return m.work_remaining > 0 ? MachineStatus::processing : MachineStatus::blocked;
}

// Hands a finished part to the next buffer, or to the sink after the last machine.
bool push_downstream(const LineConfig& line, SimState& state, std::size_t j) {
  if (j + 1 == state.machines.size()) {
    ++state.produced_parts;
    return true;
  }
  int& level = state.buffer_levels[j + 1];
  if (level >= line.machines[j + 1].buffer_capacity) return false;
  ++level;
  return true;
}

bool pull_upstream(SimState& state, std::size_t j) {
  if (j == 0) {
    ++state.source_pulls;
    return true;
  }
  int& level = state.buffer_levels[j];
  if (level == 0) return false;
  --level;
  return true;
}

void complete_maintenance(SimState& state) {
  auto& m = state.machines[static_cast<std::size_t>(state.maintained_machine)];
  m.condition = 0;
  std::fill(m.reached_at.begin(), m.reached_at.end(), -1);
  m.reached_at[0] = state.clock;
  m.status = resume_status(m);
  state.resource_busy_until.reset();
  state.maintained_machine = -1;
}

}  // namespace

std::string_view to_string(MachineStatus status) {
  switch (status) {
    case MachineStatus::starved: return "starved";
    case MachineStatus::processing: return "processing";
    case MachineStatus::blocked: return "blocked";
    case MachineStatus::broken: return "broken";
    case MachineStatus::under_maintenance: return "under_maintenance";
  }
  return "?";
}

std::string_view to_string(MaintenanceKind kind) {
  switch (kind) {
    case MaintenanceKind::none: return "none";
    case MaintenanceKind::cbm: return "CBM";
    case MaintenanceKind::cm: return "CM";
  }
  return "?";
}

std::int64_t SimState::parts_in_machines() const {
  std::int64_t held = 0;
  for (const auto& m : machines) held += m.holds_part ? 1 : 0;
  return held;
}

std::int64_t SimState::parts_in_buffers() const {
  std::int64_t total = 0;
  for (int level : buffer_levels) total += level;
  return total;
}

SimState init_line(const LineConfig& line) { return init_line(line, line.seed); }

SimState init_line(const LineConfig& line, std::uint64_t seed) {
  line.validate();
  SimState state;
  state.rng = Rng(seed);
  state.machines.resize(line.machines.size());
  for (auto& m : state.machines) {
    m.reached_at.assign(static_cast<std::size_t>(line.breakdown_state) + 1, -1);
    m.reached_at[0] = 0;
  }
  state.buffer_levels.assign(line.machines.size(), 0);
  return state;
}

int degrade_step(int condition, double rate, int breakdown_state, Rng& rng) {
  const bool advance = rng.bernoulli(rate);
  if (condition >= breakdown_state) return breakdown_state;
  return advance ? condition + 1 : condition;
}

std::vector<int> flow_parts(const LineConfig& line, SimState& state) {
  std::vector<int> operated;
  for (std::size_t j = 0; j < state.machines.size(); ++j) {
    auto& m = state.machines[j];
    if (m.status == MachineStatus::broken || m.status == MachineStatus::under_maintenance) continue;

    if (m.holds_part && m.work_remaining == 0) {
      if (!push_downstream(line, state, j)) {
        m.status = MachineStatus::blocked;
        continue;
      }
      m.holds_part = false;
    }
    if (!m.holds_part) {
      if (!pull_upstream(state, j)) {
        m.status = MachineStatus::starved;
        continue;
      }
      m.holds_part = true;
      m.work_remaining = line.machines[j].process_time;
    }

    --m.work_remaining;
    m.status = MachineStatus::processing;
    operated.push_back(static_cast<int>(j));

    if (m.work_remaining == 0) {
      if (push_downstream(line, state, j)) {
        m.holds_part = false;
        m.status = MachineStatus::starved;
      } else {
        m.status = MachineStatus::blocked;
      }
    }
  }
  return operated;
}

void finish_tick(const LineConfig& line, SimState& state, std::span<const int> degraded) {
  const int next_clock = state.clock + 1;
  for (int j : degraded) {
    auto& m = state.machines[static_cast<std::size_t>(j)];
    if (m.condition >= line.breakdown_state) continue;
    ++m.condition;
    m.reached_at[static_cast<std::size_t>(m.condition)] = next_clock;
    if (m.condition == line.breakdown_state) m.status = MachineStatus::broken;
  }
  state.clock = next_clock;
  if (state.resource_busy_until && *state.resource_busy_until <= state.clock) complete_maintenance(state);
}

void part_flow_tick(const LineConfig& line, SimState& state) {
  std::vector<int> operated = flow_parts(line, state);
  std::vector<int> degraded;
  for (int j : operated) {
    const auto& m = state.machines[static_cast<std::size_t>(j)];
    const int next = degrade_step(m.condition, line.machines[static_cast<std::size_t>(j)].degradation_rate,
                                  line.breakdown_state, state.rng);
    if (next != m.condition) degraded.push_back(j);
  }
  finish_tick(line, state, degraded);
}

MaintenanceKind apply_maintenance(const LineConfig& line, SimState& state, int machine) {
  if (machine < 0 || machine >= static_cast<int>(state.machines.size())) {
    throw std::out_of_range("maintenance requested for unknown machine " + std::to_string(machine));
  }
  if (!state.resource_free()) {
    throw std::logic_error("maintenance requested while the maintenance resource is busy");
  }
  auto& m = state.machines[static_cast<std::size_t>(machine)];
  const MaintenanceKind kind = m.condition >= line.breakdown_state ? MaintenanceKind::cm : MaintenanceKind::cbm;
  m.status = MachineStatus::under_maintenance;
  state.resource_busy_until = state.clock + (kind == MaintenanceKind::cm ? line.t_cm : line.t_cbm);
  state.maintained_machine = machine;
  return kind;
}

bool at_decision_point(const LineConfig& line, const SimState& state) {
  if (!state.resource_free()) return false;
  for (const auto& m : state.machines) {
    if (m.condition > line.critical_threshold) return true;
  }
  return false;
}

int advance_until_decision(const LineConfig& line, SimState& state, int duration, const TickObserver& observer) {
  const int start = state.clock;
  const int target = start + duration;
  while (state.clock < line.t_sim) {
    if (state.clock >= target && at_decision_point(line, state)) break;
    part_flow_tick(line, state);
    if (observer) observer(state);
  }
  return state.clock - start;
}

}  // namespace flowline
