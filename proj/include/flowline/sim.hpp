#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "flowline/config.hpp"
#include "flowline/rng.hpp"

namespace flowline {

enum class MachineStatus { starved, processing, blocked, broken, under_maintenance };
enum class MaintenanceKind { none, cbm, cm };

std::string_view to_string(MachineStatus status);
std::string_view to_string(MaintenanceKind kind);

struct MachineState {
  int condition = 0;  // cs in {0..n}
  MachineStatus status = MachineStatus::starved;
  int work_remaining = 0;
  bool holds_part = false;
  // reached_at[k]: clock at which condition k was entered since the last
  // maintenance, -1 if not yet reached
  std::vector<int> reached_at;

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

/// Dynamic state of the line. Copyable; the random stream travels with it.
struct SimState {
  int clock = 0;
  std::vector<MachineState> machines;
  // buffer_levels[j] is the upstream buffer of machine j. Machine 0 draws from
  // an unbounded source, so buffer_levels[0] stays 0.
  std::vector<int> buffer_levels;
  std::int64_t produced_parts = 0;
  std::int64_t source_pulls = 0;
  std::optional<int> resource_busy_until;
  int maintained_machine = -1;
  Rng rng{0};

  bool resource_free() const { return !resource_busy_until.has_value(); }
  /// Parts held by machines, in process or finished and waiting.
  std::int64_t parts_in_machines() const;
  std::int64_t parts_in_buffers() const;

  friend bool operator==(const SimState&, const SimState&) = default;
};

SimState init_line(const LineConfig& line);
SimState init_line(const LineConfig& line, std::uint64_t seed);

/// One step of the degradation chain: cs -> cs + 1 with probability d.
/// The breakdown state n is absorbing.
int degrade_step(int condition, double rate, int breakdown_state, Rng& rng);

/// Moves parts for one step in machine order 0..i-1 and returns the machines
/// that operated (processed their part) during the step.
std::vector<int> flow_parts(const LineConfig& line, SimState& state);

/// Closes a step after flow_parts: raises the condition of every machine in
/// `degraded`, advances the clock, then completes due maintenance.
void finish_tick(const LineConfig& line, SimState& state, std::span<const int> degraded);

/// Full simulation step: flow, one degradation draw per operating machine,
/// clock advance and maintenance completion.
void part_flow_tick(const LineConfig& line, SimState& state);

/// Starts CBM (cs < n) or CM (cs == n) on `machine` and occupies the
/// maintenance resource for t_cbm or t_cm steps.
/// Throws std::logic_error if the resource is busy, std::out_of_range for a
/// bad index.
MaintenanceKind apply_maintenance(const LineConfig& line, SimState& state, int machine);

/// Resource free and some machine above the critical threshold.
bool at_decision_point(const LineConfig& line, const SimState& state);

using TickObserver = std::function<void(const SimState&)>;

/// Runs the line until the first clock >= now + duration at which a decision
/// point holds, or until t_sim. Returns the elapsed steps.
int advance_until_decision(const LineConfig& line, SimState& state, int duration,
                           const TickObserver& observer = {});

}  // namespace flowline
