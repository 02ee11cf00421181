#include "flowline/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "flowline/env.hpp"

namespace flowline {

std::vector<int> state_key(const SimState& state, HorizonMode horizon) {
  std::vector<int> key;
  key.reserve(state.machines.size() * 4 + state.buffer_levels.size() + 3);
  for (const auto& m : state.machines) {
    key.push_back(m.condition);
    key.push_back(static_cast<int>(m.status));
    key.push_back(m.work_remaining);
    key.push_back(m.holds_part ? 1 : 0);
  }
  key.insert(key.end(), state.buffer_levels.begin(), state.buffer_levels.end());
  key.push_back(state.resource_busy_until ? *state.resource_busy_until - state.clock : -1);
  key.push_back(state.maintained_machine);
  if (horizon == HorizonMode::finite) key.push_back(state.clock);
  return key;
}

double grid_size(const LineConfig& line) {
  double size = 1.0;
  for (const auto& m : line.machines) size *= static_cast<double>(line.breakdown_state + 1) * m.buffer_capacity;
  return size;
}

double TabularMdp::discount(const Outcome& o) const {
  return options.discount == DiscountMode::per_decision ? gamma : std::pow(gamma, o.elapsed);
}

std::optional<int> TabularMdp::find(const SimState& state) const {
  auto it = index.find(state_key(state, options.horizon));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

namespace {

constexpr int kResetAction = -1;

class Enumerator {
 public:
  Enumerator(TabularMdp& mdp, const RewardConfig& reward) : mdp_(mdp), reward_(reward) {}

  void run() {
    mdp_.initial = expand(init_line(mdp_.line), kResetAction);
    while (!pending_.empty()) {
      const int s = pending_.front();
      pending_.pop_front();
      const SimState start = mdp_.states[static_cast<std::size_t>(s)];
      std::vector<std::vector<Outcome>> per_action;
      for (int a = 0; a < mdp_.action_count; ++a) per_action.push_back(expand(start, a));
      mdp_.outcomes[static_cast<std::size_t>(s)] = std::move(per_action);
    }
  }

 private:
  struct Branch {
    SimState state;
    double probability;
  };

  // Clock-free states are stored relative to clock 0.
  SimState normalized(SimState state) const {
    if (mdp_.options.horizon == HorizonMode::finite) return state;
    const int offset = state.clock;
    state.clock = 0;
    if (state.resource_busy_until) *state.resource_busy_until -= offset;
    for (auto& m : state.machines) {
      for (int& t : m.reached_at) {
        if (t >= 0) t = std::max(0, t - offset);
      }
    }
    state.produced_parts = 0;
    state.source_pulls = 0;
    return state;
  }

  int intern(const SimState& state) {
    auto key = state_key(state, mdp_.options.horizon);
    if (auto it = mdp_.index.find(key); it != mdp_.index.end()) return it->second;
    if (mdp_.states.size() >= mdp_.options.state_cap) {
      throw StateCapExceeded(fmt::format("enumeration exceeded the cap of {} states; use a smaller instance",
                                         mdp_.options.state_cap));
    }
    const int id = static_cast<int>(mdp_.states.size());
    mdp_.index.emplace(std::move(key), id);
    mdp_.states.push_back(normalized(state));
    mdp_.outcomes.emplace_back();
    pending_.push_back(id);
    return id;
  }

  double reward_for(const SimState& start, const SimState& end, int action, MaintenanceKind kind, int elapsed) const {
    if (action == kResetAction) return 0.0;
    if (reward_.mode == RewardMode::r1) return reward_r1(start.produced_parts, end.produced_parts);
    if (action == 0) {
      const bool broken = std::any_of(end.machines.begin(), end.machines.end(),
                                      [&](const MachineState& m) { return m.condition >= mdp_.line.breakdown_state; });
      return reward_r2(broken ? Scenario::b : Scenario::a, kind, elapsed, reward_);
    }
    return reward_r2(Scenario::c, kind, elapsed, reward_);
  }

  // Exact distribution of where the interval started by `action` ends.
  std::vector<Outcome> expand(const SimState& from, int action) {
    const LineConfig& line = mdp_.line;
    const bool finite = mdp_.options.horizon == HorizonMode::finite;
    SimState start = from;
    MaintenanceKind kind = MaintenanceKind::none;
    int duration = 0;
    if (action == 0) {
      duration = line.t_idle;
    } else if (action > 0) {
      kind = apply_maintenance(line, start, action - 1);
      duration = kind == MaintenanceKind::cm ? line.t_cm : line.t_cbm;
    }
    const bool track_parts = reward_.mode == RewardMode::r1;

    std::map<std::tuple<int, int, double>, double> merged;
    auto record = [&](const Branch& br, bool terminal, int elapsed) {
      const int next = terminal ? -1 : intern(br.state);
      const double r = reward_for(start, br.state, action, kind, elapsed);
      merged[{next, elapsed, r}] += br.probability;
    };

    std::map<std::vector<int>, Branch> frontier;
    auto frontier_key = [&](const SimState& s) {
      auto key = state_key(s, mdp_.options.horizon);
      if (track_parts) key.push_back(static_cast<int>(s.produced_parts - start.produced_parts));
      return key;
    };
    frontier.emplace(frontier_key(start), Branch{start, 1.0});

    for (int elapsed = 0;; ++elapsed) {
      for (auto it = frontier.begin(); it != frontier.end();) {
        const SimState& s = it->second.state;
        const bool episode_over = finite && s.clock >= line.t_sim;
        if (episode_over || (elapsed >= duration && at_decision_point(line, s))) {
          record(it->second, episode_over, elapsed);
          it = frontier.erase(it);
        } else {
          ++it;
        }
      }
      if (frontier.empty()) break;

      double mass = 0.0;
      for (const auto& [key, br] : frontier) mass += br.probability;
      if (elapsed >= mdp_.options.max_expansion_steps || mass < mdp_.options.tail_mass) {
        for (const auto& [key, br] : frontier) record(br, true, elapsed);
        break;
      }

      std::map<std::vector<int>, Branch> next;
      for (const auto& [key, br] : frontier) {
        SimState flowed = br.state;
        const std::vector<int> operated = flow_parts(line, flowed);
        const std::size_t combos = std::size_t{1} << operated.size();
        for (std::size_t mask = 0; mask < combos; ++mask) {
          double p = br.probability;
          std::vector<int> degraded;
          for (std::size_t k = 0; k < operated.size(); ++k) {
            const double d = line.machines[static_cast<std::size_t>(operated[k])].degradation_rate;
            if (mask & (std::size_t{1} << k)) {
              p *= d;
              degraded.push_back(operated[k]);
            } else {
              p *= 1.0 - d;
            }
          }
          if (p == 0.0) continue;
          SimState after = flowed;
          finish_tick(line, after, degraded);
          auto k2 = frontier_key(after);
          auto [slot, inserted] = next.try_emplace(std::move(k2), Branch{after, 0.0});
          slot->second.probability += p;
        }
      }
      frontier = std::move(next);
    }

    std::vector<Outcome> outcomes;
    outcomes.reserve(merged.size());
    for (const auto& [k, p] : merged) outcomes.push_back({std::get<0>(k), p, std::get<2>(k), std::get<1>(k)});
    return outcomes;
  }

  TabularMdp& mdp_;
  const RewardConfig& reward_;
  std::deque<int> pending_;
};

}  // namespace

TabularMdp enumerate_mdp(const LineConfig& line, const RewardConfig& reward, double gamma,
                         const OracleOptions& options) {
  line.validate();
  reward.validate();
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (grid_size(line) > static_cast<double>(options.state_cap)) {
    throw StateCapExceeded(fmt::format("state space bound {:.0f} exceeds the cap of {}; use a smaller instance",
                                       grid_size(line), options.state_cap));
  }
  TabularMdp mdp;
  mdp.line = line;
  mdp.options = options;
  mdp.gamma = gamma;
  mdp.action_count = line.machine_count() + 1;
  Enumerator(mdp, reward).run();
  return mdp;
}

OracleSolution value_iteration(const TabularMdp& mdp, double tol, int max_iterations) {
  if (mdp.options.horizon == HorizonMode::discounted && mdp.gamma >= 1.0) {
    throw std::invalid_argument("value iteration needs gamma < 1 for the discounted horizon");
  }
  const std::size_t n = mdp.state_count();
  const auto actions = static_cast<std::size_t>(mdp.action_count);
  OracleSolution sol;
  sol.values.assign(n, 0.0);
  sol.q.assign(n, std::vector<double>(actions, 0.0));

  auto backup = [&](const std::vector<double>& v) {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < actions; ++a) {
        double q = 0.0;
        for (const auto& o : mdp.outcomes[s][a]) {
          const double future = o.next_state < 0 ? 0.0 : v[static_cast<std::size_t>(o.next_state)];
          q += o.probability * (o.reward + mdp.discount(o) * future);
        }
        sol.q[s][a] = q;
      }
    }
  };

  std::vector<double> next(n);
  for (;;) {
    if (sol.iterations >= max_iterations) {
      throw std::runtime_error(fmt::format("value iteration did not converge in {} sweeps", max_iterations));
    }
    backup(sol.values);
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      next[s] = *std::max_element(sol.q[s].begin(), sol.q[s].end());
      residual = std::max(residual, std::abs(next[s] - sol.values[s]));
    }
    sol.values.swap(next);
    ++sol.iterations;
    sol.residuals.push_back(residual);
    if (residual < tol) break;
  }
  backup(sol.values);
  sol.policy.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    sol.policy[s] = static_cast<int>(std::max_element(sol.q[s].begin(), sol.q[s].end()) - sol.q[s].begin());
  }
  return sol;
}

double compare_policies(const OracleSolution& oracle, const TabularMdp& mdp, const StatePolicy& policy, double tol) {
  if (mdp.state_count() == 0) return 1.0;
  std::size_t agree = 0;
  for (std::size_t s = 0; s < mdp.state_count(); ++s) {
    const int a = policy(mdp.states[s]);
    const auto& q = oracle.q[s];
    const double best = *std::max_element(q.begin(), q.end());
    if (a == oracle.policy[s] || (a >= 0 && a < mdp.action_count && q[static_cast<std::size_t>(a)] >= best - tol)) {
      ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(mdp.state_count());
}

double compare_policies(const OracleSolution& oracle, const TabularMdp& mdp, const Mlp& learned, double tol) {
  return compare_policies(
      oracle, mdp, [&](const SimState& s) { return argmax(forward(learned, observe(mdp.line, s).values)); }, tol);
}

void write_q_table_csv(const OracleSolution& solution, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "state_id,action,q\n";
  for (std::size_t s = 0; s < solution.q.size(); ++s) {
    for (std::size_t a = 0; a < solution.q[s].size(); ++a) out << fmt::format("{},{},{:.12g}\n", s, a, solution.q[s][a]);
  }
}

void write_policy_csv(const OracleSolution& solution, const TabularMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int machines = mdp.line.machine_count();
  out << "state_id";
  for (int j = 1; j <= machines; ++j) out << ",cs_" << j;
  for (int j = 1; j <= machines; ++j) out << ",level_" << j;
  out << ",action\n";
  for (std::size_t s = 0; s < mdp.state_count(); ++s) {
    const auto& st = mdp.states[s];
    out << s;
    for (const auto& m : st.machines) out << ',' << m.condition;
    for (int level : st.buffer_levels) out << ',' << level;
    out << ',' << solution.policy[s] << '\n';
  }
}

}  // namespace flowline
