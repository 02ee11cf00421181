#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flowline/config.hpp"
#include "flowline/mlp.hpp"
#include "flowline/sim.hpp"

namespace flowline {

/// The instance is too large for exhaustive enumeration.
class StateCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HorizonMode {
  discounted,  // clock dropped from the state, no episode end
  finite,      // clock kept in the state, episode ends at t_sim
};

enum class DiscountMode {
  per_decision,  // gamma per transition, as the DDQN target does
  per_step,      // gamma^elapsed
};

struct OracleOptions {
  HorizonMode horizon = HorizonMode::discounted;
  DiscountMode discount = DiscountMode::per_decision;
  std::size_t state_cap = 100000;
  // Expansion of one (state, action) stops after this many steps or once the
  // mass still between decision points drops below tail_mass; the remainder
  // becomes a terminal outcome.
  int max_expansion_steps = 10000;
  double tail_mass = 1e-15;
};

/// One way a decision interval can end.
struct Outcome {
  int next_state = -1;  // -1: episode over
  double probability = 0.0;
  double reward = 0.0;
  int elapsed = 0;
};

/// Decision-point to decision-point model of a small line. States are found
/// by forward closure from the initial state, so every state is reachable.
struct TabularMdp {
  LineConfig line;
  OracleOptions options;
  double gamma = 0.99;
  int action_count = 0;
  std::vector<SimState> states;                       // representative simulator state
  std::vector<std::vector<std::vector<Outcome>>> outcomes;  // [state][action]
  std::vector<Outcome> initial;                       // first decision point after reset

  std::size_t state_count() const { return states.size(); }
  double discount(const Outcome& o) const;
  std::optional<int> find(const SimState& state) const;

  std::map<std::vector<int>, int> index;
};

/// Key identifying a simulator state for the given horizon mode; ignores the
/// random stream, the part counters and condition timestamps.
std::vector<int> state_key(const SimState& state, HorizonMode horizon);

/// Upper bound on the condition x buffer grid: prod_j (n + 1) * b_j.
double grid_size(const LineConfig& line);

/// Builds the exact model. Throws StateCapExceeded when the grid bound or the
/// enumerated state count exceeds options.state_cap.
TabularMdp enumerate_mdp(const LineConfig& line, const RewardConfig& reward, double gamma,
                         const OracleOptions& options = {});

struct OracleSolution {
  std::vector<std::vector<double>> q;  // [state][action]
  std::vector<double> values;
  std::vector<int> policy;             // greedy, lowest index on ties
  int iterations = 0;
  std::vector<double> residuals;       // sup-norm change per sweep
};

/// Jacobi value iteration until the sup-norm change drops below tol.
/// Throws std::invalid_argument for an undiscounted infinite horizon and
/// std::runtime_error when max_iterations is reached.
OracleSolution value_iteration(const TabularMdp& mdp, double tol, int max_iterations = 1000000);

using StatePolicy = std::function<int(const SimState&)>;

/// Fraction of states where `policy` picks the oracle action or an action
/// whose oracle Q is within tol of the best.
double compare_policies(const OracleSolution& oracle, const TabularMdp& mdp, const StatePolicy& policy,
                        double tol = 1e-9);
double compare_policies(const OracleSolution& oracle, const TabularMdp& mdp, const Mlp& learned, double tol = 1e-9);

/// `state_id,action,q`
void write_q_table_csv(const OracleSolution& solution, const std::filesystem::path& path);
/// `state_id,cs_1..cs_i,level_1..level_i,action` (action 0 = idle, j = machine j)
void write_policy_csv(const OracleSolution& solution, const TabularMdp& mdp, const std::filesystem::path& path);

}  // namespace flowline
