#include <doctest.h>

#include <cmath>
#include <map>

#include "flowline/env.hpp"
#include "flowline/oracle.hpp"
#include "helpers.hpp"

using namespace flowline;
using flowline::testing::toy_line;

namespace {

double row_sum(const std::vector<Outcome>& row) {
  double total = 0.0;
  for (const auto& o : row) total += o.probability;
  return total;
}

// E[1 / (base + G)] for G geometric on {1, 2, ...} with success probability d.
double mean_inverse_interval(int base, double d) {
  double total = 0.0;
  double mass = d;
  for (int k = 1; k < 5000; ++k) {
    total += mass / (base + k);
    mass *= 1.0 - d;
  }
  return total;
}

int condition_of(const TabularMdp& mdp, int s) { return mdp.states[static_cast<std::size_t>(s)].machines[0].condition; }

int state_with_condition(const TabularMdp& mdp, int cs) {
  for (int s = 0; s < static_cast<int>(mdp.state_count()); ++s) {
    if (condition_of(mdp, s) == cs) return s;
  }
  return -1;
}

}  // namespace

TEST_CASE("toy instance enumeration") {
  const LineConfig line = toy_line();
  const auto mdp = enumerate_mdp(line, RewardConfig{}, 0.993);
  CHECK(grid_size(line) == 4.0);
  // decision states are cs = 1, 2, 3 with an empty buffer
  CHECK(mdp.state_count() == 3);
  CHECK(mdp.action_count == 2);
  for (int cs = 1; cs <= 3; ++cs) CHECK(state_with_condition(mdp, cs) >= 0);
  for (const auto& per_action : mdp.outcomes) {
    for (const auto& row : per_action) {
      CHECK(std::abs(row_sum(row) - 1.0) < 1e-12);
      for (const auto& o : row) {
        CHECK(std::isfinite(o.reward));
        CHECK(o.elapsed >= 1);
      }
    }
  }
  CHECK(std::abs(row_sum(mdp.initial) - 1.0) < 1e-12);
}

TEST_CASE("degradation rate one gives a deterministic chain") {
  LineConfig line = toy_line();
  line.machines[0].degradation_rate = 1.0;
  const auto mdp = enumerate_mdp(line, RewardConfig{}, 0.9);
  for (const auto& per_action : mdp.outcomes) {
    for (const auto& row : per_action) {
      REQUIRE(row.size() == 1);
      CHECK(row[0].probability == 1.0);
    }
  }
  // idling at cs = 1 moves to cs = 2 after one step
  const int s1 = state_with_condition(mdp, 1);
  const auto& idle = mdp.outcomes[static_cast<std::size_t>(s1)][0][0];
  CHECK(idle.elapsed == 1);
  CHECK(condition_of(mdp, idle.next_state) == 2);
}

TEST_CASE("gamma zero gives expected immediate rewards") {
  const auto mdp = enumerate_mdp(toy_line(), RewardConfig{}, 0.0);
  const auto sol = value_iteration(mdp, 1e-12);
  const int s1 = state_with_condition(mdp, 1);
  const int s2 = state_with_condition(mdp, 2);
  const int s3 = state_with_condition(mdp, 3);
  CHECK(sol.q[s1][0] == 0.0);
  CHECK(sol.q[s2][0] == doctest::Approx(-5.0 * 0.25).epsilon(1e-12));
  CHECK(sol.q[s3][0] == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(sol.q[s2][1] == doctest::Approx(-0.5 - 0.1 * mean_inverse_interval(5, 0.25)).epsilon(1e-12));
  CHECK(sol.q[s3][1] == doctest::Approx(-1.5 - 0.1 * mean_inverse_interval(20, 0.25)).epsilon(1e-12));
}

TEST_CASE("two-state chain matches the closed form") {
  TabularMdp mdp;
  mdp.gamma = 0.9;
  mdp.action_count = 2;
  mdp.states.resize(2);
  mdp.outcomes = {
      {{{1, 1.0, 1.0, 1}}, {{0, 1.0, 1.5, 1}}},  // s0: move on for 1, or stay for 1.5
      {{{0, 1.0, 2.0, 1}}, {{1, 1.0, 0.0, 1}}},  // s1: return for 2, or stay for 0
  };
  const auto sol = value_iteration(mdp, 1e-13);
  // staying in s0 forever: 1.5 / (1 - 0.9) = 15; s1 returns: 2 + 0.9 * 15 = 15.5
  CHECK(std::abs(sol.values[0] - 15.0) < 1e-10);
  CHECK(std::abs(sol.values[1] - 15.5) < 1e-10);
  CHECK(std::abs(sol.q[0][0] - (1.0 + 0.9 * 15.5)) < 1e-10);
  CHECK(std::abs(sol.q[1][1] - 0.9 * 15.5) < 1e-10);
  CHECK(sol.policy == std::vector<int>{1, 0});

  mdp.gamma = 1.0;
  CHECK_THROWS_AS(value_iteration(mdp, 1e-10), std::invalid_argument);
  mdp.gamma = 0.9;
  CHECK_THROWS_AS(value_iteration(mdp, 1e-13, 5), std::runtime_error);
}

TEST_CASE("value iteration contracts by gamma") {
  const auto mdp = enumerate_mdp(toy_line(), RewardConfig{}, 0.95);
  const auto sol = value_iteration(mdp, 1e-10);
  REQUIRE(sol.residuals.size() > 2);
  for (std::size_t k = 1; k < sol.residuals.size(); ++k) {
    CHECK(sol.residuals[k] <= 0.95 * sol.residuals[k - 1] + 1e-12);
  }
}

TEST_CASE("optimal toy policy maintains at an interior condition") {
  const auto mdp = enumerate_mdp(toy_line(), RewardConfig{}, 0.993);
  const auto sol = value_iteration(mdp, 1e-10);
  CHECK(sol.policy[state_with_condition(mdp, 1)] == 0);
  CHECK(sol.policy[state_with_condition(mdp, 2)] == 1);
  CHECK(sol.policy[state_with_condition(mdp, 3)] == 1);
}

TEST_CASE("enumeration agrees with the event simulator") {
  const LineConfig line = toy_line();
  const auto mdp = enumerate_mdp(line, RewardConfig{}, 0.993);
  Environment env(line, RewardConfig{});
  const int samples = 100000;
  std::uint64_t seed = 1;
  for (int s = 0; s < static_cast<int>(mdp.state_count()); ++s) {
    for (int a = 0; a < mdp.action_count; ++a) {
      std::map<std::pair<int, int>, double> expected;
      for (const auto& o : mdp.outcomes[s][a]) expected[{o.next_state, o.elapsed}] += o.probability;
      std::map<std::pair<int, int>, int> seen;
      for (int k = 0; k < samples; ++k) {
        SimState start = mdp.states[static_cast<std::size_t>(s)];
        start.rng = Rng(seed++);
        env.restore(start);
        const auto tr = env.step(Action{a});
        const auto next = env.terminal() ? std::optional<int>(-1) : mdp.find(env.state());
        REQUIRE(next.has_value());
        ++seen[{*next, tr.elapsed}];
      }
      // compare the next-state marginal and the elapsed-time marginal
      std::map<int, double> p_next;
      std::map<int, double> f_next;
      for (const auto& [key, p] : expected) p_next[key.first] += p;
      for (const auto& [key, c] : seen) f_next[key.first] += c / double(samples);
      for (const auto& [next, p] : p_next) CHECK(std::abs(f_next[next] - p) < 0.02);
      for (const auto& [next, f] : f_next) CHECK(p_next.count(next) == 1);
      for (const auto& [key, p] : expected) {
        const double f = seen.count(key) ? seen[key] / double(samples) : 0.0;
        CHECK(std::abs(f - p) < 0.02);
      }
    }
  }
}

TEST_CASE("state cap") {
  OracleOptions small;
  small.state_cap = 2;
  CHECK_THROWS_AS(enumerate_mdp(toy_line(), RewardConfig{}, 0.9, small), StateCapExceeded);
  CHECK_THROWS_AS(enumerate_mdp(testing::sync_line(), RewardConfig{}, 0.9), StateCapExceeded);
}

TEST_CASE("finite horizon keeps the clock") {
  LineConfig line = toy_line();
  line.t_sim = 30;
  OracleOptions finite;
  finite.horizon = HorizonMode::finite;
  const auto mdp = enumerate_mdp(line, RewardConfig{}, 1.0, finite);
  CHECK(mdp.state_count() > 3);
  const auto sol = value_iteration(mdp, 1e-12);
  for (double v : sol.values) CHECK(std::isfinite(v));
}

TEST_CASE("policy agreement") {
  const LineConfig line = toy_line();
  const auto mdp = enumerate_mdp(line, RewardConfig{}, 0.993);
  const auto sol = value_iteration(mdp, 1e-10);

  const StatePolicy lookup = [&](const SimState& s) { return sol.policy[static_cast<std::size_t>(*mdp.find(s))]; };
  CHECK(compare_policies(sol, mdp, lookup) == 1.0);
  const StatePolicy always_idle = [](const SimState&) { return 0; };
  CHECK(compare_policies(sol, mdp, always_idle) == doctest::Approx(1.0 / 3.0));

  Rng rng(31);
  const std::vector<int> shape{2, 14, 18, 2};
  double total = 0.0;
  const int nets = 400;
  for (int k = 0; k < nets; ++k) total += compare_policies(sol, mdp, init_params(shape, rng));
  CHECK(std::abs(total / nets - 0.5) < 0.15);
}

TEST_CASE("oracle csv output") {
  const auto mdp = enumerate_mdp(toy_line(), RewardConfig{}, 0.993);
  const auto sol = value_iteration(mdp, 1e-10);
  const auto dir = testing::fresh_dir("oracle_csv");
  write_q_table_csv(sol, dir / "q.csv");
  write_policy_csv(sol, mdp, dir / "policy.csv");
  const auto q = testing::read_lines(dir / "q.csv");
  CHECK(q.size() == 7);
  CHECK(q[0] == "state_id,action,q");
  const auto p = testing::read_lines(dir / "policy.csv");
  CHECK(p.size() == 4);
  CHECK(p[0] == "state_id,cs_1,level_1,action");
}
