#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowline/baselines.hpp"
#include "flowline/eval.hpp"
#include "helpers.hpp"

using namespace flowline;

namespace {

// Never maintains anything.
class IdlePolicy : public Policy {
 public:
  std::string name() const override { return "idle"; }
  Action act(const Environment&) override { return Action::idle(); }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<IdlePolicy>(); }
};

// Repairs only broken machines.
class RepairPolicy : public Policy {
 public:
  std::string name() const override { return "repair"; }
  Action act(const Environment& env) override {
    const auto& s = env.state();
    for (std::size_t j = 0; j < s.machines.size(); ++j) {
      if (s.machines[j].condition == env.line().breakdown_state) return Action::maintain(static_cast<int>(j));
    }
    return Action::idle();
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<RepairPolicy>(); }
};

}  // namespace

TEST_CASE("production rate") {
  LineConfig c1 = testing::async_line();
  LineConfig c2 = testing::sync_line();
  CHECK(production_rate(63.1, c1) == doctest::Approx(0.78875).epsilon(1e-12));
  CHECK(std::abs(production_rate(65.4, c1) - 0.812) < 0.01);
  CHECK(production_rate(98.1, c2) == doctest::Approx(0.4905).epsilon(1e-12));
  CHECK(production_rate(0.0, c2) == 0.0);
}

TEST_CASE("run_episodes basics") {
  const LineConfig line = testing::sync_line();
  CHECK(run_episodes(RandomPolicy{}, line, RewardConfig{}, 0, 1).empty());

  const LineConfig still = testing::uniform_line(5, 2, 0.0, 5);
  for (const auto& m : run_episodes(RandomPolicy{}, still, RewardConfig{}, 3, 1)) {
    CHECK(m.maintenance_cost == 0.0);
    CHECK(m.cm_count == 0);
    CHECK(m.produced_parts == 198);
  }
}

TEST_CASE("episode metric identities") {
  const LineConfig line = testing::async_line();
  const auto metrics = run_episodes(RandomPolicy{}, line, RewardConfig{}, 20, 500);
  REQUIRE(metrics.size() == 20);
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const auto& m = metrics[k];
    CHECK(m.seed == 500 + k);
    CHECK(m.maintenance_cost == 0.5 * m.cbm_count + 1.5 * m.cm_count);
    CHECK(m.cbm_count == std::accumulate(m.per_machine_cbm.begin(), m.per_machine_cbm.end(), 0));
    CHECK(static_cast<int>(m.cbm_conditions.size()) == m.cbm_count);
    CHECK(static_cast<int>(m.cm_events.size()) == m.cm_count);
    CHECK(m.produced_parts <= line.t_sim / line.max_process_time());
    CHECK(m.idle_count >= 0);
    for (const auto& e : m.cm_events) CHECK(e.clock <= line.t_sim);
    for (const auto& c : m.cbm_conditions) CHECK(c.condition < line.breakdown_state);
  }
}

TEST_CASE("results do not depend on the worker count") {
  const LineConfig line = testing::sync_line();
  const auto one = run_episodes(FifoPolicy(5), line, RewardConfig{}, 12, 40, 1);
  const auto many = run_episodes(FifoPolicy(5), line, RewardConfig{}, 12, 40, 4);
  REQUIRE(one.size() == many.size());
  for (std::size_t k = 0; k < one.size(); ++k) {
    CHECK(one[k].seed == many[k].seed);
    CHECK(one[k].produced_parts == many[k].produced_parts);
    CHECK(one[k].total_reward == many[k].total_reward);
    CHECK(one[k].cm_events == many[k].cm_events);
  }
}

TEST_CASE("summaries") {
  const LineConfig line = testing::sync_line();
  CHECK_THROWS_AS(summarize("x", {}, line), std::invalid_argument);

  const auto metrics = run_episodes(FifoPolicy(5), line, RewardConfig{}, 30, 7);
  const auto single = summarize("fifo", {metrics[0]}, line);
  CHECK(single.mean_parts == static_cast<double>(metrics[0].produced_parts));
  CHECK(single.mean_cost == metrics[0].maintenance_cost);
  CHECK(single.mean_idle == metrics[0].idle_count);

  const auto s = summarize("fifo", metrics, line);
  CHECK(s.episodes == 30);
  CHECK(s.mean_cost == doctest::Approx(0.5 * s.mean_cbm + 1.5 * s.mean_cm).epsilon(1e-12));
  CHECK(s.production_rate >= 0.0);
  CHECK(s.production_rate <= 1.0);
  const auto [lo, hi] = std::minmax_element(s.mean_cbm_per_machine.begin(), s.mean_cbm_per_machine.end());
  CHECK(*hi / *lo <= 1.5);

  auto shuffled = metrics;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto r = summarize("fifo", shuffled, line);
  CHECK(r.mean_parts == doctest::Approx(s.mean_parts).epsilon(1e-12));
  CHECK(r.mean_cost == doctest::Approx(s.mean_cost).epsilon(1e-12));

  // cost accounting from the published averages of 46.1 CBM and 2.2 CM
  CHECK(std::abs(0.5 * 46.1 + 1.5 * 2.2 - 26.2) / 26.2 < 0.01);
}

TEST_CASE("condition at CBM") {
  EpisodeMetrics m;
  m.cbm_conditions = {{0, 7}};
  const auto stats = condition_at_cbm_stats({m}, 2);
  REQUIRE(stats.size() == 2);
  CHECK(stats[0] == 7.0);
  CHECK_FALSE(stats[1].has_value());

  const auto fifo = run_episodes(FifoPolicy(5), testing::sync_line(), RewardConfig{}, 20, 3);
  for (const auto& v : condition_at_cbm_stats(fifo, 5)) {
    REQUIRE(v.has_value());
    CHECK(*v >= 6.0);
  }
}

TEST_CASE("CM timeline") {
  LineConfig line = testing::uniform_line(2, 1, 1.0, 2);
  const auto metrics = run_episodes(RepairPolicy{}, line, RewardConfig{}, 3, 1);
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const auto timeline = cm_timeline(metrics, k);
    REQUIRE_FALSE(timeline.empty());
    CHECK(timeline.front().clock >= line.breakdown_state);
    CHECK(std::is_sorted(timeline.begin(), timeline.end(),
                         [](const CmEvent& a, const CmEvent& b) { return a.clock < b.clock; }));
  }
  CHECK_THROWS_AS(cm_timeline(metrics, 3), std::out_of_range);

  const auto calm = run_episodes(IdlePolicy{}, testing::uniform_line(2, 1, 0.0, 2), RewardConfig{}, 1, 1);
  CHECK(cm_timeline(calm, 0).empty());
  CHECK(final_quartile_cm(calm, line) == 0.0);

  EpisodeMetrics late;
  late.cm_events = {{0, 299}, {1, 300}, {0, 399}};
  CHECK(final_quartile_cm({late}, testing::sync_line()) == 2.0);
}

TEST_CASE("evaluation csv files") {
  const LineConfig line = testing::sync_line();
  const auto metrics = run_episodes(RandomPolicy{}, line, RewardConfig{}, 4, 1);
  const auto dir = testing::fresh_dir("eval_csv");
  write_episode_csv("random", metrics, dir / "episodes.csv");
  write_machine_csv("random", metrics, 5, dir / "machines.csv");
  write_cm_timeline_csv("random", metrics, dir / "cm.csv");

  const auto episodes = testing::read_lines(dir / "episodes.csv");
  REQUIRE(episodes.size() == 5);
  CHECK(episodes[0] == "episode,policy,parts,cost,cbm,cm,idle");
  CHECK(episodes[1].rfind("0,random,", 0) == 0);

  const auto machines = testing::read_lines(dir / "machines.csv");
  REQUIRE(machines.size() == 6);
  CHECK(machines[0] == "policy,machine,cbm_count_mean,cbm_condition_mean");
  CHECK(machines[1].rfind("random,1,", 0) == 0);

  const auto cm = testing::read_lines(dir / "cm.csv");
  CHECK(cm[0] == "episode,policy,machine,clock");
  std::size_t events = 0;
  for (const auto& m : metrics) events += m.cm_events.size();
  CHECK(cm.size() == events + 1);
}
