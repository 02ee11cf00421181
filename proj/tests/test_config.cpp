#include <doctest.h>

#include "flowline/config.hpp"
#include "helpers.hpp"

using namespace flowline;
using nlohmann::json;

namespace {

json minimal_doc() {
  return json::parse(R"({
    "machines": [{"p": 2, "d": 0.25, "b": 5}, {"p": 3, "d": 0.1, "b": 4}],
    "n": 10, "n_c": 0, "t_cbm": 5, "t_cm": 20, "t_idle": 1, "t_sim": 400, "seed": 7
  })");
}

std::string error_key(const json& doc) {
  try {
    parse_experiment_config(doc);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("line config parses every key") {
  const auto cfg = parse_experiment_config(minimal_doc());
  REQUIRE(cfg.line.machine_count() == 2);
  CHECK(cfg.line.machines[1].process_time == 3);
  CHECK(cfg.line.machines[1].degradation_rate == doctest::Approx(0.1));
  CHECK(cfg.line.machines[1].buffer_capacity == 4);
  CHECK(cfg.line.breakdown_state == 10);
  CHECK(cfg.line.t_sim == 400);
  CHECK(cfg.line.seed == 7);
  CHECK(cfg.line.max_process_time() == 3);
  CHECK(cfg.reward.mode == RewardMode::r2);
  CHECK(cfg.reward.c_cbm == 0.5);
  CHECK(cfg.reward.c_cm == 1.5);
  CHECK(cfg.reward.c_pl == 0.1);
  CHECK(cfg.reward.beta == 10.0);
  CHECK_FALSE(cfg.reward.verbatim_sum);
}

TEST_CASE("missing line keys are named") {
  for (const char* key : {"machines", "n", "n_c", "t_cbm", "t_cm", "t_idle", "t_sim", "seed"}) {
    auto doc = minimal_doc();
    doc.erase(key);
    CAPTURE(key);
    CHECK(error_key(doc) == key);
  }
  auto doc = minimal_doc();
  doc.erase("t_sim");
  CHECK_THROWS_WITH_AS(parse_experiment_config(doc), "missing key: t_sim", ConfigError);
}

TEST_CASE("out-of-range values are rejected") {
  auto doc = minimal_doc();
  doc["machines"][0]["d"] = 1.5;
  CHECK(error_key(doc) == "machines[0].d");

  doc = minimal_doc();
  doc["n_c"] = 10;
  CHECK(error_key(doc) == "n_c");

  doc = minimal_doc();
  doc["t_sim"] = "long";
  CHECK(error_key(doc) == "t_sim");

  doc = minimal_doc();
  doc["seed"] = -3;
  CHECK(error_key(doc) == "seed");

  doc = minimal_doc();
  doc["beta"] = 0.0;
  CHECK(error_key(doc) == "beta");

  doc = minimal_doc();
  doc["reward_mode"] = "R3";
  CHECK(error_key(doc) == "reward_mode");

  doc = minimal_doc();
  doc["training"] = {{"gamma", 1.5}};
  CHECK(error_key(doc) == "training.gamma");
}

TEST_CASE("training presets follow the reward mode") {
  auto doc = minimal_doc();
  auto r2 = parse_experiment_config(doc).training;
  CHECK(r2.batch_size == 137);
  CHECK(r2.gamma == 0.993);
  CHECK(r2.learning_rate == 3.6e-4);
  CHECK(r2.target_sync_episodes == 98);
  CHECK(r2.epsilon_decay_rate == 2.9e-5);
  CHECK(r2.hidden_layers == std::vector<int>{14, 18});
  CHECK(r2.replay_capacity == 100000);
  CHECK(r2.episodes == 3000);

  doc["reward_mode"] = "R1";
  auto r1 = parse_experiment_config(doc).training;
  CHECK(r1.batch_size == 151);
  CHECK(r1.gamma == 0.870);
  CHECK(r1.learning_rate == 5.4e-4);
  CHECK(r1.target_sync_episodes == 200);
  CHECK(r1.epsilon_decay_rate == 4.8e-5);
  CHECK(r1.hidden_layers == std::vector<int>{17, 11});

  doc["training"] = {{"episodes", 12}, {"lr", 1e-3}, {"hidden_layers", {4, 4}}};
  auto custom = parse_experiment_config(doc).training;
  CHECK(custom.episodes == 12);
  CHECK(custom.learning_rate == 1e-3);
  CHECK(custom.hidden_layers == std::vector<int>{4, 4});
  CHECK(custom.batch_size == 151);
}

TEST_CASE("to_json round-trips") {
  auto doc = minimal_doc();
  doc["verbatim_sum"] = true;
  const auto cfg = parse_experiment_config(doc);
  const auto again = parse_experiment_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
  CHECK(again.reward.verbatim_sum);
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"config1.json", "config2.json", "toy.json"}) {
    CAPTURE(name);
    const auto cfg = load_experiment_config(testing::source_dir() / "configs" / name);
    CHECK(cfg.line.critical_threshold == 0);
  }
  const auto c1 = load_experiment_config(testing::source_dir() / "configs/config1.json");
  CHECK(c1.line.max_output() == 80.0);
  const auto c2 = load_experiment_config(testing::source_dir() / "configs/config2.json");
  CHECK(c2.line.max_output() == 200.0);
  CHECK_THROWS_AS(load_experiment_config(testing::source_dir() / "configs/absent.json"), ConfigError);
}
