#include "flowline/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "flowline/baselines.hpp"
#include "flowline/config.hpp"
#include "flowline/ddqn.hpp"
#include "flowline/eval.hpp"
#include "flowline/oracle.hpp"

#ifndef FLOWLINE_VERSION
#define FLOWLINE_VERSION "0.1.0"
#endif

namespace flowline::cli {

namespace fs = std::filesystem;

std::string version() { return FLOWLINE_VERSION; }

namespace {

ExperimentConfig load(const Options& opts) {
  ExperimentConfig config = load_experiment_config(opts.config);
  if (opts.seed) config.line.seed = *opts.seed;
  return config;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& command, const Options& opts, const ExperimentConfig& config) {
  fs::create_directories(opts.out);
  nlohmann::json manifest{
      {"command", command},
      {"config", fs::absolute(opts.config).string()},
      {"seed", config.line.seed},
      {"out_dir", fs::absolute(opts.out).string()},
      {"timestamp", utc_timestamp()},
      {"version", version()},
      {"effective_config", to_json(config)},
  };
  std::ofstream(opts.out / "manifest.json") << manifest.dump(2) << '\n';
}

void print_summary(std::ostream& out, const PolicySummary& s) {
  out << fmt::format("{:<10} episodes={} parts={:.2f} rate={:.1f}% cost={:.2f} cbm={:.2f} cm={:.2f} idle={:.2f} "
                     "reward={:.3f}\n",
                     s.policy, s.episodes, s.mean_parts, 100.0 * s.production_rate, s.mean_cost, s.mean_cbm, s.mean_cm,
                     s.mean_idle, s.mean_reward);
}

// Wraps a command body with the exit-code convention.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  } catch (const StateCapExceeded& e) {
    err << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

std::unique_ptr<Policy> make_policy(const std::string& choice, const LineConfig& line) {
  if (choice == "random") return std::make_unique<RandomPolicy>();
  if (choice.rfind("fifo:", 0) == 0) {
    int threshold = 0;
    try {
      std::size_t used = 0;
      threshold = std::stoi(choice.substr(5), &used);
      if (used != choice.size() - 5) throw std::invalid_argument(choice);
    } catch (const std::exception&) {
      throw ConfigError("policy", "invalid policy: " + choice);
    }
    if (threshold < 0 || threshold > line.breakdown_state) {
      throw ConfigError("policy", fmt::format("FIFO threshold must lie in [0, {}]", line.breakdown_state));
    }
    return std::make_unique<FifoPolicy>(threshold);
  }
  Mlp params = load_checkpoint(choice);
  if (params.input_size() != 2 * line.machine_count() || params.output_size() != line.machine_count() + 1) {
    throw std::runtime_error(fmt::format("checkpoint {} does not match a {}-machine line", choice, line.machine_count()));
  }
  return std::make_unique<GreedyPolicy>(std::move(params));
}

}  // namespace

int cmd_train(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load(opts);
    if (opts.episodes) config.training.episodes = *opts.episodes;
    config.training.validate();
    write_manifest("train", opts, config);

    const int report_every = std::max(1, config.training.episodes / 20);
    auto progress = [&](const EpisodeRecord& r) {
      if ((r.episode + 1) % report_every == 0) {
        out << fmt::format("episode {:>5}  reward {:>9.3f}  smoothed {:>9.3f}  parts {:>4}  eps {:.3f}\n", r.episode,
                           r.reward, r.smoothed_reward, r.produced_parts, r.epsilon);
      }
    };
    const auto result = train(config.line, config.reward, config.training, config.line.seed, progress);
    save_checkpoint(result.best_params, opts.out / "best_checkpoint.json");
    save_checkpoint(result.final_params, opts.out / "final_checkpoint.json");
    write_training_csv(result.log, opts.out / "training_log.csv");
    out << fmt::format("best smoothed reward {:.4f} at episode {}\n", result.best_smoothed_reward, result.best_episode);
    return kExitOk;
  });
}

int cmd_evaluate(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load(opts);
    const int episodes = opts.episodes.value_or(100);
    if (episodes < 0) throw ConfigError("episodes", "invalid value for key: episodes");
    auto policy = make_policy(opts.policy, config.line);
    write_manifest("evaluate", opts, config);

    const auto metrics = run_episodes(*policy, config.line, config.reward, episodes,
                                      config.line.seed + kEvalSeedOffset, opts.workers);
    const std::string name = policy->name();
    write_episode_csv(name, metrics, opts.out / "episodes.csv");
    write_machine_csv(name, metrics, config.line.machine_count(), opts.out / "machines.csv");
    write_cm_timeline_csv(name, metrics, opts.out / "cm_timeline.csv");
    if (!metrics.empty()) print_summary(out, summarize(name, metrics, config.line));
    return kExitOk;
  });
}

int cmd_sweep(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load(opts);
    SweepCriterion criterion = SweepCriterion::max_parts;
    if (opts.criterion == "min_cost") {
      criterion = SweepCriterion::min_cost;
    } else if (opts.criterion != "max_parts") {
      throw ConfigError("criterion", "invalid criterion: " + opts.criterion + " (expected max_parts or min_cost)");
    }
    const int episodes = opts.episodes.value_or(100);
    if (episodes < 1) throw ConfigError("episodes", "invalid value for key: episodes");
    write_manifest("sweep", opts, config);

    const auto sweep =
        sweep_threshold(config.line, config.reward, episodes, config.line.seed + kEvalSeedOffset, opts.workers);
    write_sweep_csv(sweep, opts.out / "sweep.csv");
    for (const auto& row : sweep.rows) {
      out << fmt::format("n_c={:>2}  parts={:7.2f}  cost={:6.2f}  cbm={:6.2f}  cm={:5.2f}\n", row.threshold,
                         row.mean_parts, row.mean_cost, row.mean_cbm, row.mean_cm);
    }
    out << fmt::format("best threshold (max_parts): {}\n", sweep.best_max_parts);
    out << fmt::format("best threshold (min_cost): {}\n", sweep.best_min_cost);
    out << fmt::format("selected ({}): {}\n", opts.criterion, sweep.best(criterion));
    return kExitOk;
  });
}

int cmd_oracle(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = load(opts);
    write_manifest("oracle", opts, config);
    const auto mdp = enumerate_mdp(config.line, config.reward, config.training.gamma);
    const auto solution = value_iteration(mdp, 1e-10);
    write_q_table_csv(solution, opts.out / "q_table.csv");
    write_policy_csv(solution, mdp, opts.out / "policy.csv");
    out << fmt::format("states: {}  sweeps: {}\n", mdp.state_count(), solution.iterations);
    if (opts.compare_checkpoint) {
      const Mlp learned = load_checkpoint(*opts.compare_checkpoint);
      out << fmt::format("agreement: {:.4f}\n", compare_policies(solution, mdp, learned));
    }
    return kExitOk;
  });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow-line maintenance scheduling: simulation, DDQN training, baselines and evaluation"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Options opts;
  opts.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t seed = 0;
  int episodes = 0;
  std::string compare;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--workers", opts.workers, "Worker threads for episode evaluation")->check(CLI::PositiveNumber);
  };

  auto* train_cmd = app.add_subcommand("train", "Train a DDQN policy");
  common(train_cmd);
  train_cmd->add_option("--episodes", episodes, "Override training episodes");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a policy over seeded episodes");
  common(eval_cmd);
  eval_cmd->add_option("--episodes", episodes, "Number of evaluation episodes (default 100)");
  eval_cmd->add_option("--policy", opts.policy, "Checkpoint path, fifo:<n_c> or random");

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep the FIFO threshold over 0..n");
  common(sweep_cmd);
  sweep_cmd->add_option("--episodes", episodes, "Episodes per threshold (default 100)");
  sweep_cmd->add_option("--criterion", opts.criterion, "max_parts or min_cost");

  auto* oracle_cmd = app.add_subcommand("oracle", "Solve a small instance exactly by value iteration");
  common(oracle_cmd);
  oracle_cmd->add_option("--compare-checkpoint", compare, "Report greedy agreement of this checkpoint");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* chosen = app.get_subcommands().front();
  if (given(chosen, "--seed")) opts.seed = seed;
  if (chosen != oracle_cmd && given(chosen, "--episodes")) opts.episodes = episodes;
  if (chosen == oracle_cmd && given(chosen, "--compare-checkpoint")) opts.compare_checkpoint = compare;

  if (chosen == train_cmd) return cmd_train(opts, out, err);
  if (chosen == eval_cmd) return cmd_evaluate(opts, out, err);
  if (chosen == sweep_cmd) return cmd_sweep(opts, out, err);
  return cmd_oracle(opts, out, err);
}

}  // namespace flowline::cli
