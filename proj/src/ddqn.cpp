#include "flowline/ddqn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace flowline {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition transition) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
  } else {
    items_[next_] = std::move(transition);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  const std::size_t n = items_.size();
  if (count > n) throw std::invalid_argument("cannot sample more transitions than stored");
  std::vector<std::size_t> picked;
  picked.reserve(count);
  // Floyd: each j in [n-count, n) contributes exactly one new index
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = rng.below(j + 1);
    if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
      picked.push_back(t);
    } else {
      picked.push_back(j);
    }
  }
  return picked;
}

double ddqn_target(double reward, std::span<const double> next_obs, const Mlp& online, const Mlp& target,
                   double gamma, bool terminal) {
  if (terminal) return reward;
  const int chosen = argmax(forward(online, next_obs));
  return reward + gamma * forward(target, next_obs)(chosen);
}

std::vector<double> ddqn_targets(std::span<const double> rewards, const Eigen::MatrixXd& next_inputs,
                                 std::span<const char> terminals, const Mlp& online, const Mlp& target,
                                 double gamma) {
  const Eigen::MatrixXd q_online = forward_batch(online, next_inputs);
  const Eigen::MatrixXd q_target = forward_batch(target, next_inputs);
  std::vector<double> y(rewards.size());
  for (std::size_t b = 0; b < rewards.size(); ++b) {
    if (terminals[b]) {
      y[b] = rewards[b];
      continue;
    }
    const auto col = static_cast<Eigen::Index>(b);
    const int chosen = argmax(q_online.col(col));
    y[b] = rewards[b] + gamma * q_target(chosen, col);
  }
  return y;
}

Action select_action(const Eigen::VectorXd& q_values, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) return Action{static_cast<int>(rng.below(static_cast<std::uint64_t>(q_values.size())))};
  return Action{argmax(q_values)};
}

std::vector<int> network_shape(const LineConfig& line, const TrainingConfig& cfg) {
  std::vector<int> shape{2 * line.machine_count()};
  shape.insert(shape.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
  shape.push_back(line.machine_count() + 1);
  return shape;
}

namespace {

// One minibatch gradient step on the online network.
void update_online(const ReplayBuffer& replay, const TrainingConfig& cfg, Mlp& online, const Mlp& target,
                   AdamState& adam, Rng& rng) {
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto indices = replay.sample_indices(batch, rng);
  const Eigen::Index width = online.input_size();
  Eigen::MatrixXd inputs(width, static_cast<Eigen::Index>(batch));
  Eigen::MatrixXd next_inputs(width, static_cast<Eigen::Index>(batch));
  std::vector<int> actions(batch);
  std::vector<double> rewards(batch);
  std::vector<char> terminals(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const Transition& tr = replay[indices[b]];
    const auto col = static_cast<Eigen::Index>(b);
    inputs.col(col) = Eigen::Map<const Eigen::VectorXd>(tr.obs.values.data(), width);
    next_inputs.col(col) = Eigen::Map<const Eigen::VectorXd>(tr.next_obs.values.data(), width);
    actions[b] = tr.action.code;
    rewards[b] = tr.reward;
    terminals[b] = tr.terminal ? 1 : 0;
  }
  const auto targets = ddqn_targets(rewards, next_inputs, terminals, online, target, cfg.gamma);
  Mlp grads = backward(online, inputs, actions, targets);
  if (cfg.grad_clip_norm > 0.0) {
    const double norm = global_norm(grads);
    if (norm > cfg.grad_clip_norm) {
      const double scale = cfg.grad_clip_norm / norm;
      for (std::size_t l = 0; l < grads.layer_count(); ++l) {
        grads.weights[l] *= scale;
        grads.biases[l] *= scale;
      }
    }
  }
  adam_step(online, grads, adam);
}

double decayed(double epsilon, const TrainingConfig& cfg) {
  return std::max(cfg.epsilon_min, epsilon * (1.0 - cfg.epsilon_decay_rate));
}

}  // namespace

TrainingResult train(const LineConfig& line, const RewardConfig& reward, const TrainingConfig& cfg,
                     std::uint64_t seed, const EpisodeCallback& on_episode) {
  cfg.validate();
  Rng root(seed);
  Rng init_rng = root.split();
  Rng agent_rng = root.split();

  const auto shape = network_shape(line, cfg);
  Mlp online = init_params(shape, init_rng);
  Mlp target = online;
  AdamState adam = AdamState::for_params(online, cfg.learning_rate);
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
  Environment env(line, reward);

  TrainingResult result;
  result.best_params = online;
  result.best_smoothed_reward = -std::numeric_limits<double>::infinity();
  double epsilon = cfg.epsilon_start;
  double window_sum = 0.0;

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    env.reset(seed + static_cast<std::uint64_t>(episode));
    EpisodeRecord record;
    record.episode = episode;
    int cbm = 0;
    int cm = 0;
    while (!env.terminal()) {
      const Eigen::VectorXd q = forward(online, env.observation().values);
      const Action action = select_action(q, epsilon, agent_rng);
      Transition tr = env.step(action);
      record.reward += tr.reward;
      ++record.decisions;
      if (tr.info.kind == MaintenanceKind::cbm) ++cbm;
      if (tr.info.kind == MaintenanceKind::cm) ++cm;
      replay.push(std::move(tr));
      if (replay.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        update_online(replay, cfg, online, target, adam, agent_rng);
      }
      if (cfg.decay_granularity == DecayGranularity::per_step) epsilon = decayed(epsilon, cfg);
    }
    if (cfg.decay_granularity == DecayGranularity::per_episode) epsilon = decayed(epsilon, cfg);
    if ((episode + 1) % cfg.target_sync_episodes == 0) target = online;
    adam.lr *= cfg.lr_decay;

    record.produced_parts = env.state().produced_parts;
    record.maintenance_cost = reward.c_cbm * cbm + reward.c_cm * cm;
    record.epsilon = epsilon;

    const auto window = static_cast<std::size_t>(cfg.smoothing_window);
    auto& history = result.log.episodes;
    window_sum += record.reward;
    if (history.size() >= window) window_sum -= history[history.size() - window].reward;
    const std::size_t span = std::min(window, history.size() + 1);
    record.smoothed_reward = window_sum / static_cast<double>(span);
    history.push_back(record);

    // Short leading windows are too noisy to pick a checkpoint from.
    const bool full_window = span >= std::min(window, static_cast<std::size_t>(cfg.episodes));
    if (full_window && record.smoothed_reward > result.best_smoothed_reward) {
      result.best_smoothed_reward = record.smoothed_reward;
      result.best_episode = episode;
      result.best_params = online;
    }
    if (on_episode) on_episode(record);
  }
  if (result.best_episode < 0) result.best_smoothed_reward = 0.0;
  result.final_params = online;
  return result;
}

void write_training_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,reward,produced_parts,maintenance_cost,decisions,epsilon,smoothed_reward\n";
  for (const auto& r : log.episodes) {
    out << fmt::format("{},{:.6f},{},{:.6f},{},{:.8f},{:.6f}\n", r.episode, r.reward, r.produced_parts,
                       r.maintenance_cost, r.decisions, r.epsilon, r.smoothed_reward);
  }
}

}  // namespace flowline
