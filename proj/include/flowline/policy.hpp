#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "flowline/env.hpp"
#include "flowline/mlp.hpp"

namespace flowline {

/// Decision rule queried at every decision point of an episode.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  /// Called after Environment::reset with the episode's seed.
  virtual void begin_episode(std::uint64_t /*episode_seed*/) {}
  virtual Action act(const Environment& env) = 0;
  /// Fresh copy for another worker thread.
  virtual std::unique_ptr<Policy> clone() const = 0;
};

/// Acts greedily on a Q-network.
class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(Mlp params, std::string name = "ddqn")
      : params_(std::move(params)), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  Action act(const Environment& env) override { return Action{argmax(forward(params_, env.observation().values))}; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<GreedyPolicy>(*this); }

  const Mlp& params() const { return params_; }

 private:
  Mlp params_;
  std::string name_;
};

}  // namespace flowline
