#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flowline/rng.hpp"

namespace flowline {

/// Fully connected network, ReLU on hidden layers, linear output.
/// Also used as the container for gradients and Adam moments, which share
/// the parameter shapes.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Same shapes, all entries zero.
  static Mlp zeros(std::span<const int> layer_sizes);
  Mlp zeros_like() const { return zeros(layer_sizes); }

  bool same_shape(const Mlp& other) const { return layer_sizes == other.layer_sizes; }
  bool all_finite() const;

  /// Flattened view used by the optimizer and the gradient checks:
  /// layer by layer, weights row-major then biases.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  friend bool operator==(const Mlp& a, const Mlp& b);
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp init_params(std::span<const int> layer_sizes, Rng& rng);

/// Q-values for a single input. Throws std::invalid_argument on a size mismatch.
Eigen::VectorXd forward(const Mlp& net, std::span<const double> input);

/// Column-wise batch forward: inputs is input_size x batch.
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs);

/// Greedy action with lowest-index tie-break.
int argmax(const Eigen::VectorXd& q);

/// Gradient of (1/B) * sum_b (Q(x_b)[a_b] - y_b)^2 with respect to every
/// parameter. Only the chosen output unit of each sample carries loss.
/// `loss`, when given, receives the batch loss.
Mlp backward(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
             std::span<const double> targets, double* loss = nullptr);

/// Batch loss matching backward().
double batch_loss(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
                  std::span<const double> targets);

double global_norm(const Mlp& grads);

struct AdamState {
  Mlp first_moment;
  Mlp second_moment;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const Mlp& params, double lr);
};

/// One bias-corrected Adam update. Throws std::invalid_argument when shapes differ.
void adam_step(Mlp& params, const Mlp& grads, AdamState& state);

// Checkpoints are JSON:
//   {"format": "flowline-mlp", "version": 1, "layer_sizes": [...],
//    "weights": [[row-major layer 0], ...], "biases": [[layer 0], ...]}
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
/// Throws std::runtime_error for unreadable or malformed files.
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace flowline
