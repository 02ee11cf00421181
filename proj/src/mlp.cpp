#include "flowline/mlp.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

namespace flowline {

namespace {

void check_sizes(std::span<const int> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
}

struct Activations {
  std::vector<Eigen::MatrixXd> layers;  // layers[0] = input, layers.back() = output
};

Activations forward_all(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_size()) {
    throw std::invalid_argument(
        fmt::format("input has {} rows, network expects {}", inputs.rows(), net.input_size()));
  }
  Activations acts;
  acts.layers.reserve(net.layer_count() + 1);
  acts.layers.push_back(inputs);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * acts.layers.back();
    z.colwise() += net.biases[l];
    if (l + 1 < net.layer_count()) z = z.cwiseMax(0.0);
    acts.layers.push_back(std::move(z));
  }
  return acts;
}

void check_batch(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
                 std::span<const double> targets) {
  const auto batch = static_cast<std::size_t>(inputs.cols());
  if (batch == 0) throw std::invalid_argument("empty batch");
  if (actions.size() != batch || targets.size() != batch) {
    throw std::invalid_argument("actions and targets must match the batch size");
  }
  for (int a : actions) {
    if (a < 0 || a >= net.output_size()) throw std::invalid_argument("action index outside the output layer");
  }
}

}  // namespace

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    count += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return count;
}

Mlp Mlp::zeros(std::span<const int> layer_sizes) {
  check_sizes(layer_sizes);
  Mlp net;
  net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    net.weights.push_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
    net.biases.push_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
  }
  return net;
}

bool Mlp::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) flat.push_back(biases[l](r));
  }
  return flat;
}

void Mlp::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) throw std::invalid_argument("flat parameter count mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = values[k++];
    }
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l](r) = values[k++];
  }
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layer_sizes != b.layer_sizes) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

Mlp init_params(std::span<const int> layer_sizes, Rng& rng) {
  Mlp net = Mlp::zeros(layer_sizes);
  for (auto& w : net.weights) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  return net;
}

Eigen::VectorXd forward(const Mlp& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.input_size()) {
    throw std::invalid_argument(
        fmt::format("input has {} values, network expects {}", input.size(), net.input_size()));
  }
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Eigen::VectorXd z = net.weights[l] * h + net.biases[l];
    h = l + 1 < net.layer_count() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
  return std::move(forward_all(net, inputs).layers.back());
}

int argmax(const Eigen::VectorXd& q) {
  int best = 0;
  for (Eigen::Index a = 1; a < q.size(); ++a) {
    if (q(a) > q(best)) best = static_cast<int>(a);
  }
  return best;
}

double batch_loss(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
                  std::span<const double> targets) {
  check_batch(net, inputs, actions, targets);
  const Eigen::MatrixXd q = forward_batch(net, inputs);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < q.cols(); ++b) {
    const double err = q(actions[static_cast<std::size_t>(b)], b) - targets[static_cast<std::size_t>(b)];
    loss += err * err;
  }
  return loss / static_cast<double>(q.cols());
}

Mlp backward(const Mlp& net, const Eigen::MatrixXd& inputs, std::span<const int> actions,
             std::span<const double> targets, double* loss) {
  check_batch(net, inputs, actions, targets);
  const Activations acts = forward_all(net, inputs);
  const Eigen::MatrixXd& q = acts.layers.back();
  const double scale = 2.0 / static_cast<double>(inputs.cols());

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < q.cols(); ++b) {
    const int a = actions[static_cast<std::size_t>(b)];
    const double err = q(a, b) - targets[static_cast<std::size_t>(b)];
    total += err * err;
    delta(a, b) = scale * err;
  }
  if (loss != nullptr) *loss = total / static_cast<double>(q.cols());

  Mlp grads = net.zeros_like();
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const Eigen::MatrixXd& below = acts.layers[l];
    grads.weights[l].noalias() = delta * below.transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = net.weights[l].transpose() * delta;
      delta = back.cwiseProduct((below.array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

double global_norm(const Mlp& grads) {
  double sq = 0.0;
  for (std::size_t l = 0; l < grads.layer_count(); ++l) {
    sq += grads.weights[l].squaredNorm() + grads.biases[l].squaredNorm();
  }
  return std::sqrt(sq);
}

AdamState AdamState::for_params(const Mlp& params, double lr) {
  AdamState state;
  state.first_moment = params.zeros_like();
  state.second_moment = params.zeros_like();
  state.lr = lr;
  return state;
}

void adam_step(Mlp& params, const Mlp& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment) ||
      !params.same_shape(state.second_moment)) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    param.array() -= state.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    update(params.weights[l], grads.weights[l], state.first_moment.weights[l], state.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l], state.second_moment.biases[l]);
  }
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format"] = "flowline-mlp";
  doc["version"] = 1;
  doc["layer_sizes"] = net.layer_sizes;
  doc["weights"] = nlohmann::json::array();
  doc["biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weights[l];
    std::vector<double> rows;
    rows.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) rows.push_back(w(r, c));
    }
    doc["weights"].push_back(rows);
    doc["biases"].push_back(std::vector<double>(net.biases[l].data(), net.biases[l].data() + net.biases[l].size()));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << doc.dump() << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.at("format").get<std::string>() != "flowline-mlp" || doc.at("version").get<int>() != 1) {
      throw std::runtime_error("unsupported checkpoint format");
    }
    const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
    Mlp net = Mlp::zeros(sizes);
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (weights.size() != net.layer_count() || biases.size() != net.layer_count()) {
      throw std::runtime_error("layer count mismatch");
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      const auto w = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      auto& W = net.weights[l];
      if (static_cast<Eigen::Index>(w.size()) != W.size() || static_cast<Eigen::Index>(b.size()) != net.biases[l].size()) {
        throw std::runtime_error(fmt::format("layer {} has the wrong number of values", l));
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < W.rows(); ++r) {
        for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = w[k++];
      }
      for (std::size_t r = 0; r < b.size(); ++r) net.biases[l](static_cast<Eigen::Index>(r)) = b[r];
    }
    return net;
  } catch (const std::exception& e) {
    throw std::runtime_error(fmt::format("malformed checkpoint {}: {}", path.string(), e.what()));
  }
}

}  // namespace flowline
