#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "hebbes/rng.hpp"

namespace hebbes {

// Row-major so flat synapse indexing equals the storage order of a weight
// matrix: layers in feedforward order, then post-neuron row, then pre-neuron
// column. Assignment logits bind to this index, so it must never change.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr int kRuleDim = 5;

// One synapse's plasticity rule: dw = eta * (a*pre*post + b*pre + c*post + d).
struct HebbRule {
  double eta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
};

inline double hebbian_delta(const HebbRule& r, double pre, double post) {
  return r.eta * (r.a * pre * post + r.b * pre + r.c * post + r.d);
}

enum class Activation { Tanh, Linear };

struct Topology {
  std::vector<int> layer_sizes;
  Activation activation = Activation::Tanh;

  Topology() = default;
  explicit Topology(std::vector<int> sizes, Activation act = Activation::Tanh)
      : layer_sizes(std::move(sizes)), activation(act) {
    validate();
  }

  int layers() const { return static_cast<int>(layer_sizes.size()); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }

  // N = sum over adjacent layer pairs of in*out. No biases.
  int synapse_count() const;
  void validate() const;
};

struct RuleAssignment {
  std::vector<HebbRule> rules;  // length N, flat synapse order
};

// Feedforward network whose weights are episode-local state: randomly
// initialized at episode start and rewritten by the Hebbian step after every
// forward pass. A non-plastic network is the same object with hebbian_step
// simply never called.
class PlasticNetwork {
 public:
  explicit PlasticNetwork(const Topology& topo, double weight_clip = 3.0);

  Vector forward(const Vector& observation);
  void hebbian_step(const RuleAssignment& assignment);

  const Topology& topology() const { return topo_; }
  double weight_clip() const { return clip_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Vector>& last_activations() const { return acts_; }
  bool has_activations() const { return has_acts_; }

  // Weights as one vector in flat synapse order (direct-weight genomes).
  Vector flat_weights() const;
  void set_flat_weights(const Vector& w);

 private:
  Topology topo_;
  std::vector<Matrix> weights_;
  std::vector<Vector> acts_;
  double clip_;
  bool has_acts_ = false;
};

// i.i.d. uniform weights on [lo, hi]; same seed gives bitwise-equal networks.
PlasticNetwork init_weights(const Topology& topo, std::uint64_t seed,
                            double lo = -0.1, double hi = 0.1,
                            double weight_clip = 3.0);

// Baseline with the first dense layer replaced by an LSTM cell (gates i,f,g,o,
// no biases, like the rest of the network family). Hidden and cell state are
// zeroed at episode start. All parameters come from one flat vector.
class RecurrentNetwork {
 public:
  RecurrentNetwork(const Topology& topo, const Vector& params);

  static int param_count(const Topology& topo);

  void reset_state();
  Vector forward(const Vector& observation);

  const Topology& topology() const { return topo_; }

 private:
  Topology topo_;
  Matrix w_x_;  // 4H x input
  Matrix w_h_;  // 4H x H
  std::vector<Matrix> dense_;
  Vector h_, c_;
};

}  // namespace hebbes
