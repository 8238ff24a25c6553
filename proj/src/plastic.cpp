#include "hebbes/plastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hebbes {

int Topology::synapse_count() const {
  int n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l] * layer_sizes[l + 1];
  }
  return n;
}

void Topology::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("topology needs at least 2 layers");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
}

PlasticNetwork::PlasticNetwork(const Topology& topo, double weight_clip)
    : topo_(topo), clip_(weight_clip) {
  topo_.validate();
  weights_.reserve(topo_.layers() - 1);
  for (int l = 0; l + 1 < topo_.layers(); ++l) {
    weights_.emplace_back(
        Matrix::Zero(topo_.layer_sizes[l + 1], topo_.layer_sizes[l]));
  }
  acts_.resize(topo_.layers());
}

static inline Vector squash(const Vector& z, Activation act) {
  if (act == Activation::Linear) return z;
  return z.array().tanh().matrix();
}

Vector PlasticNetwork::forward(const Vector& observation) {
  if (observation.size() != topo_.input_size()) {
    throw std::invalid_argument("observation length does not match input layer");
  }
  // The input layer's activation is the raw observation.
  acts_[0] = observation;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    acts_[l + 1] = squash(weights_[l] * acts_[l], topo_.activation);
  }
  has_acts_ = true;
  return acts_.back();
}

void PlasticNetwork::hebbian_step(const RuleAssignment& assignment) {
  if (static_cast<int>(assignment.rules.size()) != topo_.synapse_count()) {
    throw std::invalid_argument("rule assignment length does not match synapse count");
  }
  if (!has_acts_) {
    throw std::logic_error("hebbian_step before any forward pass");
  }
  std::size_t idx = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Vector& pre = acts_[l];
    const Vector& post = acts_[l + 1];
    Matrix& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c, ++idx) {
        double v = w(r, c) + hebbian_delta(assignment.rules[idx], pre[c], post[r]);
        w(r, c) = std::clamp(v, -clip_, clip_);
      }
    }
  }
}

Vector PlasticNetwork::flat_weights() const {
  Vector out(topo_.synapse_count());
  Eigen::Index idx = 0;
  for (const Matrix& w : weights_) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out[idx++] = w(r, c);
    }
  }
  return out;
}

void PlasticNetwork::set_flat_weights(const Vector& w) {
  if (w.size() != topo_.synapse_count()) {
    throw std::invalid_argument("flat weight vector length does not match synapse count");
  }
  Eigen::Index idx = 0;
  for (Matrix& m : weights_) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = w[idx++];
    }
  }
}

PlasticNetwork init_weights(const Topology& topo, std::uint64_t seed, double lo,
                            double hi, double weight_clip) {
  PlasticNetwork net(topo, weight_clip);
  Rng rng(seed);
  for (Matrix& w : net.weights()) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(lo, hi);
    }
  }
  return net;
}

int RecurrentNetwork::param_count(const Topology& topo) {
  topo.validate();
  if (topo.layers() < 2) return 0;
  int in = topo.layer_sizes[0];
  int hidden = topo.layer_sizes[1];
  int n = 4 * hidden * (in + hidden);
  for (int l = 1; l + 1 < topo.layers(); ++l) {
    n += topo.layer_sizes[l] * topo.layer_sizes[l + 1];
  }
  return n;
}

RecurrentNetwork::RecurrentNetwork(const Topology& topo, const Vector& params)
    : topo_(topo) {
  topo_.validate();
  if (params.size() != param_count(topo)) {
    throw std::invalid_argument("recurrent parameter vector has wrong length");
  }
  int in = topo_.layer_sizes[0];
  int hidden = topo_.layer_sizes[1];
  w_x_.resize(4 * hidden, in);
  w_h_.resize(4 * hidden, hidden);
  Eigen::Index idx = 0;
  auto fill = [&](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = params[idx++];
    }
  };
  fill(w_x_);
  fill(w_h_);
  for (int l = 1; l + 1 < topo_.layers(); ++l) {
    dense_.emplace_back(topo_.layer_sizes[l + 1], topo_.layer_sizes[l]);
    fill(dense_.back());
  }
  reset_state();
}

void RecurrentNetwork::reset_state() {
  int hidden = topo_.layer_sizes[1];
  h_ = Vector::Zero(hidden);
  c_ = Vector::Zero(hidden);
}

Vector RecurrentNetwork::forward(const Vector& observation) {
  if (observation.size() != topo_.input_size()) {
    throw std::invalid_argument("observation length does not match input layer");
  }
  int hidden = topo_.layer_sizes[1];
  Vector gates = w_x_ * observation + w_h_ * h_;
  auto seg = [&](int g) { return gates.segment(g * hidden, hidden); };
  Vector i = (1.0 / (1.0 + (-seg(0).array()).exp())).matrix();
  Vector f = (1.0 / (1.0 + (-seg(1).array()).exp())).matrix();
  Vector g = seg(2).array().tanh().matrix();
  Vector o = (1.0 / (1.0 + (-seg(3).array()).exp())).matrix();
  c_ = (f.array() * c_.array() + i.array() * g.array()).matrix();
  h_ = (o.array() * c_.array().tanh()).matrix();
  Vector x = h_;
  for (const Matrix& w : dense_) {
    x = squash(w * x, topo_.activation);
  }
  return x;
}

}  // namespace hebbes
