#include "hebbes/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hebbes {

namespace {

constexpr double kThetaLimit = 0.2094395102393195;  // 12 degrees
constexpr double kXLimit = 2.4;
constexpr double kCartActionPenalty = 0.01;
constexpr int kCartMaxSteps = 500;
constexpr int kReacherMaxSteps = 200;
constexpr double kReacherRewardBound = 2.5;
constexpr double kCartResetRange = 0.05;
constexpr double kReacherAngleRange = 0.1;
constexpr double kReacherVelRange = 0.05;

double clamp_action(double a) { return std::clamp(a, -1.0, 1.0); }

}  // namespace

std::string to_string(TaskId task) {
  return task == TaskId::CartPoleVar ? "cartpole-var" : "reacher-var";
}

TaskId task_from_string(const std::string& s) {
  if (s == "cartpole-var") return TaskId::CartPoleVar;
  if (s == "reacher-var") return TaskId::ReacherVar;
  throw std::invalid_argument("unknown task: " + s);
}

EnvSpec make_variation(TaskId task, int variation_id) {
  if (variation_id < 1 || variation_id > 5) {
    throw std::invalid_argument("variation id must lie in 1..5");
  }
  EnvSpec spec;
  spec.task = task;
  spec.variation_id = variation_id;
  if (task == TaskId::CartPoleVar) {
    spec.max_steps = kCartMaxSteps;
    spec.obs_dim = 4;
    spec.act_dim = 1;
    switch (variation_id) {
      case 2: spec.params.friction_mult = 2.0; break;
      case 3: spec.params.friction_mult = 0.5; break;
      case 4: spec.params.push_force = -1.0; break;
      case 5: spec.params.push_force = 1.0; break;
      default: break;
    }
  } else {
    spec.max_steps = kReacherMaxSteps;
    spec.obs_dim = 8;
    spec.act_dim = 2;
    switch (variation_id) {
      case 2: spec.params.motor_mask = {0.0, 1.0}; break;
      case 3: spec.params.motor_mask = {1.0, 0.0}; break;
      case 4: spec.params.link1_mult = 1.5; break;
      case 5: spec.params.link2_mult = 1.5; break;
      default: break;
    }
  }
  return spec;
}

std::string variation_name(TaskId task, int variation_id) {
  static const char* cart[] = {"default", "double-friction", "half-friction",
                               "push-west", "push-east"};
  static const char* reach[] = {"default", "damage-motor-1", "damage-motor-2",
                                "long-link-1", "long-link-2"};
  if (variation_id < 1 || variation_id > 5) {
    throw std::invalid_argument("variation id must lie in 1..5");
  }
  return task == TaskId::CartPoleVar ? cart[variation_id - 1]
                                     : reach[variation_id - 1];
}

MetaTask make_meta_task(TaskId task, int held_out_id) {
  if (held_out_id < 1 || held_out_id > 5) {
    throw std::invalid_argument("held-out variation id must lie in 1..5");
  }
  MetaTask meta;
  meta.task = task;
  meta.held_out_id = held_out_id;
  for (int v = 1; v <= 5; ++v) {
    if (v == held_out_id) continue;
    meta.train_specs.push_back(make_variation(task, v));
  }
  meta.test_spec = make_variation(task, held_out_id);
  return meta;
}

double reward_bound(TaskId task) {
  return task == TaskId::CartPoleVar ? 1.0 : kReacherRewardBound;
}

double floor_fitness(const EnvSpec& spec) {
  return -reward_bound(spec.task) * spec.max_steps;
}

CartPoleParams cartpole_params(const VariationParams& v) {
  CartPoleParams p;
  p.half_length *= v.pole_len_mult;
  p.friction *= v.friction_mult;
  p.push = v.push_force;
  return p;
}

Eigen::Vector4d cartpole_step(const Eigen::Vector4d& state, double action,
                              const CartPoleParams& p) {
  double x = state[0], x_dot = state[1], theta = state[2], theta_dot = state[3];
  double total_mass = p.mass_cart + p.mass_pole;
  double polemass_length = p.mass_pole * p.half_length;
  double h = p.dt / p.substeps;
  for (int s = 0; s < p.substeps; ++s) {
    double force = p.force_mag * action + p.push - p.friction * x_dot;
    double sin_t = std::sin(theta);
    double cos_t = std::cos(theta);
    double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
    double theta_acc =
        (p.gravity * sin_t - cos_t * temp) /
        (p.half_length * (4.0 / 3.0 - p.mass_pole * cos_t * cos_t / total_mass));
    double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
    x_dot += h * x_acc;
    theta_dot += h * theta_acc;
    x += h * x_dot;
    theta += h * theta_dot;
  }
  return {x, x_dot, theta, theta_dot};
}

double cartpole_energy(const Eigen::Vector4d& state, const CartPoleParams& p) {
  double x_dot = state[1], theta = state[2], theta_dot = state[3];
  double l = p.half_length;
  double vcm2 = x_dot * x_dot + 2.0 * l * theta_dot * x_dot * std::cos(theta) +
                l * l * theta_dot * theta_dot;
  double kinetic = 0.5 * p.mass_cart * x_dot * x_dot + 0.5 * p.mass_pole * vcm2 +
                   0.5 * (p.mass_pole * l * l / 3.0) * theta_dot * theta_dot;
  double potential = p.mass_pole * p.gravity * l * std::cos(theta);
  return kinetic + potential;
}

ReacherParams reacher_params(const VariationParams& v) {
  ReacherParams p;
  p.link1 *= v.link1_mult;
  p.link2 *= v.link2_mult;
  p.motor_mask = v.motor_mask;
  return p;
}

Eigen::Vector4d reacher_step(const Eigen::Vector4d& state,
                             const Eigen::Vector2d& action,
                             const ReacherParams& p) {
  double th1 = state[0], th2 = state[1], w1 = state[2], w2 = state[3];
  double i1 = p.mass * p.link1 * p.link1 / 3.0;
  double i2 = p.mass * p.link2 * p.link2 / 3.0;
  double h = p.dt / p.substeps;
  for (int s = 0; s < p.substeps; ++s) {
    double a1 = (p.torque_max * action[0] * p.motor_mask[0] - p.damping * w1) / i1;
    double a2 = (p.torque_max * action[1] * p.motor_mask[1] - p.damping * w2) / i2;
    w1 += h * a1;
    w2 += h * a2;
    th1 += h * w1;
    th2 += h * w2;
  }
  return {th1, th2, w1, w2};
}

Eigen::Vector2d reacher_end_effector(double theta1, double theta2,
                                     const ReacherParams& p) {
  double x = p.link1 * std::cos(theta1) + p.link2 * std::cos(theta1 + theta2);
  double y = p.link1 * std::sin(theta1) + p.link2 * std::sin(theta1 + theta2);
  return {x, y};
}

Environment::Environment(const EnvSpec& spec)
    : spec_(spec), cart_(cartpole_params(spec.params)),
      reach_(reacher_params(spec.params)), state_(Eigen::Vector4d::Zero()) {}

Vector Environment::reset(std::uint64_t seed) {
  Rng rng(seed);
  steps_ = 0;
  done_ = false;
  double s = spec_.reset_scale;
  if (spec_.task == TaskId::CartPoleVar) {
    for (int i = 0; i < 4; ++i) {
      state_[i] = s * rng.uniform(-kCartResetRange, kCartResetRange);
    }
  } else {
    state_[0] = s * rng.uniform(-kReacherAngleRange, kReacherAngleRange);
    state_[1] = s * rng.uniform(-kReacherAngleRange, kReacherAngleRange);
    state_[2] = s * rng.uniform(-kReacherVelRange, kReacherVelRange);
    state_[3] = s * rng.uniform(-kReacherVelRange, kReacherVelRange);
  }
  return observe();
}

Vector Environment::observe() const {
  if (spec_.task == TaskId::CartPoleVar) {
    Vector obs(4);
    obs[0] = state_[0] / kXLimit;
    obs[1] = state_[1] / 3.0;
    obs[2] = state_[2] / kThetaLimit;
    obs[3] = state_[3] / 3.0;
    return obs;
  }
  Vector obs(8);
  Eigen::Vector2d ee = reacher_end_effector(state_[0], state_[1], reach_);
  obs[0] = std::sin(state_[0]);
  obs[1] = std::cos(state_[0]);
  obs[2] = std::sin(state_[1]);
  obs[3] = std::cos(state_[1]);
  obs[4] = state_[2] / 10.0;
  obs[5] = state_[3] / 10.0;
  obs[6] = (reach_.target_x - ee[0]) / kReacherRewardBound;
  obs[7] = (reach_.target_y - ee[1]) / kReacherRewardBound;
  return obs;
}

Environment::StepResult Environment::step(const Vector& action) {
  StepResult out;
  if (action.size() != spec_.act_dim) {
    throw std::invalid_argument("action dimension does not match task");
  }
  if (done_) {
    throw std::logic_error("step on a finished episode");
  }
  if (!action.allFinite()) {
    done_ = true;
    out.done = true;
    out.aborted = true;
    out.obs = observe();
    return out;
  }
  ++steps_;
  if (spec_.task == TaskId::CartPoleVar) {
    double a = clamp_action(action[0]);
    state_ = cartpole_step(state_, a, cart_);
    out.reward = 1.0 - kCartActionPenalty * a * a;
    bool failed = std::abs(state_[0]) > kXLimit || std::abs(state_[2]) > kThetaLimit;
    out.done = failed || steps_ >= spec_.max_steps;
    done_ = out.done;
  } else {
    Eigen::Vector2d a{clamp_action(action[0]), clamp_action(action[1])};
    state_ = reacher_step(state_, a, reach_);
    Eigen::Vector2d ee = reacher_end_effector(state_[0], state_[1], reach_);
    double dist = std::hypot(ee[0] - reach_.target_x, ee[1] - reach_.target_y);
    out.reward = -dist;
    out.done = steps_ >= spec_.max_steps;
    done_ = out.done;
  }
  out.obs = observe();
  return out;
}

double random_policy_floor(const EnvSpec& spec, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("episodes must be positive");
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    std::uint64_t ep_seed = derive_seed(seed, SeedPurpose::FloorEpisode, e);
    Environment env(spec);
    env.reset(derive_seed(ep_seed, SeedPurpose::EnvReset));
    Rng rng(ep_seed);
    double fitness = 0.0;
    while (true) {
      Vector a(spec.act_dim);
      for (int i = 0; i < spec.act_dim; ++i) a[i] = rng.uniform(-1.0, 1.0);
      auto r = env.step(a);
      fitness += r.reward;
      if (r.done) break;
    }
    total += fitness;
  }
  return total / episodes;
}

}  // namespace hebbes
