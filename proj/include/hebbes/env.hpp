#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hebbes/plastic.hpp"

namespace hebbes {

enum class TaskId { CartPoleVar, ReacherVar };

std::string to_string(TaskId task);
TaskId task_from_string(const std::string& s);

// Named physical coefficients a variation may change. Identity values leave
// the nominal dynamics untouched.
struct VariationParams {
  // cartpole-var
  double friction_mult = 1.0;  // scales the viscous cart friction
  double push_force = 0.0;     // constant lateral force on the cart, signed
  double pole_len_mult = 1.0;
  // reacher-var
  double link1_mult = 1.0;
  double link2_mult = 1.0;
  std::array<double, 2> motor_mask{1.0, 1.0};  // 0 kills a motor
};

struct EnvSpec {
  TaskId task = TaskId::CartPoleVar;
  int variation_id = 1;
  VariationParams params;
  int max_steps = 0;
  int obs_dim = 0;
  int act_dim = 0;
  double reset_scale = 1.0;  // scales the documented reset perturbation ranges
};

// The five-variation preset table. Variation 1 is always the unmodified
// dynamics; 2/3 and 4/5 are mirrored pairs (see data/variations.json for the
// shipped copy of this table).
EnvSpec make_variation(TaskId task, int variation_id);
std::string variation_name(TaskId task, int variation_id);

struct MetaTask {
  TaskId task;
  int held_out_id;
  std::vector<EnvSpec> train_specs;  // the four remaining variations, id order
  EnvSpec test_spec;
};

MetaTask make_meta_task(TaskId task, int held_out_id);

struct EpisodeResult {
  double fitness = 0.0;
  int steps = 0;
  bool terminated_early = false;
};

// |per-step reward| never exceeds this for any variation of the task.
double reward_bound(TaskId task);
// Fitness assigned to aborted (non-finite policy) episodes.
double floor_fitness(const EnvSpec& spec);

// ----- closed-form dynamics, exposed for direct checking -----

struct CartPoleParams {
  double gravity = 9.8;
  double mass_cart = 1.0;
  double mass_pole = 0.1;
  double half_length = 0.5;
  double force_mag = 10.0;
  double friction = 0.5;  // viscous, force per unit cart velocity
  double push = 0.0;
  double dt = 0.02;
  int substeps = 20;
};

CartPoleParams cartpole_params(const VariationParams& v);

// One control step (dt split into substeps of semi-implicit Euler).
// State layout: [x, x_dot, theta, theta_dot], theta = 0 upright.
Eigen::Vector4d cartpole_step(const Eigen::Vector4d& state, double action,
                              const CartPoleParams& p);
// Total mechanical energy of the cart/pole system (rod pole model).
double cartpole_energy(const Eigen::Vector4d& state, const CartPoleParams& p);

struct ReacherParams {
  double link1 = 0.5;
  double link2 = 0.5;
  double mass = 1.0;      // per link
  double torque_max = 1.0;
  double damping = 0.1;
  std::array<double, 2> motor_mask{1.0, 1.0};
  double target_x = 0.565685424949238;  // radius 0.8 at 45 degrees
  double target_y = 0.565685424949238;
  double dt = 0.02;
  int substeps = 2;
};

ReacherParams reacher_params(const VariationParams& v);

// State layout: [theta1, theta2, omega1, omega2].
Eigen::Vector4d reacher_step(const Eigen::Vector4d& state,
                             const Eigen::Vector2d& action,
                             const ReacherParams& p);
Eigen::Vector2d reacher_end_effector(double theta1, double theta2,
                                     const ReacherParams& p);

// ----- episodic interface -----

class Environment {
 public:
  explicit Environment(const EnvSpec& spec);

  // Initial state is a seeded perturbation of the rest state.
  Vector reset(std::uint64_t seed);

  struct StepResult {
    Vector obs;
    double reward = 0.0;
    bool done = false;
    bool aborted = false;  // non-finite action; episode forfeits to floor fitness
  };
  StepResult step(const Vector& action);

  const EnvSpec& spec() const { return spec_; }
  Eigen::Vector4d state() const { return state_; }
  int steps_taken() const { return steps_; }

 private:
  Vector observe() const;

  EnvSpec spec_;
  CartPoleParams cart_;
  ReacherParams reach_;
  Eigen::Vector4d state_;
  int steps_ = 0;
  bool done_ = false;
};

// Mean fitness of a uniform-random policy; the recorded floor baseline.
double random_policy_floor(const EnvSpec& spec, int episodes, std::uint64_t seed);

}  // namespace hebbes
