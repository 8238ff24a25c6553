#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hebbes/harness.hpp"

namespace py = pybind11;
using namespace hebbes;

namespace {

ExperimentConfig config_from_json_str(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hebbian meta-learning: plastic networks, genotype distributions, "
            "evolution strategies and the experiment harness";

  py::register_exception<ConfigError>(m, "ConfigError");

  // ----- plastic networks -----
  py::class_<HebbRule>(m, "HebbRule")
      .def(py::init<>())
      .def(py::init([](double eta, double a, double b, double c, double d) {
             return HebbRule{eta, a, b, c, d};
           }),
           py::arg("eta"), py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"))
      .def_readwrite("eta", &HebbRule::eta)
      .def_readwrite("a", &HebbRule::a)
      .def_readwrite("b", &HebbRule::b)
      .def_readwrite("c", &HebbRule::c)
      .def_readwrite("d", &HebbRule::d)
      .def("__repr__", [](const HebbRule& r) {
        return "HebbRule(eta=" + std::to_string(r.eta) + ", a=" + std::to_string(r.a) +
               ", b=" + std::to_string(r.b) + ", c=" + std::to_string(r.c) +
               ", d=" + std::to_string(r.d) + ")";
      });

  m.def("hebbian_delta", &hebbian_delta, py::arg("rule"), py::arg("pre"), py::arg("post"));

  py::enum_<Activation>(m, "Activation")
      .value("Tanh", Activation::Tanh)
      .value("Linear", Activation::Linear);

  py::class_<Topology>(m, "Topology")
      .def(py::init<std::vector<int>, Activation>(), py::arg("layer_sizes"),
           py::arg("activation") = Activation::Tanh)
      .def_readonly("layer_sizes", &Topology::layer_sizes)
      .def("synapse_count", &Topology::synapse_count);

  py::class_<RuleAssignment>(m, "RuleAssignment")
      .def(py::init<>())
      .def_readwrite("rules", &RuleAssignment::rules);

  py::class_<PlasticNetwork>(m, "PlasticNetwork")
      .def(py::init<const Topology&, double>(), py::arg("topology"),
           py::arg("weight_clip") = 3.0)
      .def("forward", &PlasticNetwork::forward, py::arg("observation"))
      .def("hebbian_step", &PlasticNetwork::hebbian_step, py::arg("assignment"))
      .def("flat_weights", &PlasticNetwork::flat_weights)
      .def("set_flat_weights", &PlasticNetwork::set_flat_weights, py::arg("weights"))
      .def_property_readonly("topology", &PlasticNetwork::topology);

  m.def("init_weights", &init_weights, py::arg("topology"), py::arg("seed"),
        py::arg("lo") = -0.1, py::arg("hi") = 0.1, py::arg("weight_clip") = 3.0);

  py::class_<RecurrentNetwork>(m, "RecurrentNetwork")
      .def(py::init<const Topology&, const Vector&>(), py::arg("topology"),
           py::arg("params"))
      .def_static("param_count", &RecurrentNetwork::param_count, py::arg("topology"))
      .def("reset_state", &RecurrentNetwork::reset_state)
      .def("forward", &RecurrentNetwork::forward, py::arg("observation"));

  // ----- genotype models -----
  py::enum_<ModelKind>(m, "ModelKind")
      .value("PerSynapse", ModelKind::PerSynapse)
      .value("SharedGmm", ModelKind::SharedGmm)
      .value("JointGmm", ModelKind::JointGmm)
      .value("SingleRule", ModelKind::SingleRule)
      .value("FixedRandom", ModelKind::FixedRandom);

  m.def("rho_to_components", &rho_to_components, py::arg("n_synapses"), py::arg("rho"));

  py::class_<Genotype>(m, "Genotype")
      .def(py::init<>())
      .def_readwrite("h", &Genotype::h)
      .def_readwrite("k", &Genotype::k);

  py::class_<ParamGrad>(m, "ParamGrad")
      .def_readwrite("mu", &ParamGrad::mu)
      .def_readwrite("lambda_", &ParamGrad::lambda)
      .def("mu_inf_norm", &ParamGrad::mu_inf_norm)
      .def("lambda_inf_norm", &ParamGrad::lambda_inf_norm);

  py::class_<GenotypeModel>(m, "GenotypeModel")
      .def_static("per_synapse", &GenotypeModel::per_synapse, py::arg("rows"),
                  py::arg("cols"), py::arg("sigma"))
      .def_static("shared_gmm", &GenotypeModel::shared_gmm, py::arg("rows"),
                  py::arg("components"), py::arg("cols"), py::arg("sigma"))
      .def_static("joint_gmm", &GenotypeModel::joint_gmm, py::arg("rows"),
                  py::arg("components"), py::arg("cols"), py::arg("sigma"))
      .def_static("single_rule", &GenotypeModel::single_rule, py::arg("rows"),
                  py::arg("cols"), py::arg("sigma"))
      .def_static("fixed_random", &GenotypeModel::fixed_random, py::arg("rows"),
                  py::arg("components"), py::arg("cols"), py::arg("sigma"),
                  py::arg("assignment_seed"))
      .def_property_readonly("kind", &GenotypeModel::kind)
      .def_property_readonly("rows", &GenotypeModel::rows)
      .def_property_readonly("cols", &GenotypeModel::cols)
      .def_property_readonly("components", &GenotypeModel::components)
      .def_property_readonly("sigma", &GenotypeModel::sigma)
      .def_property("mu", [](const GenotypeModel& g) { return g.mu(); },
                    [](GenotypeModel& g, const Matrix& m) { g.mu() = m; })
      .def_property("lambda_", [](const GenotypeModel& g) { return g.lambda(); },
                    [](GenotypeModel& g, const Matrix& m) { g.lambda() = m; })
      .def_property_readonly("fixed_assignment", &GenotypeModel::fixed_assignment)
      .def("init_mu_gaussian", &GenotypeModel::init_mu_gaussian, py::arg("stddev"),
           py::arg("seed"))
      .def("sample", &GenotypeModel::sample, py::arg("seed"))
      .def("log_prob", &GenotypeModel::log_prob, py::arg("genotype"))
      .def("grad_log_prob", &GenotypeModel::grad_log_prob, py::arg("genotype"))
      .def("responsibilities", &GenotypeModel::responsibilities, py::arg("h"));

  m.def("materialize", &materialize, py::arg("genotype"), py::arg("topology"));

  // ----- evolution strategies -----
  py::enum_<Updater>(m, "Updater").value("Sgd", Updater::Sgd).value("Adam", Updater::Adam);
  py::enum_<Shaping>(m, "Shaping")
      .value("CenteredRanks", Shaping::CenteredRanks)
      .value("Raw", Shaping::Raw);

  py::class_<EsConfig>(m, "EsConfig")
      .def(py::init<>())
      .def_readwrite("population_size", &EsConfig::population_size)
      .def_readwrite("learning_rate", &EsConfig::learning_rate)
      .def_readwrite("decay", &EsConfig::decay)
      .def_readwrite("updater", &EsConfig::updater)
      .def_readwrite("adam_beta1", &EsConfig::adam_beta1)
      .def_readwrite("adam_beta2", &EsConfig::adam_beta2)
      .def_readwrite("adam_epsilon", &EsConfig::adam_epsilon)
      .def_readwrite("antithetic", &EsConfig::antithetic)
      .def_readwrite("shaping", &EsConfig::shaping);

  py::class_<Candidate>(m, "Candidate")
      .def_readwrite("genotype", &Candidate::genotype)
      .def_readwrite("sample_seed", &Candidate::sample_seed);

  m.def("current_lr", &current_lr, py::arg("config"), py::arg("generation"));
  m.def("shape_fitness", &shape_fitness, py::arg("raw"), py::arg("mode"));
  m.def("sample_population", &sample_population, py::arg("model"), py::arg("config"),
        py::arg("generation"), py::arg("base_seed"));
  m.def("estimate_gradient", &estimate_gradient, py::arg("population"),
        py::arg("shaped"), py::arg("model"));
  m.def("per_synapse_fast_update", &per_synapse_fast_update, py::arg("mu"),
        py::arg("eps_samples"), py::arg("shaped"), py::arg("alpha"), py::arg("sigma"));

  // ----- environments -----
  py::enum_<TaskId>(m, "TaskId")
      .value("CartPoleVar", TaskId::CartPoleVar)
      .value("ReacherVar", TaskId::ReacherVar);

  py::class_<VariationParams>(m, "VariationParams")
      .def(py::init<>())
      .def_readwrite("friction_mult", &VariationParams::friction_mult)
      .def_readwrite("push_force", &VariationParams::push_force)
      .def_readwrite("pole_len_mult", &VariationParams::pole_len_mult)
      .def_readwrite("link1_mult", &VariationParams::link1_mult)
      .def_readwrite("link2_mult", &VariationParams::link2_mult)
      .def_readwrite("motor_mask", &VariationParams::motor_mask);

  py::class_<EnvSpec>(m, "EnvSpec")
      .def(py::init<>())
      .def_readwrite("task", &EnvSpec::task)
      .def_readwrite("variation_id", &EnvSpec::variation_id)
      .def_readwrite("params", &EnvSpec::params)
      .def_readwrite("max_steps", &EnvSpec::max_steps)
      .def_readwrite("obs_dim", &EnvSpec::obs_dim)
      .def_readwrite("act_dim", &EnvSpec::act_dim)
      .def_readwrite("reset_scale", &EnvSpec::reset_scale);

  py::class_<MetaTask>(m, "MetaTask")
      .def_readonly("task", &MetaTask::task)
      .def_readonly("held_out_id", &MetaTask::held_out_id)
      .def_readonly("train_specs", &MetaTask::train_specs)
      .def_readonly("test_spec", &MetaTask::test_spec);

  py::class_<EpisodeResult>(m, "EpisodeResult")
      .def_readonly("fitness", &EpisodeResult::fitness)
      .def_readonly("steps", &EpisodeResult::steps)
      .def_readonly("terminated_early", &EpisodeResult::terminated_early);

  m.def("make_variation", &make_variation, py::arg("task"), py::arg("variation_id"));
  m.def("variation_name", &variation_name, py::arg("task"), py::arg("variation_id"));
  m.def("make_meta_task", &make_meta_task, py::arg("task"), py::arg("held_out_id"));
  m.def("reward_bound", &reward_bound, py::arg("task"));
  m.def("floor_fitness", &floor_fitness, py::arg("spec"));
  m.def("random_policy_floor", &random_policy_floor, py::arg("spec"),
        py::arg("episodes"), py::arg("seed"));

  py::class_<Environment>(m, "Environment")
      .def(py::init<const EnvSpec&>(), py::arg("spec"))
      .def("reset", &Environment::reset, py::arg("seed"))
      .def("step",
           [](Environment& env, const Vector& action) {
             auto r = env.step(action);
             return py::make_tuple(r.obs, r.reward, r.done, r.aborted);
           },
           py::arg("action"))
      .def_property_readonly("state", &Environment::state)
      .def_property_readonly("steps_taken", &Environment::steps_taken);

  // ----- oracles -----
  py::class_<GradCheckReport>(m, "GradCheckReport")
      .def_readonly("max_rel_error", &GradCheckReport::max_rel_error)
      .def_readonly("argmax_coordinate", &GradCheckReport::argmax_coordinate)
      .def_readonly("step", &GradCheckReport::step)
      .def_readonly("trials", &GradCheckReport::trials)
      .def_readonly("skipped", &GradCheckReport::skipped);

  m.def("finite_diff", &finite_diff, py::arg("fn"), py::arg("theta"), py::arg("step"));
  m.def("brute_force_gmm_log_prob", &brute_force_gmm_log_prob, py::arg("mu"),
        py::arg("lambda_"), py::arg("sigma"), py::arg("h"));
  m.def("check_model_gradients", &check_model_gradients, py::arg("kind"),
        py::arg("trials"), py::arg("seed"), py::arg("step") = 1e-5);

  // ----- harness -----
  py::enum_<BaselineKind>(m, "BaselineKind")
      .value("Hebbian", BaselineKind::Hebbian)
      .value("Static", BaselineKind::Static)
      .value("Recurrent", BaselineKind::Recurrent);

  py::class_<RolloutOptions>(m, "RolloutOptions")
      .def(py::init<>())
      .def_readwrite("topology", &RolloutOptions::topology)
      .def_readwrite("baseline", &RolloutOptions::baseline)
      .def_readwrite("weight_clip", &RolloutOptions::weight_clip)
      .def_readwrite("init_low", &RolloutOptions::init_low)
      .def_readwrite("init_high", &RolloutOptions::init_high);

  m.def("rollout", &rollout, py::arg("genotype"), py::arg("spec"),
        py::arg("episode_seed"), py::arg("options"));

  m.def(
      "train_from_json",
      [](const std::string& config_json, const std::string& out_dir, int workers,
         const std::string& resume) {
        ExperimentConfig cfg = config_from_json_str(config_json);
        TrainResult r = train(cfg, out_dir, workers, resume);
        return py::make_tuple(r.status == TrainStatus::Done, r.generation,
                              r.checkpoint_path.string());
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("workers") = 1,
      py::arg("resume") = "");

  m.def(
      "evaluate_from_json",
      [](const std::string& config_json, const std::string& checkpoint,
         const std::string& out_dir, int workers) {
        ExperimentConfig cfg = config_from_json_str(config_json);
        EsState state = load_checkpoint(checkpoint, cfg.es, config_hash(cfg));
        auto cells = evaluate(cfg, state, workers);
        write_evaluation(cfg, cells, out_dir);
        return eval_to_json(cfg, cells).dump();
      },
      py::arg("config_json"), py::arg("checkpoint"), py::arg("out_dir"),
      py::arg("workers") = 1);

  m.def(
      "verify_gradients",
      [](int trials, std::uint64_t seed) {
        VerifyResult v = run_verify(trials, seed);
        return verify_to_json(v).dump();
      },
      py::arg("trials") = 100, py::arg("seed") = 1);
}
