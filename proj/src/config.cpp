#include "hebbes/config.hpp"

#include <fstream>
#include <set>

namespace hebbes {

std::string to_string(BaselineKind b) {
  switch (b) {
    case BaselineKind::Hebbian: return "hebbian";
    case BaselineKind::Static: return "static";
    case BaselineKind::Recurrent: return "recurrent";
  }
  return "unknown";
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "hebbian") return BaselineKind::Hebbian;
  if (s == "static") return BaselineKind::Static;
  if (s == "recurrent") return BaselineKind::Recurrent;
  throw ConfigError("unknown baseline: " + s);
}

std::string to_string(EvalGenotypeMode m) {
  return m == EvalGenotypeMode::Sample ? "sample" : "mean";
}

EvalGenotypeMode eval_mode_from_string(const std::string& s) {
  if (s == "sample") return EvalGenotypeMode::Sample;
  if (s == "mean") return EvalGenotypeMode::Mean;
  throw ConfigError("unknown eval_genotype mode: " + s);
}

Topology ExperimentConfig::make_topology() const {
  std::vector<int> sizes = topology;
  if (sizes.empty()) {
    sizes = task == TaskId::CartPoleVar ? std::vector<int>{4, 8, 1}
                                        : std::vector<int>{8, 8, 2};
  }
  return Topology(sizes);
}

int ExperimentConfig::genotype_rows() const {
  Topology topo = make_topology();
  switch (baseline) {
    case BaselineKind::Hebbian: return topo.synapse_count();
    case BaselineKind::Static: return topo.synapse_count();
    case BaselineKind::Recurrent: return RecurrentNetwork::param_count(topo);
  }
  return 0;
}

int ExperimentConfig::genotype_cols() const {
  return baseline == BaselineKind::Hebbian ? kRuleDim : 1;
}

int ExperimentConfig::effective_components() const {
  int n = genotype_rows();
  if (m_override > 0) return m_override;
  switch (model) {
    case ModelKind::PerSynapse: return 1;
    case ModelKind::SingleRule: return 1;
    default: return rho_to_components(n, rho);
  }
}

void ExperimentConfig::validate() const {
  if (held_out_id < 1 || held_out_id > 5) {
    throw ConfigError("held_out_id must lie in 1..5");
  }
  Topology topo = make_topology();
  EnvSpec probe = make_variation(task, 1);
  if (topo.input_size() != probe.obs_dim || topo.output_size() != probe.act_dim) {
    throw ConfigError("topology endpoints must match the task observation/action sizes");
  }
  if (generations < 0) throw ConfigError("generations must be >= 0");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (episodes_per_variation < 1 || episodes_per_variation > 1024) {
    throw ConfigError("episodes_per_variation must lie in 1..1024");
  }
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!(mu_init_std >= 0.0)) throw ConfigError("mu_init_std must be >= 0");
  if (!(weight_clip > 0.0)) throw ConfigError("weight_clip must be positive");
  if (!(init_low <= init_high)) throw ConfigError("init_low must not exceed init_high");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");

  if (baseline == BaselineKind::Hebbian) {
    int n = genotype_rows();
    bool allowed = rho == 1 || rho == 16 || rho == 32 || rho == 64 ||
                   rho == 128 || rho == 256 || rho == n;
    if (!allowed && m_override <= 0) {
      throw ConfigError("rho must be one of {1,16,32,64,128,256,N} unless m_override is set");
    }
    if (m_override > n) throw ConfigError("m_override exceeds synapse count");
    if (rho > n) throw ConfigError("rho exceeds synapse count");
  } else if (model != ModelKind::PerSynapse) {
    throw ConfigError("static/recurrent baselines use the per-synapse weight model");
  }
  try {
    es.validate(model == ModelKind::PerSynapse);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

const std::set<std::string> kTopKeys = {
    "task", "held_out_id", "model", "rho", "m_override", "baseline",
    "topology", "es", "generations", "eval_episodes", "episodes_per_variation",
    "eval_genotype", "seed", "sigma", "mu_init_std", "weight_clip",
    "init_low", "init_high", "checkpoint_every"};

const std::set<std::string> kEsKeys = {
    "population_size", "learning_rate", "decay", "updater", "adam_beta1",
    "adam_beta2", "adam_epsilon", "antithetic", "fitness_shaping"};

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kTopKeys.count(it.key())) throw ConfigError("unknown config key: " + it.key());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("task")) cfg.task = task_from_string(j.at("task").get<std::string>());
    read_field(j, "held_out_id", cfg.held_out_id);
    if (j.contains("model")) {
      cfg.model = model_kind_from_string(j.at("model").get<std::string>());
    }
    read_field(j, "rho", cfg.rho);
    read_field(j, "m_override", cfg.m_override);
    if (j.contains("baseline")) {
      cfg.baseline = baseline_from_string(j.at("baseline").get<std::string>());
    }
    read_field(j, "topology", cfg.topology);
    read_field(j, "generations", cfg.generations);
    read_field(j, "eval_episodes", cfg.eval_episodes);
    read_field(j, "episodes_per_variation", cfg.episodes_per_variation);
    if (j.contains("eval_genotype")) {
      cfg.eval_genotype = eval_mode_from_string(j.at("eval_genotype").get<std::string>());
    }
    read_field(j, "seed", cfg.seed);
    read_field(j, "sigma", cfg.sigma);
    read_field(j, "mu_init_std", cfg.mu_init_std);
    read_field(j, "weight_clip", cfg.weight_clip);
    read_field(j, "init_low", cfg.init_low);
    read_field(j, "init_high", cfg.init_high);
    read_field(j, "checkpoint_every", cfg.checkpoint_every);
    if (j.contains("es")) {
      const auto& e = j.at("es");
      if (!e.is_object()) throw ConfigError("es must be an object");
      for (auto it = e.begin(); it != e.end(); ++it) {
        if (!kEsKeys.count(it.key())) throw ConfigError("unknown es key: " + it.key());
      }
      read_field(e, "population_size", cfg.es.population_size);
      read_field(e, "learning_rate", cfg.es.learning_rate);
      read_field(e, "decay", cfg.es.decay);
      if (e.contains("updater")) {
        cfg.es.updater = updater_from_string(e.at("updater").get<std::string>());
      }
      read_field(e, "adam_beta1", cfg.es.adam_beta1);
      read_field(e, "adam_beta2", cfg.es.adam_beta2);
      read_field(e, "adam_epsilon", cfg.es.adam_epsilon);
      read_field(e, "antithetic", cfg.es.antithetic);
      if (e.contains("fitness_shaping")) {
        cfg.es.shaping = shaping_from_string(e.at("fitness_shaping").get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad config value: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  // Normalize the sharing ratio for the degenerate kinds so reports agree.
  if (cfg.model == ModelKind::PerSynapse) cfg.rho = 1;
  if (cfg.model == ModelKind::SingleRule) cfg.rho = cfg.genotype_rows();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config parse error: ") + ex.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["task"] = to_string(cfg.task);
  j["held_out_id"] = cfg.held_out_id;
  j["model"] = to_string(cfg.model);
  j["rho"] = cfg.rho;
  j["m_override"] = cfg.m_override;
  j["baseline"] = to_string(cfg.baseline);
  j["topology"] = cfg.make_topology().layer_sizes;
  j["generations"] = cfg.generations;
  j["eval_episodes"] = cfg.eval_episodes;
  j["episodes_per_variation"] = cfg.episodes_per_variation;
  j["eval_genotype"] = to_string(cfg.eval_genotype);
  j["seed"] = cfg.seed;
  j["sigma"] = cfg.sigma;
  j["mu_init_std"] = cfg.mu_init_std;
  j["weight_clip"] = cfg.weight_clip;
  j["init_low"] = cfg.init_low;
  j["init_high"] = cfg.init_high;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["es"] = {{"population_size", cfg.es.population_size},
             {"learning_rate", cfg.es.learning_rate},
             {"decay", cfg.es.decay},
             {"updater", to_string(cfg.es.updater)},
             {"adam_beta1", cfg.es.adam_beta1},
             {"adam_beta2", cfg.es.adam_beta2},
             {"adam_epsilon", cfg.es.adam_epsilon},
             {"antithetic", cfg.es.antithetic},
             {"fitness_shaping", to_string(cfg.es.shaping)}};
  return j;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

GenotypeModel build_model(const ExperimentConfig& cfg) {
  int rows = cfg.genotype_rows();
  int cols = cfg.genotype_cols();
  int m = cfg.effective_components();
  GenotypeModel model = [&] {
    if (cfg.baseline != BaselineKind::Hebbian) {
      return GenotypeModel::per_synapse(rows, cols, cfg.sigma);
    }
    switch (cfg.model) {
      case ModelKind::PerSynapse:
        return GenotypeModel::per_synapse(rows, cols, cfg.sigma);
      case ModelKind::SharedGmm:
        return GenotypeModel::shared_gmm(rows, m, cols, cfg.sigma);
      case ModelKind::JointGmm:
        return GenotypeModel::joint_gmm(rows, m, cols, cfg.sigma);
      case ModelKind::SingleRule:
        return GenotypeModel::single_rule(rows, cols, cfg.sigma);
      case ModelKind::FixedRandom:
        return GenotypeModel::fixed_random(
            rows, m, cols, cfg.sigma,
            derive_seed(cfg.seed, SeedPurpose::RuleAssignment));
    }
    throw std::logic_error("unreachable");
  }();
  model.init_mu_gaussian(cfg.mu_init_std, derive_seed(cfg.seed, SeedPurpose::MuInit));
  return model;
}

}  // namespace hebbes
