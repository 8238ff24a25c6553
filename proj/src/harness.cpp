#include "hebbes/harness.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace hebbes {

namespace fs = std::filesystem;

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

RolloutOptions rollout_options(const ExperimentConfig& cfg) {
  RolloutOptions opt;
  opt.topology = cfg.make_topology();
  opt.baseline = cfg.baseline;
  opt.weight_clip = cfg.weight_clip;
  opt.init_low = cfg.init_low;
  opt.init_high = cfg.init_high;
  return opt;
}

namespace {

Vector genotype_weights(const Genotype& g) {
  if (g.h.cols() != 1) {
    throw std::invalid_argument("weight genotype must have a single column");
  }
  return g.h.col(0);
}

}  // namespace

EpisodeResult rollout(const Genotype& g, const EnvSpec& spec,
                      std::uint64_t episode_seed, const RolloutOptions& opt) {
  Environment env(spec);
  Vector obs = env.reset(derive_seed(episode_seed, SeedPurpose::EnvReset));
  EpisodeResult result;

  auto run_policy = [&](auto&& act_fn, auto&& learn_fn) {
    while (true) {
      Vector action = act_fn(obs);
      auto sr = env.step(action);
      if (sr.aborted) {
        result.fitness = floor_fitness(spec);
        result.steps = env.steps_taken();
        result.terminated_early = true;
        return;
      }
      result.fitness += sr.reward;
      if (sr.done) break;
      learn_fn();
      obs = sr.obs;
    }
    result.steps = env.steps_taken();
    result.terminated_early = result.steps < spec.max_steps;
  };

  switch (opt.baseline) {
    case BaselineKind::Hebbian: {
      PlasticNetwork net =
          init_weights(opt.topology, derive_seed(episode_seed, SeedPurpose::WeightInit),
                       opt.init_low, opt.init_high, opt.weight_clip);
      RuleAssignment rules = materialize(g, opt.topology);
      run_policy([&](const Vector& o) { return net.forward(o); },
                 [&] { net.hebbian_step(rules); });
      break;
    }
    case BaselineKind::Static: {
      PlasticNetwork net(opt.topology, opt.weight_clip);
      net.set_flat_weights(genotype_weights(g));
      run_policy([&](const Vector& o) { return net.forward(o); }, [] {});
      break;
    }
    case BaselineKind::Recurrent: {
      RecurrentNetwork net(opt.topology, genotype_weights(g));
      net.reset_state();
      run_policy([&](const Vector& o) { return net.forward(o); }, [] {});
      break;
    }
  }
  return result;
}

double meta_fitness(const Genotype& g, const MetaTask& meta,
                    std::span<const std::uint64_t> episode_seeds,
                    const RolloutOptions& opt) {
  const std::size_t variations = meta.train_specs.size();
  if (variations == 0 || episode_seeds.size() % variations != 0) {
    throw std::invalid_argument("seed count must be a multiple of the training variations");
  }
  std::size_t per_variation = episode_seeds.size() / variations;
  double total = 0.0;
  std::size_t s = 0;
  for (std::size_t v = 0; v < variations; ++v) {
    for (std::size_t e = 0; e < per_variation; ++e, ++s) {
      total += rollout(g, meta.train_specs[v], episode_seeds[s], opt).fitness;
    }
  }
  return total / static_cast<double>(episode_seeds.size());
}

Genotype mean_genotype(const GenotypeModel& model) {
  Genotype g;
  switch (model.kind()) {
    case ModelKind::PerSynapse:
      g.h = model.mu();
      break;
    case ModelKind::SingleRule:
      g.h = model.mu().row(0).replicate(model.rows(), 1);
      break;
    case ModelKind::SharedGmm:
    case ModelKind::JointGmm: {
      g.h.resize(model.rows(), model.cols());
      for (int i = 0; i < model.rows(); ++i) {
        Eigen::RowVectorXd row = model.lambda().row(i);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd p = (row.array() - mx).exp();
        p /= p.sum();
        g.h.row(i) = p * model.mu();
      }
      break;
    }
    case ModelKind::FixedRandom: {
      g.h.resize(model.rows(), model.cols());
      for (int i = 0; i < model.rows(); ++i) {
        g.h.row(i) = model.mu().row(model.fixed_assignment()[i]);
      }
      break;
    }
  }
  return g;
}

nlohmann::json generation_record_to_json(const GenerationRecord& rec) {
  nlohmann::json j;
  j["generation"] = rec.generation;
  j["fitness_mean"] = rec.fitness_mean;
  j["fitness_max"] = rec.fitness_max;
  j["fitness_min"] = rec.fitness_min;
  j["lr"] = rec.lr;
  j["grad_mu_inf"] = rec.grad_mu_inf;
  if (rec.grad_lambda_inf) {
    j["grad_lambda_inf"] = *rec.grad_lambda_inf;
  } else {
    j["grad_lambda_inf"] = nullptr;
  }
  return j;
}

namespace {

constexpr std::uint64_t kVariationStride = 1024;  // episodes per variation cap
constexpr std::uint64_t kCandidateStride = 8 * kVariationStride;

std::string checkpoint_name(long generation) {
  std::ostringstream os;
  os << "checkpoint_gen" << std::setw(6) << std::setfill('0') << generation << ".bin";
  return os.str();
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const std::string& out_dir,
                  int workers, const std::string& resume_checkpoint,
                  const GenerationCallback& progress) {
  cfg.validate();
  fs::create_directories(out_dir);
  const std::uint64_t hash = config_hash(cfg);

  {
    std::ofstream out(fs::path(out_dir) / "config.resolved.json", std::ios::trunc);
    out << config_to_json(cfg).dump(2) << "\n";
  }

  EsState state = resume_checkpoint.empty()
                      ? EsState(build_model(cfg), cfg.es, cfg.seed)
                      : load_checkpoint(resume_checkpoint, cfg.es, hash);

  MetaTask meta = make_meta_task(cfg.task, cfg.held_out_id);
  RolloutOptions opt = rollout_options(cfg);
  const int per_candidate =
      static_cast<int>(meta.train_specs.size()) * cfg.episodes_per_variation;

  std::ofstream history(fs::path(out_dir) / "history.jsonl", std::ios::app);
  if (!history) throw std::runtime_error("cannot open history log");

  auto fitness_fn = [&](const std::vector<Candidate>& pop, long gen) {
    std::vector<double> fit(pop.size());
    parallel_for(static_cast<int>(pop.size()), workers, [&](int j) {
      std::vector<std::uint64_t> seeds(per_candidate);
      int s = 0;
      for (std::size_t v = 0; v < meta.train_specs.size(); ++v) {
        for (int e = 0; e < cfg.episodes_per_variation; ++e, ++s) {
          seeds[s] = derive_seed(
              cfg.seed, SeedPurpose::TrainEpisode, static_cast<std::uint64_t>(gen),
              static_cast<std::uint64_t>(j) * kCandidateStride +
                  v * kVariationStride + static_cast<std::uint64_t>(e));
        }
      }
      fit[j] = meta_fitness(pop[j].genotype, meta, seeds, opt);
    });
    return fit;
  };

  auto on_generation = [&](const GenerationRecord& rec) {
    history << generation_record_to_json(rec).dump() << "\n";
    if (state.generation % cfg.checkpoint_every == 0 &&
        state.generation < cfg.generations) {
      save_checkpoint((fs::path(out_dir) / checkpoint_name(state.generation)).string(),
                      state, cfg.es, hash);
    }
    if (progress) progress(rec);
  };

  TrainStatus status =
      run_es(state, cfg.es, fitness_fn, cfg.generations, on_generation);

  TrainResult result;
  result.status = status;
  result.generation = state.generation;
  if (status == TrainStatus::Done) {
    result.checkpoint_path = fs::path(out_dir) / "checkpoint_final.bin";
  } else {
    result.checkpoint_path = fs::path(out_dir) / "checkpoint_diagnostic.bin";
  }
  save_checkpoint(result.checkpoint_path.string(), state, cfg.es, hash);
  return result;
}

std::vector<EvalCell> evaluate_model(const GenotypeModel& model,
                                     const std::vector<EnvSpec>& specs,
                                     int episodes, std::uint64_t base_seed,
                                     EvalGenotypeMode mode, int held_out_id,
                                     int workers, const RolloutFn& rollout_fn) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  const int total = static_cast<int>(specs.size()) * episodes;
  std::vector<double> flat(total, 0.0);
  Genotype center;
  if (mode == EvalGenotypeMode::Mean) center = mean_genotype(model);

  parallel_for(total, workers, [&](int idx) {
    int s = idx / episodes;
    int e = idx % episodes;
    const EnvSpec& spec = specs[s];
    std::uint64_t ep_seed =
        derive_seed(base_seed, SeedPurpose::EvalEpisode, spec.variation_id, e);
    if (mode == EvalGenotypeMode::Sample) {
      Genotype g = model.sample(
          derive_seed(base_seed, SeedPurpose::EvalGenotype, spec.variation_id, e));
      flat[idx] = rollout_fn(g, spec, ep_seed);
    } else {
      flat[idx] = rollout_fn(center, spec, ep_seed);
    }
  });

  std::vector<EvalCell> cells(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s) {
    EvalCell& cell = cells[s];
    cell.variation_id = specs[s].variation_id;
    cell.variation = variation_name(specs[s].task, specs[s].variation_id);
    cell.held_out = specs[s].variation_id == held_out_id;
    cell.episodes = episodes;
    cell.fitness.assign(flat.begin() + s * episodes,
                        flat.begin() + (s + 1) * episodes);
    cell.episode_seeds.resize(episodes);
    for (int e = 0; e < episodes; ++e) {
      cell.episode_seeds[e] =
          derive_seed(base_seed, SeedPurpose::EvalEpisode, specs[s].variation_id, e);
    }
    double mean = 0.0;
    for (double f : cell.fitness) mean += f;
    mean /= episodes;
    double var = 0.0;
    for (double f : cell.fitness) var += (f - mean) * (f - mean);
    var /= episodes;  // population formula
    cell.mean = mean;
    cell.stddev = std::sqrt(var);
  }
  return cells;
}

std::vector<EvalCell> evaluate(const ExperimentConfig& cfg, const EsState& state,
                               int workers) {
  std::vector<EnvSpec> specs;
  for (int v = 1; v <= 5; ++v) specs.push_back(make_variation(cfg.task, v));
  RolloutOptions opt = rollout_options(cfg);
  RolloutFn fn = [&](const Genotype& g, const EnvSpec& spec, std::uint64_t seed) {
    return rollout(g, spec, seed, opt).fitness;
  };
  return evaluate_model(state.model, specs, cfg.eval_episodes, cfg.seed,
                        cfg.eval_genotype, cfg.held_out_id, workers, fn);
}

nlohmann::json eval_to_json(const ExperimentConfig& cfg,
                            const std::vector<EvalCell>& cells) {
  nlohmann::json j;
  j["task"] = to_string(cfg.task);
  j["model"] = to_string(cfg.model);
  j["baseline"] = to_string(cfg.baseline);
  j["rho"] = cfg.rho;
  j["held_out_id"] = cfg.held_out_id;
  j["eval_genotype"] = to_string(cfg.eval_genotype);
  j["cells"] = nlohmann::json::array();
  for (const EvalCell& c : cells) {
    j["cells"].push_back({{"variation_id", c.variation_id},
                          {"variation", c.variation},
                          {"held_out", c.held_out},
                          {"episodes", c.episodes},
                          {"mean", c.mean},
                          {"stddev", c.stddev},
                          {"fitness", c.fitness},
                          {"episode_seeds", c.episode_seeds}});
  }
  return j;
}

namespace {

std::string format_cell(const EvalCell& c) {
  std::ostringstream os;
  os << std::llround(c.mean) << " +- " << std::llround(c.stddev);
  return os.str();
}

}  // namespace

std::string render_eval_table(const std::string& label,
                              const std::vector<EvalCell>& cells) {
  std::ostringstream os;
  os << "model: " << label << "\n";
  std::size_t name_w = 9;
  for (const EvalCell& c : cells) {
    name_w = std::max(name_w, c.variation.size() + (c.held_out ? 1 : 0));
  }
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "variation"
     << "fitness (mean +- std)\n";
  for (const EvalCell& c : cells) {
    std::string name = c.variation + (c.held_out ? "*" : "");
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << name
       << format_cell(c) << "  [" << c.episodes << " episodes]\n";
  }
  os << "* held-out test variation\n";
  return os.str();
}

void write_evaluation(const ExperimentConfig& cfg,
                      const std::vector<EvalCell>& cells,
                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "eval.json", std::ios::trunc);
    out << eval_to_json(cfg, cells).dump(2) << "\n";
  }
  std::string label = to_string(cfg.baseline);
  if (cfg.baseline == BaselineKind::Hebbian) {
    label = to_string(cfg.model) + " (rho=" + std::to_string(cfg.rho) + ")";
  }
  std::ofstream out(fs::path(out_dir) / "eval.txt", std::ios::trunc);
  out << render_eval_table(label, cells);
}

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '-');
  }
  return out;
}

SweepRow run_sweep_row(const ExperimentConfig& row_cfg, const std::string& label,
                       const std::string& out_dir, int workers,
                       const GenerationCallback& progress) {
  SweepRow row;
  row.label = label;
  row.run_dir = (fs::path(out_dir) / sanitize(label)).string();
  try {
    TrainResult tr = train(row_cfg, row.run_dir, workers, "", progress);
    if (tr.status != TrainStatus::Done) {
      row.failed = true;
      row.error = "numerical abort at generation " + std::to_string(tr.generation);
      return row;
    }
    EsState state =
        load_checkpoint(tr.checkpoint_path.string(), row_cfg.es, config_hash(row_cfg));
    row.cells = evaluate(row_cfg, state, workers);
    write_evaluation(row_cfg, row.cells, row.run_dir);
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

}  // namespace

SweepResult run_rho_sweep(const ExperimentConfig& base,
                          const std::vector<int>& rho_list,
                          const std::string& out_dir, int workers,
                          const GenerationCallback& progress) {
  fs::create_directories(out_dir);
  SweepResult sweep;

  ExperimentConfig static_cfg = base;
  static_cfg.baseline = BaselineKind::Static;
  static_cfg.model = ModelKind::PerSynapse;
  static_cfg.rho = 1;
  sweep.rows.push_back(run_sweep_row(static_cfg, "static", out_dir, workers, progress));

  ExperimentConfig rec_cfg = base;
  rec_cfg.baseline = BaselineKind::Recurrent;
  rec_cfg.model = ModelKind::PerSynapse;
  rec_cfg.rho = 1;
  sweep.rows.push_back(run_sweep_row(rec_cfg, "recurrent", out_dir, workers, progress));

  ExperimentConfig hebb_cfg = base;
  hebb_cfg.baseline = BaselineKind::Hebbian;
  hebb_cfg.model = ModelKind::PerSynapse;
  hebb_cfg.rho = 1;
  sweep.rows.push_back(run_sweep_row(hebb_cfg, "hebbian", out_dir, workers, progress));

  const int n = hebb_cfg.genotype_rows();
  for (int rho : rho_list) {
    ExperimentConfig cfg = base;
    cfg.baseline = BaselineKind::Hebbian;
    cfg.rho = rho;
    if (rho == 1) {
      cfg.model = ModelKind::PerSynapse;
    } else if (rho == n) {
      cfg.model = ModelKind::SingleRule;
    } else if (base.model == ModelKind::JointGmm ||
               base.model == ModelKind::FixedRandom) {
      cfg.model = base.model;
    } else {
      cfg.model = ModelKind::SharedGmm;
    }
    std::string label = to_string(cfg.model) + "(rho=" + std::to_string(rho) + ")";
    sweep.rows.push_back(run_sweep_row(cfg, label, out_dir, workers, progress));
  }
  return sweep;
}

nlohmann::json sweep_to_json(const ExperimentConfig& base, const SweepResult& sweep) {
  nlohmann::json j;
  j["task"] = to_string(base.task);
  j["held_out_id"] = base.held_out_id;
  j["rows"] = nlohmann::json::array();
  for (const SweepRow& row : sweep.rows) {
    nlohmann::json r;
    r["label"] = row.label;
    r["run_dir"] = row.run_dir;
    r["failed"] = row.failed;
    if (row.failed) {
      r["error"] = row.error;
    } else {
      r["cells"] = nlohmann::json::array();
      for (const EvalCell& c : row.cells) {
        r["cells"].push_back({{"variation_id", c.variation_id},
                              {"variation", c.variation},
                              {"held_out", c.held_out},
                              {"episodes", c.episodes},
                              {"mean", c.mean},
                              {"stddev", c.stddev}});
      }
    }
    j["rows"].push_back(r);
  }
  return j;
}

std::string render_sweep_table(const ExperimentConfig& base,
                               const SweepResult& sweep) {
  std::ostringstream os;
  std::vector<std::string> headers;
  std::size_t label_w = 5;
  for (int v = 1; v <= 5; ++v) {
    std::string name = variation_name(base.task, v);
    if (v == base.held_out_id) name += "*";
    headers.push_back(name);
  }
  for (const SweepRow& row : sweep.rows) label_w = std::max(label_w, row.label.size());

  std::vector<std::size_t> col_w(5);
  for (int c = 0; c < 5; ++c) col_w[c] = headers[c].size();
  std::vector<std::vector<std::string>> body;
  for (const SweepRow& row : sweep.rows) {
    std::vector<std::string> line(5, "-");
    if (row.failed) {
      line[0] = "failed: " + row.error;
    } else {
      for (const EvalCell& c : row.cells) {
        int idx = c.variation_id - 1;
        if (idx >= 0 && idx < 5) line[idx] = format_cell(c);
      }
    }
    for (int c = 0; c < 5; ++c) col_w[c] = std::max(col_w[c], line[c].size());
    body.push_back(std::move(line));
  }

  os << std::left << std::setw(static_cast<int>(label_w) + 2) << "model";
  for (int c = 0; c < 5; ++c) {
    os << std::left << std::setw(static_cast<int>(col_w[c]) + 2) << headers[c];
  }
  os << "\n";
  for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
    os << std::left << std::setw(static_cast<int>(label_w) + 2) << sweep.rows[r].label;
    for (int c = 0; c < 5; ++c) {
      os << std::left << std::setw(static_cast<int>(col_w[c]) + 2) << body[r][c];
    }
    os << "\n";
  }
  os << "* held-out test variation\n";
  return os.str();
}

VerifyResult run_verify(int trials_per_kind, std::uint64_t seed, double tolerance) {
  VerifyResult v;
  const ModelKind kinds[] = {ModelKind::PerSynapse, ModelKind::SharedGmm,
                             ModelKind::JointGmm, ModelKind::SingleRule,
                             ModelKind::FixedRandom};
  v.overall_pass = true;
  for (ModelKind kind : kinds) {
    VerifyResult::KindReport kr;
    kr.kind = to_string(kind);
    kr.report = check_model_gradients(kind, trials_per_kind, seed);
    kr.pass = kr.report.passed(tolerance) && kr.report.trials > 0;
    v.overall_pass = v.overall_pass && kr.pass;
    v.kinds.push_back(std::move(kr));
  }

  // Literal product-of-sums likelihood against the stabilized implementation.
  Rng rng(derive_seed(seed, SeedPurpose::PopulationSample, 987));
  for (int t = 0; t < trials_per_kind; ++t) {
    int rows = 1 + static_cast<int>(rng.next_u64() % 6);
    int components = 1 + static_cast<int>(rng.next_u64() % 3);
    double sigma = 0.1 + 0.2 * rng.uniform();
    GenotypeModel model = GenotypeModel::shared_gmm(rows, components, kRuleDim, sigma);
    for (Eigen::Index r = 0; r < model.mu().rows(); ++r) {
      for (Eigen::Index c = 0; c < model.mu().cols(); ++c) {
        model.mu()(r, c) = rng.normal();
      }
    }
    for (Eigen::Index r = 0; r < model.lambda().rows(); ++r) {
      for (Eigen::Index c = 0; c < model.lambda().cols(); ++c) {
        model.lambda()(r, c) = rng.normal();
      }
    }
    Genotype g = model.sample(rng.next_u64());
    auto literal = brute_force_gmm_log_prob(model.mu(), model.lambda(), sigma, g.h);
    if (!literal) {
      ++v.brute_force_skipped;
      continue;
    }
    ++v.brute_force_instances;
    v.brute_force_max_diff =
        std::max(v.brute_force_max_diff, std::abs(*literal - model.log_prob(g)));
  }
  v.brute_force_pass = v.brute_force_instances > 0 && v.brute_force_max_diff < 1e-10;
  v.overall_pass = v.overall_pass && v.brute_force_pass;
  return v;
}

nlohmann::json verify_to_json(const VerifyResult& v) {
  nlohmann::json j;
  j["kinds"] = nlohmann::json::array();
  for (const auto& kr : v.kinds) {
    j["kinds"].push_back({{"kind", kr.kind},
                          {"max_rel_error", kr.report.max_rel_error},
                          {"argmax_coordinate", kr.report.argmax_coordinate},
                          {"step", kr.report.step},
                          {"trials", kr.report.trials},
                          {"skipped", kr.report.skipped},
                          {"pass", kr.pass}});
  }
  j["brute_force"] = {{"max_abs_diff", v.brute_force_max_diff},
                      {"instances", v.brute_force_instances},
                      {"skipped", v.brute_force_skipped},
                      {"pass", v.brute_force_pass}};
  j["overall_pass"] = v.overall_pass;
  return j;
}

ReplayResult replay(const ExperimentConfig& cfg, const EsState& state,
                    int variation_id, int episode) {
  if (variation_id < 1 || variation_id > 5) {
    throw ConfigError("variation id must lie in 1..5");
  }
  if (episode < 0 || episode >= cfg.eval_episodes) {
    throw ConfigError("episode index out of range for the configured evaluation");
  }
  ReplayResult r;
  r.variation_id = variation_id;
  r.episode = episode;
  r.episode_seed =
      derive_seed(cfg.seed, SeedPurpose::EvalEpisode, variation_id, episode);
  r.genotype_seed =
      derive_seed(cfg.seed, SeedPurpose::EvalGenotype, variation_id, episode);
  EnvSpec spec = make_variation(cfg.task, variation_id);
  Genotype g = cfg.eval_genotype == EvalGenotypeMode::Sample
                   ? state.model.sample(r.genotype_seed)
                   : mean_genotype(state.model);
  EpisodeResult ep = rollout(g, spec, r.episode_seed, rollout_options(cfg));
  r.fitness = ep.fitness;
  r.steps = ep.steps;
  return r;
}

}  // namespace hebbes
