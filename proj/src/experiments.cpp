#include "sekf/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "sekf/rng.hpp"
#include "sekf/stats.hpp"

namespace fs = std::filesystem;

namespace sekf {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag) {
  return seed ^ fnv1a64(tag);
}

void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp);
    require(f.good(), "write_atomic: cannot open " + tmp);
    f << text;
    require(f.good(), "write_atomic: write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

nlohmann::json vec_to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const nlohmann::json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

nlohmann::json train_config_json(const TrainConfig& c) {
  return {{"optimizer", c.optimizer},
          {"learning_rate", c.learning_rate},
          {"minibatch_size", c.minibatch_size},
          {"minibatches_per_epoch", c.minibatches_per_epoch},
          {"max_epochs", c.max_epochs},
          {"lr_patience", c.lr_patience},
          {"lr_factor", c.lr_factor},
          {"early_stop_patience", c.early_stop_patience},
          {"adam_subset_fraction", c.adam_subset_fraction},
          {"lbfgs_history", c.lbfgs_history},
          {"lbfgs_max_line_searches", c.lbfgs_max_line_searches}};
}

TrainConfig train_config_from(const nlohmann::json& j, TrainConfig base) {
  base.optimizer = j.value("optimizer", base.optimizer);
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.minibatch_size = j.value("minibatch_size", base.minibatch_size);
  base.minibatches_per_epoch =
      j.value("minibatches_per_epoch", base.minibatches_per_epoch);
  base.max_epochs = j.value("max_epochs", base.max_epochs);
  base.lr_patience = j.value("lr_patience", base.lr_patience);
  base.lr_factor = j.value("lr_factor", base.lr_factor);
  base.early_stop_patience =
      j.value("early_stop_patience", base.early_stop_patience);
  base.adam_subset_fraction =
      j.value("adam_subset_fraction", base.adam_subset_fraction);
  base.lbfgs_history = j.value("lbfgs_history", base.lbfgs_history);
  base.lbfgs_max_line_searches =
      j.value("lbfgs_max_line_searches", base.lbfgs_max_line_searches);
  return base;
}

nlohmann::json sekf_config_json(const SekfConfig& c) {
  return {{"r_scalar", c.r_scalar},
          {"q_scalar", c.q_scalar},
          {"p0_scalar", c.p0_scalar},
          {"subset_size", c.subset_size},
          {"minibatch_size", c.minibatch_size},
          {"passes", c.passes},
          {"selection_score", c.selection_score},
          {"skip_abort_threshold", c.skip_abort_threshold},
          {"early_stop_patience", c.early_stop_patience}};
}

SekfConfig sekf_config_from(const nlohmann::json& j, SekfConfig base) {
  base.r_scalar = j.value("r_scalar", base.r_scalar);
  base.q_scalar = j.value("q_scalar", base.q_scalar);
  base.p0_scalar = j.value("p0_scalar", base.p0_scalar);
  base.subset_size = j.value("subset_size", base.subset_size);
  base.minibatch_size = j.value("minibatch_size", base.minibatch_size);
  base.passes = j.value("passes", base.passes);
  base.selection_score = j.value("selection_score", base.selection_score);
  base.skip_abort_threshold =
      j.value("skip_abort_threshold", base.skip_abort_threshold);
  base.early_stop_patience =
      j.value("early_stop_patience", base.early_stop_patience);
  return base;
}

bool is_subset_of(const std::vector<std::string>& values,
                  const std::vector<std::string>& allowed) {
  for (const auto& v : values)
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
      return false;
  return !values.empty();
}

/// Scales one named parameter by (1 + sign * percent / 100).
double parse_scale(const std::string& name, std::string& param) {
  const auto pos = name.find_last_of("+-");
  require(pos != std::string::npos && pos > 0 && pos + 1 < name.size(),
          "target name must look like <param><+|-><percent>: " + name);
  param = name.substr(0, pos);
  const double pct = std::stod(name.substr(pos + 1));
  return 1.0 + (name[pos] == '+' ? pct : -pct) / 100.0;
}

struct SourceData {
  Dataset train, val, test;
};

Dataset slice_dataset(const Dataset& pool, int first, int count, Split tag) {
  require(first + count <= pool.size(), "slice_dataset: out of range");
  Dataset d;
  d.split = tag;
  d.normalizer = pool.normalizer;
  d.examples.assign(pool.examples.begin() + first,
                    pool.examples.begin() + first + count);
  return d;
}

SourceData build_source_data(const ExperimentConfig& config) {
  const int n_total =
      config.source_train + config.source_val + config.source_test;
  Dataset pool;
  if (config.system == "spring") {
    pool = build_spring_dataset(SpringParams{}, n_total,
                                mix_seed(config.seed, "source-data"),
                                config.noise_sigma);
  } else {
    pool = build_tclab_dataset(TclabParams{}, config.source_hours * 3600.0,
                               mix_seed(config.seed, "source-data"),
                               config.noise_sigma, config.source_stride);
    require(pool.size() >= n_total,
            "source_hours too short for the requested source split sizes");
  }
  SourceData d;
  d.train = slice_dataset(pool, 0, config.source_train, Split::train);
  d.val = slice_dataset(pool, config.source_train, config.source_val, Split::val);
  d.test = slice_dataset(pool, config.source_train + config.source_val,
                         config.source_test, Split::test);
  return d;
}

void assign_normalizer(Dataset& d, const Normalizer& n) { d.normalizer = n; }

std::string csv_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  adam_config.optimizer = "adam";
  lbfgs_config.optimizer = "lbfgs";
  lbfgs_config.learning_rate = 1.0;
  sekf_finetune.p0_scalar = 0.01;
  sekf_finetune.q_scalar = 1e-6;
  sekf_finetune.minibatch_size = 8;
  sekf_finetune.passes = 20;
  sekf_finetune.early_stop_patience = 5;
  // Wide prior for a random init, but bounded: far wider priors let the
  // first gains on a fresh network overflow the innovation solve.
  sekf_retrain.p0_scalar = 1.0;
  sekf_retrain.q_scalar = 1e-4;
  sekf_retrain.minibatch_size = 8;
  sekf_retrain.passes = 20;
  sekf_retrain.early_stop_patience = 5;
}

bool ExperimentConfig::valid() const {
  if (system != "spring" && system != "tclab") return false;
  if (output_dir.empty() || targets.empty() || sizes.empty()) return false;
  if (replicates < 1) return false;
  if (!is_subset_of(optimizers, {"adam", "lbfgs", "sekf"})) return false;
  if (!is_subset_of(init_methods, {"finetune", "retrain"})) return false;
  for (int s : sizes)
    if (s < 1 || s > candidates_per_replicate) return false;
  if (source_train < 1 || source_val < 1 || source_test < 1) return false;
  if (source_hours <= 0.0 || source_stride < 1) return false;
  if (noise_sigma < 0.0 || target_noise_factor < 0.0) return false;
  if (candidates_per_replicate < 1 || test_per_replicate < 1) return false;
  if (target_stride < 1 || test_stride < 1) return false;
  if (!adam_config.valid() || !lbfgs_config.valid()) return false;
  if (!sekf_finetune.valid() || !sekf_retrain.valid()) return false;
  return source_max_epochs >= 0;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"system", system},
          {"output_dir", output_dir},
          {"seed", seed},
          {"targets", targets},
          {"sizes", sizes},
          {"replicates", replicates},
          {"optimizers", optimizers},
          {"init_methods", init_methods},
          {"source_train", source_train},
          {"source_val", source_val},
          {"source_test", source_test},
          {"source_hours", source_hours},
          {"source_stride", source_stride},
          {"noise_sigma", noise_sigma},
          {"candidates_per_replicate", candidates_per_replicate},
          {"test_per_replicate", test_per_replicate},
          {"target_noise_factor", target_noise_factor},
          {"target_stride", target_stride},
          {"test_stride", test_stride},
          {"adam", train_config_json(adam_config)},
          {"lbfgs", train_config_json(lbfgs_config)},
          {"sekf_finetune", sekf_config_json(sekf_finetune)},
          {"sekf_retrain", sekf_config_json(sekf_retrain)},
          {"source_max_epochs", source_max_epochs},
          {"tune", tune},
          {"save_curves", save_curves}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.system = j.value("system", c.system);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.seed = j.value("seed", c.seed);
  c.targets = j.value("targets", c.targets);
  c.sizes = j.value("sizes", c.sizes);
  c.replicates = j.value("replicates", c.replicates);
  c.optimizers = j.value("optimizers", c.optimizers);
  c.init_methods = j.value("init_methods", c.init_methods);
  c.source_train = j.value("source_train", c.source_train);
  c.source_val = j.value("source_val", c.source_val);
  c.source_test = j.value("source_test", c.source_test);
  c.source_hours = j.value("source_hours", c.source_hours);
  c.source_stride = j.value("source_stride", c.source_stride);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.candidates_per_replicate =
      j.value("candidates_per_replicate", c.candidates_per_replicate);
  c.test_per_replicate = j.value("test_per_replicate", c.test_per_replicate);
  c.target_noise_factor = j.value("target_noise_factor", c.target_noise_factor);
  c.target_stride = j.value("target_stride", c.target_stride);
  c.test_stride = j.value("test_stride", c.test_stride);
  if (j.contains("adam")) c.adam_config = train_config_from(j["adam"], c.adam_config);
  if (j.contains("lbfgs"))
    c.lbfgs_config = train_config_from(j["lbfgs"], c.lbfgs_config);
  if (j.contains("sekf_finetune"))
    c.sekf_finetune = sekf_config_from(j["sekf_finetune"], c.sekf_finetune);
  if (j.contains("sekf_retrain"))
    c.sekf_retrain = sekf_config_from(j["sekf_retrain"], c.sekf_retrain);
  c.source_max_epochs = j.value("source_max_epochs", c.source_max_epochs);
  c.tune = j.value("tune", c.tune);
  c.save_curves = j.value("save_curves", c.save_curves);
  require(c.valid(), "invalid experiment config");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "config file not readable: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

std::string ExperimentConfig::resolved_output_dir() const {
  const char* root = std::getenv("SEKF_OUT_ROOT");
  if (root == nullptr || *root == '\0') return output_dir;
  return (fs::path(root) / output_dir).string();
}

SpringParams apply_spring_target(SpringParams base, const std::string& name) {
  if (name == "base") return base;
  std::string param;
  const double factor = parse_scale(name, param);
  if (param == "m")
    base.m *= factor;
  else if (param == "c")
    base.c *= factor;
  else if (param == "k")
    base.k *= factor;
  else if (param == "u")
    base.u *= factor;
  else
    throw ContractError("unknown spring target parameter: " + param);
  require(base.valid(), "target transform produced invalid spring params");
  return base;
}

TclabParams apply_tclab_target(TclabParams base, const std::string& name) {
  if (name == "base") return base;
  if (name == "sim2real") {
    base.U *= 0.9;
    base.alpha1 *= 0.9;
    base.alpha2 *= 0.9;
    return base;
  }
  std::string param;
  const double factor = parse_scale(name, param);
  if (param == "U")
    base.U *= factor;
  else if (param == "a1")
    base.alpha1 *= factor;
  else if (param == "a2")
    base.alpha2 *= factor;
  else
    throw ContractError("unknown tclab target parameter: " + param);
  require(base.valid(), "target transform produced invalid tclab params");
  return base;
}

void SourceArtifact::save(const std::string& path) const {
  nlohmann::json j{{"system", system},
                   {"params", vec_to_json(params)},
                   {"normalizer", normalizer.to_json()},
                   {"test_loss", test_loss},
                   {"train_wall_s", train_wall_s},
                   {"seed", seed},
                   {"meta", meta}};
  write_atomic(path, j.dump(2) + "\n");
}

SourceArtifact SourceArtifact::load(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "source artifact not readable: " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  SourceArtifact a;
  a.system = j.at("system").get<std::string>();
  a.params = vec_from_json(j.at("params"));
  a.normalizer = Normalizer::from_json(j.at("normalizer"));
  a.test_loss = j.at("test_loss").get<double>();
  a.train_wall_s = j.at("train_wall_s").get<double>();
  a.seed = j.at("seed").get<std::uint64_t>();
  a.meta = j.value("meta", nlohmann::json::object());
  return a;
}

Predictor make_predictor(const std::string& system) {
  if (system == "spring") return make_spring_predictor();
  if (system == "tclab") return make_tclab_predictor();
  throw ContractError("unknown system: " + system);
}

double physical_loss(const Predictor& pred, const Vector& params,
                     const Dataset& raw) {
  require(!raw.empty(), "physical_loss: empty dataset");
  const int h = raw.horizon();
  const int dcols = raw.target_dim();
  double sumsq = 0.0;
  for (const auto& e : raw.examples) {
    const Example en = raw.normalizer.apply(e);
    const Vector p = pred.predict(params, en);
    if (!p.allFinite()) throw DivergenceError("non-finite prediction");
    Matrix pm(h, dcols);
    Eigen::Index idx = 0;
    for (int k = 0; k < h; ++k)
      for (int s = 0; s < dcols; ++s) pm(k, s) = p[idx++];
    sumsq += (raw.normalizer.target.invert_cols(pm) - e.target).squaredNorm();
  }
  return sumsq / (static_cast<double>(raw.size()) * h * dcols);
}

SourceArtifact train_source(const ExperimentConfig& config) {
  require(config.valid(), "train_source: invalid config");
  const std::string dir = config.resolved_output_dir();
  fs::create_directories(dir);

  const Predictor pred = make_predictor(config.system);
  SourceData data = build_source_data(config);
  const Normalizer norm =
      fit_normalizer(data.train, /*share_state_target=*/config.system == "tclab");
  assign_normalizer(data.train, norm);
  assign_normalizer(data.val, norm);
  assign_normalizer(data.test, norm);

  TrainConfig tc = config.adam_config;
  tc.max_epochs = config.source_max_epochs;
  tc.early_stop_patience = 50;
  tc.seed = mix_seed(config.seed, "source-train");
  const Vector init = pred.init_params(mix_seed(config.seed, "source-init"));
  const TrainOutcome o =
      train(pred, init, data.train.normalized(), data.val.normalized(), tc);
  if (o.aborted)
    throw DivergenceError("source training aborted: " + o.abort_reason);

  SourceArtifact a;
  a.system = config.system;
  a.params = o.best_params;
  a.normalizer = norm;
  a.test_loss = physical_loss(pred, o.best_params, data.test);
  a.train_wall_s = o.convergence_wall_s;
  a.seed = config.seed;
  a.meta = {{"source_train", config.source_train},
            {"source_val", config.source_val},
            {"source_test", config.source_test},
            {"noise_sigma", config.noise_sigma},
            {"best_epoch", o.best_epoch},
            {"epochs_run", o.epochs_run},
            {"best_val_loss_model_scale", o.best_val_loss},
            {"reference_scale_note",
             config.system == "spring"
                 ? "reference runs used 100000 source points; desk scale here"
                 : "reference runs used one year of data; desk scale here"}};
  a.save(dir + "/source.json");
  write_loss_curve(dir + "/source_curve.csv", o.curve);
  return a;
}

Dataset build_target_pool(const ExperimentConfig& config,
                          const std::string& target_name) {
  require(config.valid(), "build_target_pool: invalid config");
  const int n_pool =
      config.replicates *
      (config.candidates_per_replicate + config.test_per_replicate);
  const std::uint64_t seed = mix_seed(config.seed, "target-data|" + target_name);
  const double sigma = config.noise_sigma * config.target_noise_factor;
  if (config.system == "spring") {
    return build_spring_dataset(apply_spring_target(SpringParams{}, target_name),
                                n_pool, seed, sigma);
  }
  // Windows needed: n_pool at target_stride, plus the horizon tail.
  const int n_samples = (n_pool - 1) * config.target_stride + 60 + 2;
  Dataset pool = build_tclab_dataset(apply_tclab_target(TclabParams{}, target_name),
                                     n_samples * 10.0, seed, sigma,
                                     config.target_stride);
  require(pool.size() >= n_pool, "tclab target pool underfilled");
  pool.examples.resize(static_cast<std::size_t>(n_pool));
  return pool;
}

std::string TrialSpec::id(const std::string& system) const {
  return system + "_" + target_name + "_" + optimizer + "_" + init_method +
         "_n" + std::to_string(size) + "_r" + std::to_string(replicate);
}

std::uint64_t TrialSpec::trial_seed(std::uint64_t config_seed,
                                    const std::string& system) const {
  return fnv1a64(id(system) + "|" + std::to_string(config_seed));
}

TrialResult run_trial(const ExperimentConfig& config,
                      const SourceArtifact& source, const Dataset& target_pool,
                      const TrialSpec& spec) {
  const Predictor pred = make_predictor(config.system);
  const std::uint64_t tseed = spec.trial_seed(config.seed, config.system);

  Dataset pool = target_pool;
  pool.normalizer = source.normalizer;
  SplitResult sr =
      split_protocol(pool, {spec.size}, spec.replicate,
                     config.candidates_per_replicate, config.test_per_replicate);
  SizedSplit& ss = sr.by_size.front();

  TrialResult r;
  r.system = config.system;
  r.target_name = spec.target_name;
  r.optimizer = spec.optimizer;
  r.init_method = spec.init_method;
  r.size = spec.size;
  r.replicate = spec.replicate;
  r.seed = tseed;

  const Vector init = spec.init_method == "finetune"
                          ? source.params
                          : pred.init_params(mix_seed(tseed, "init"));
  const Dataset train_norm = ss.train.normalized();
  // Sizes below 10 leave no held-out examples; selection then tracks the
  // training loss instead.
  const Dataset val_norm = ss.val.empty() ? train_norm : ss.val.normalized();

  Vector best;
  const std::string dir = config.resolved_output_dir();
  if (config.save_curves) fs::create_directories(dir + "/trials");
  if (spec.optimizer == "sekf") {
    SekfConfig fc = spec.init_method == "finetune" ? config.sekf_finetune
                                                   : config.sekf_retrain;
    fc.seed = mix_seed(tseed, "train");
    fc.subset_size = std::min(fc.subset_size, pred.param_dim());
    SekfOutcome o = train_sekf(pred, init, train_norm, val_norm, fc);
    best = o.best_params;
    r.convergence_wall_s = o.convergence_wall_s;
    r.epochs_run = o.passes_run;
    r.aborted = o.aborted;
    r.abort_reason = o.abort_reason;
    if (config.save_curves)
      write_sekf_diagnostics(dir + "/trials/" + spec.id(config.system) +
                                 "_diag.csv",
                             o.diagnostics);
  } else {
    TrainConfig tc =
        spec.optimizer == "adam" ? config.adam_config : config.lbfgs_config;
    tc.seed = mix_seed(tseed, "train");
    if (config.tune)
      tc = tune_gradient_config(pred, init, train_norm, val_norm, tc);
    TrainOutcome o = train(pred, init, train_norm, val_norm, tc);
    best = o.best_params;
    r.convergence_wall_s = o.convergence_wall_s;
    r.epochs_run = o.epochs_run;
    r.aborted = o.aborted;
    r.abort_reason = o.abort_reason;
    if (config.save_curves)
      write_loss_curve(dir + "/trials/" + spec.id(config.system) + "_curve.csv",
                       o.curve);
  }

  r.final_params = best;
  r.train_loss = physical_loss(pred, best, ss.train);
  r.val_loss = ss.val.empty() ? 0.0 : physical_loss(pred, best, ss.val);
  r.test_loss = physical_loss(pred, best, sr.test);
  r.gap = train_test_gap(r);
  r.cosine_to_source = cosine_similarity(source.params, best);
  r.wasserstein_to_source = wasserstein_1d(source.params, best);
  r.normalized_test_loss = normalized_mse(r, source.test_loss);
  r.normalized_convergence =
      normalized_convergence_time(r, source.train_wall_s);
  return r;
}

int grid_trial_count(const ExperimentConfig& config) {
  require(config.valid(), "grid_trial_count: invalid config");
  return static_cast<int>(config.targets.size() * config.sizes.size() *
                          config.optimizers.size() *
                          config.init_methods.size()) *
         config.replicates;
}

GridSummary run_grid(const ExperimentConfig& config, int jobs, bool resume) {
  require(config.valid(), "run_grid: invalid config");
  require(jobs >= 1, "run_grid: jobs must be >= 1");
  const std::string dir = config.resolved_output_dir();
  fs::create_directories(dir + "/trials");

  SourceArtifact source;
  const std::string source_path = dir + "/source.json";
  if (resume && fs::exists(source_path)) {
    source = SourceArtifact::load(source_path);
    require(source.system == config.system,
            "run_grid: source artifact system mismatch");
  } else {
    source = train_source(config);
  }

  std::map<std::string, Dataset> pools;
  for (const auto& t : config.targets) pools.emplace(t, build_target_pool(config, t));

  std::vector<TrialSpec> specs;
  for (const auto& target : config.targets)
    for (int size : config.sizes)
      for (const auto& opt : config.optimizers)
        for (const auto& init : config.init_methods)
          for (int rep = 0; rep < config.replicates; ++rep)
            specs.push_back({target, opt, init, size, rep});

  std::set<std::uint64_t> seen;
  for (const auto& s : specs)
    require(seen.insert(s.trial_seed(config.seed, config.system)).second,
            "run_grid: trial seed collision");

  GridSummary sum;
  sum.total = grid_trial_count(config);
  require(sum.total == static_cast<int>(specs.size()),
          "run_grid: spec expansion disagrees with grid_trial_count");
  std::atomic<std::size_t> next{0};
  std::atomic<int> executed{0}, skipped{0}, failed{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      const TrialSpec& spec = specs[i];
      const std::string path =
          dir + "/trials/" + spec.id(config.system) + ".json";
      if (resume && fs::exists(path)) {
        ++skipped;
        continue;
      }
      TrialResult r;
      try {
        r = run_trial(config, source, pools.at(spec.target_name), spec);
      } catch (const std::exception& e) {
        r = TrialResult{};
        r.system = config.system;
        r.target_name = spec.target_name;
        r.optimizer = spec.optimizer;
        r.init_method = spec.init_method;
        r.size = spec.size;
        r.replicate = spec.replicate;
        r.seed = spec.trial_seed(config.seed, config.system);
        r.aborted = true;
        r.abort_reason = e.what();
        r.final_params = Vector();
      }
      write_atomic(path, r.to_json().dump(2) + "\n");
      ++executed;
      if (r.aborted) ++failed;
    }
  };

  const int n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), specs.size());
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  sum.executed = executed;
  sum.skipped = skipped;
  sum.failed = failed;
  write_report(dir, /*anova=*/true, /*layer_changes=*/true);
  return sum;
}

int write_report(const std::string& dir, bool anova, bool layer_changes) {
  const std::string trials_dir = dir + "/trials";
  require(fs::is_directory(trials_dir), "report: no trials directory in " + dir);

  std::vector<TrialResult> records;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(trials_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    require(in.good(), "report: cannot read " + f);
    records.push_back(TrialResult::from_json(nlohmann::json::parse(in)));
  }

  std::string csv =
      "system,target,optimizer,init_method,size,replicate,seed,train_loss,"
      "val_loss,test_loss,gap,normalized_test_loss,normalized_convergence,"
      "cosine_to_source,wasserstein_to_source,convergence_wall_s,epochs_run,"
      "aborted\n";
  for (const auto& r : records) {
    csv += r.system + "," + r.target_name + "," + r.optimizer + "," +
           r.init_method + "," + std::to_string(r.size) + "," +
           std::to_string(r.replicate) + "," + std::to_string(r.seed) + "," +
           csv_double(r.train_loss) + "," + csv_double(r.val_loss) + "," +
           csv_double(r.test_loss) + "," + csv_double(r.gap) + "," +
           csv_double(r.normalized_test_loss) + "," +
           csv_double(r.normalized_convergence) + "," +
           csv_double(r.cosine_to_source) + "," +
           csv_double(r.wasserstein_to_source) + "," +
           csv_double(r.convergence_wall_s) + "," +
           std::to_string(r.epochs_run) + "," + (r.aborted ? "1" : "0") + "\n";
  }
  write_atomic(dir + "/results.csv", csv);

  if (anova) {
    FactorTable table;
    table.factor_names = {"init_method", "optimizer", "size", "target"};
    struct Outcome {
      const char* name;
      double TrialResult::* field;
    };
    const Outcome outcomes[] = {
        {"normalized_test_loss", &TrialResult::normalized_test_loss},
        {"gap", &TrialResult::gap},
        {"normalized_convergence", &TrialResult::normalized_convergence}};
    for (const auto& r : records) {
      if (r.aborted) continue;
      table.add_row({r.init_method, r.optimizer, std::to_string(r.size),
                     r.target_name},
                    0.0);  // outcome filled per test below
    }
    std::vector<AnovaRow> rows;
    for (const auto& out : outcomes) {
      FactorTable t = table;
      t.outcomes.clear();
      for (const auto& r : records)
        if (!r.aborted) t.outcomes.push_back(r.*(out.field));
      for (const auto& factor : table.factor_names) {
        // Skip factors without at least two observed levels.
        std::set<std::string> levels;
        const int fi = t.factor_index(factor);
        for (const auto& row : t.rows)
          levels.insert(row[static_cast<std::size_t>(fi)]);
        if (levels.size() < 2) continue;
        const AnovaResult a = permutation_anova(
            t, factor, 4999,
            fnv1a64(std::string("anova|") + out.name + "|" + factor));
        rows.push_back({out.name, factor, a.f, a.p});
      }
    }
    write_anova_csv(dir + "/anova.csv", rows);
  }

  if (layer_changes && !records.empty()) {
    const SourceArtifact source = SourceArtifact::load(dir + "/source.json");
    const Predictor source_pred = make_predictor(source.system);
    const NetworkSpec& net = source_pred.network();
    const int n_layers = net.num_layers();

    auto aggregate = [&](const std::vector<const TrialResult*>& rs) {
      nlohmann::json layers = nlohmann::json::array();
      std::vector<double> mean_abs(static_cast<std::size_t>(n_layers), 0.0);
      std::vector<double> max_abs(static_cast<std::size_t>(n_layers), 0.0);
      std::vector<int> counts(static_cast<std::size_t>(n_layers), 0);
      for (const auto* r : rs) {
        const LayerChangeReport rep =
            layer_change_report(net, source.params, r->final_params);
        for (int l = 0; l < n_layers; ++l) {
          mean_abs[static_cast<std::size_t>(l)] += rep.layers[static_cast<std::size_t>(l)].mean_abs;
          max_abs[static_cast<std::size_t>(l)] = std::max(
              max_abs[static_cast<std::size_t>(l)], rep.layers[static_cast<std::size_t>(l)].max_abs);
          counts[static_cast<std::size_t>(l)] = rep.layers[static_cast<std::size_t>(l)].count;
        }
      }
      for (int l = 0; l < n_layers; ++l)
        layers.push_back({{"layer", l},
                          {"count", counts[static_cast<std::size_t>(l)]},
                          {"mean_abs", rs.empty() ? 0.0
                                                  : mean_abs[static_cast<std::size_t>(l)] /
                                                        static_cast<double>(rs.size())},
                          {"max_abs", max_abs[static_cast<std::size_t>(l)]}});
      return layers;
    };

    std::vector<const TrialResult*> finetuned;
    std::map<std::string, std::vector<const TrialResult*>> by_opt;
    for (const auto& r : records) {
      if (r.aborted || r.init_method != "finetune" ||
          r.final_params.size() != source.params.size())
        continue;
      finetuned.push_back(&r);
      by_opt[r.optimizer].push_back(&r);
    }
    nlohmann::json j{{"system", source.system},
                     {"n_trials", finetuned.size()},
                     {"overall", aggregate(finetuned)}};
    for (const auto& [opt, rs] : by_opt) j["per_optimizer"][opt] = aggregate(rs);
    write_atomic(dir + "/layer_changes.json", j.dump(2) + "\n");
  }
  return static_cast<int>(records.size());
}

}  // namespace sekf
