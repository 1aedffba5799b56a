#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sekf/dataset.hpp"
#include "sekf/filter.hpp"
#include "sekf/metrics.hpp"
#include "sekf/predictor.hpp"
#include "sekf/train.hpp"
#include "sekf/types.hpp"

namespace sekf {

/// Full grid description. JSON round-trips; absent keys keep defaults.
/// Desk-scale defaults are deliberately smaller than the reference
/// experiments; the scale factors are echoed into artifact metadata.
struct ExperimentConfig {
  std::string system = "spring";  // "spring" or "tclab"
  std::string output_dir = "out/spring";
  std::uint64_t seed = 1;

  std::vector<std::string> targets = {"c-10"};
  std::vector<int> sizes = {10, 1000};
  int replicates = 10;
  std::vector<std::string> optimizers = {"adam", "lbfgs", "sekf"};
  std::vector<std::string> init_methods = {"finetune", "retrain"};

  // Source data (spring: example counts; tclab: one run of source_hours,
  // windows at source_stride).
  int source_train = 9000;
  int source_val = 1000;
  int source_test = 2000;
  double source_hours = 336.0;  // tclab only: 14 days
  int source_stride = 10;       // tclab only
  double noise_sigma = 0.05;    // spring: position sigma; tclab: Kelvin

  // Target data.
  int candidates_per_replicate = 1000;
  int test_per_replicate = 1000;
  double target_noise_factor = 1.0;  // tclab sim2real uses 2.0
  int target_stride = 1;             // tclab only
  int test_stride = 1;               // tclab only (kept equal here)

  TrainConfig adam_config;
  TrainConfig lbfgs_config;
  SekfConfig sekf_finetune;
  SekfConfig sekf_retrain;
  int source_max_epochs = 1000;
  bool tune = false;        // run the deterministic LR/batch mini grid per trial
  bool save_curves = false; // per-trial loss-curve / diagnostics CSVs

  /// Fills per-optimizer sub-config defaults (lbfgs step length, SEKF
  /// prior widths per init method).
  ExperimentConfig();

  bool valid() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);

  /// output_dir resolved against the SEKF_OUT_ROOT env var when set.
  std::string resolved_output_dir() const;
};

/// Spring/TCLab parameter transform encoded in a target name: "<p><+|->
/// <percent>" scales one parameter, e.g. "c-10" -> c *= 0.9; "base" is
/// the identity. TCLab additionally accepts "sim2real" (U, alpha1,
/// alpha2 each -10%).
SpringParams apply_spring_target(SpringParams base, const std::string& name);
TclabParams apply_tclab_target(TclabParams base, const std::string& name);

struct SourceArtifact {
  std::string system;
  Vector params;
  Normalizer normalizer;
  double test_loss = 0.0;     // physical scale, source test split
  double train_wall_s = 0.0;  // wall-clock to best validation
  std::uint64_t seed = 0;
  nlohmann::json meta;

  void save(const std::string& path) const;
  static SourceArtifact load(const std::string& path);
};

Predictor make_predictor(const std::string& system);

/// Loss on the physical scale: inputs normalized with the dataset's
/// normalizer, predictions denormalized, compared against raw targets
/// under the same (1 / N d) convention as mse_loss.
double physical_loss(const Predictor& pred, const Vector& params,
                     const Dataset& raw);

/// Trains the source model on freshly built source data, persists the
/// artifact plus its loss curve under the output dir, returns it.
SourceArtifact train_source(const ExperimentConfig& config);

/// Deterministic target pool for one transform: replicates *
/// (candidates + test) examples, sliced later by split_protocol.
Dataset build_target_pool(const ExperimentConfig& config,
                          const std::string& target_name);

struct TrialSpec {
  std::string target_name;
  std::string optimizer;
  std::string init_method;
  int size = 0;
  int replicate = 0;

  std::string id(const std::string& system) const;
  std::uint64_t trial_seed(std::uint64_t config_seed,
                           const std::string& system) const;
};

TrialResult run_trial(const ExperimentConfig& config,
                      const SourceArtifact& source, const Dataset& target_pool,
                      const TrialSpec& spec);

struct GridSummary {
  int total = 0;
  int executed = 0;
  int skipped = 0;   // resumed: record already present
  int failed = 0;    // aborted records (divergence or trial exception)
};

/// Number of trials the factor grid expands to, without running any.
int grid_trial_count(const ExperimentConfig& config);

/// Runs the whole factor grid on a bounded worker pool; one JSON record
/// per trial under <dir>/trials, written atomically; completed trials
/// are skipped when resume is set. Also refreshes the aggregate report.
GridSummary run_grid(const ExperimentConfig& config, int jobs, bool resume);

/// Reads trial records under dir, writes results.csv; optionally the
/// ANOVA table (anova.csv) and the layer-change summary
/// (layer_changes.json). Returns the number of records found.
int write_report(const std::string& dir, bool anova, bool layer_changes);

}  // namespace sekf
