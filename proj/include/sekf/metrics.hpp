#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sekf/network.hpp"
#include "sekf/types.hpp"

namespace sekf {

/// Everything recorded for one transfer trial. Losses are on the
/// physical (denormalized) target scale.
struct TrialResult {
  std::string system;       // "spring" or "tclab"
  std::string target_name;  // e.g. "c-10" or "sim2real"
  std::string optimizer;    // "adam", "lbfgs", "sekf"
  std::string init_method;  // "finetune" or "retrain"
  int size = 0;             // training examples (val included)
  int replicate = 0;
  std::uint64_t seed = 0;

  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_loss = 0.0;
  double convergence_wall_s = 0.0;
  double cosine_to_source = 0.0;
  double wasserstein_to_source = 0.0;
  double normalized_test_loss = 0.0;   // vs source test loss on source task
  double normalized_convergence = 0.0; // vs source training wall-clock
  double gap = 0.0;                    // test_loss - train_loss
  int epochs_run = 0;
  bool aborted = false;
  std::string abort_reason;

  Vector final_params;

  nlohmann::json to_json() const;
  static TrialResult from_json(const nlohmann::json& j);
};

/// Generalization gap, test minus train; negative values preserved.
double train_test_gap(const TrialResult& r);

/// Target-task test loss over the source model's own test loss.
double normalized_mse(const TrialResult& r, double source_test_loss);

/// Wall-clock to best validation over the source training wall-clock.
double normalized_convergence_time(const TrialResult& r, double source_time_s);

/// Standard cosine; throws on a zero vector.
double cosine_similarity(const Vector& a, const Vector& b);

/// Empirical 1-D Wasserstein-1 via the CDF-difference integral; handles
/// unequal sample counts. Parameter vectors are compared by treating
/// their entries as scalar samples.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);
double wasserstein_1d(const Vector& a, const Vector& b);
/// Columns are dimensions; per-column distances averaged.
double wasserstein_per_dim_mean(const Matrix& a, const Matrix& b);

/// Per-layer summary of delta = final - source over the flat layout.
/// Histogram bins are shared across layers: 10 equal bins on
/// [0, max |delta|] so layer rows are directly comparable.
struct LayerChange {
  int layer = 0;
  int count = 0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  std::vector<int> histogram;
};
struct LayerChangeReport {
  std::vector<LayerChange> layers;
  double bin_upper = 0.0;  // histogram range is [0, bin_upper]
};
LayerChangeReport layer_change_report(const NetworkSpec& spec,
                                      const Vector& source,
                                      const Vector& final_params);

}  // namespace sekf
