#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sekf/dataset.hpp"
#include "sekf/predictor.hpp"
#include "sekf/train.hpp"
#include "sekf/types.hpp"

namespace sekf {

struct SekfConfig {
  double r_scalar = 0.01;   // measurement-noise variance, R = r I
  double q_scalar = 1e-4;   // process-noise variance, Q = q I
  double p0_scalar = 1.0;   // initial parameter variance, P0 = p0 I
  int subset_size = 128;    // m
  int minibatch_size = 1;
  int passes = 20;
  /// "uncertainty": score_j = diag_j * sum_i H_ij^2 (default);
  /// "gradient":    score_j = |H^T r|_j.
  std::string selection_score = "uncertainty";
  int skip_abort_threshold = 50;  // consecutive skipped updates before abort
  int early_stop_patience = 0;    // passes without val improvement; 0 = off
  std::uint64_t seed = 0;

  bool valid() const {
    return r_scalar > 0.0 && q_scalar >= 0.0 && p0_scalar > 0.0 &&
           subset_size >= 1 && minibatch_size >= 1 && passes >= 0 &&
           (selection_score == "uncertainty" || selection_score == "gradient") &&
           skip_abort_threshold >= 1 && early_stop_patience >= 0;
  }
};

/// Per-parameter variance; cross-covariances are dropped between steps.
struct CovarianceState {
  Vector diag;

  static CovarianceState init(int n, double p0) {
    return {Vector::Constant(n, p0)};
  }
};

/// Indices (ascending) of the m largest scores s_j = diag_j * sum_i H_ij^2;
/// score ties resolved toward the lower index.
std::vector<int> select_subset(const Matrix& H, const CovarianceState& cov,
                               int m);
/// Gradient-magnitude alternative: s_j = |H^T r|_j.
std::vector<int> select_subset_gradient(const Matrix& H, const Vector& residual,
                                        int m);

struct SekfUpdateInfo {
  bool skipped = false;
  std::string skip_reason;
  double gain_norm = 0.0;  // Frobenius norm of K
};

/// One filter step over a minibatch: inflate the variance diagonal by Q,
/// stack residuals and Jacobians, pick the subset, apply the Kalman gain
/// to the subset parameters and their m x m covariance block. The
/// innovation solve gets one 1e-10-jitter retry; failure or non-finite
/// inputs skip the measurement update (the Q inflation stands).
SekfUpdateInfo sekf_update(const Predictor& pred, Vector& params,
                           CovarianceState& cov,
                           const std::vector<Example>& batch,
                           const SekfConfig& config);

struct SekfPassDiag {
  int pass = 0;
  double val_loss = 0.0;
  double mean_diag = 0.0;
  double max_gain_norm = 0.0;
  int skipped_updates = 0;
};

struct SekfOutcome {
  Vector best_params;
  double best_val_loss = 0.0;
  int best_pass = 0;
  double convergence_wall_s = 0.0;
  int passes_run = 0;
  std::vector<CurvePoint> curve;  // epoch column = pass, lr column = 0
  std::vector<SekfPassDiag> diagnostics;
  int total_skips = 0;
  bool aborted = false;
  std::string abort_reason;
};

/// Sequential passes over the train split, reshuffled per pass from the
/// config seed; validation each pass; best-validation params returned.
/// Pass 0 evaluates the init. Aborts once skip_abort_threshold updates
/// get skipped consecutively.
SekfOutcome train_sekf(const Predictor& pred, const Vector& init,
                       const Dataset& train_split, const Dataset& val_split,
                       const SekfConfig& config);

/// CSV `pass,val_loss,mean_diag,max_gain_norm,skipped_updates`.
void write_sekf_diagnostics(const std::string& path,
                            const std::vector<SekfPassDiag>& diags);

}  // namespace sekf
