#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sekf/dataset.hpp"
#include "sekf/predictor.hpp"
#include "sekf/types.hpp"

namespace sekf {

struct TrainConfig {
  std::string optimizer = "adam";  // "adam" or "lbfgs"
  double learning_rate = 1e-3;    // lbfgs: initial line-search step length
  int minibatch_size = 64;
  int minibatches_per_epoch = 50;
  int max_epochs = 100;
  int lr_patience = 10;
  double lr_factor = 0.5;
  int early_stop_patience = 20;
  double adam_subset_fraction = 1.0;  // q: fraction of params updated per step
  int lbfgs_history = 10;
  int lbfgs_max_line_searches = 10;
  std::uint64_t seed = 0;

  bool valid() const {
    return (optimizer == "adam" || optimizer == "lbfgs") &&
           learning_rate > 0.0 && minibatch_size > 0 &&
           minibatches_per_epoch > 0 && max_epochs >= 0 && lr_patience > 0 &&
           lr_factor > 0.0 && lr_factor < 1.0 && early_stop_patience > 0 &&
           adam_subset_fraction > 0.0 && adam_subset_fraction <= 1.0 &&
           lbfgs_history > 0 && lbfgs_max_line_searches > 0;
  }
};

/// Mean squared error per Eq-free convention used throughout: mean over
/// examples of ||target - prediction||^2, additionally divided by the
/// flattened output dimension so values are comparable across systems.
double mse_loss(const Predictor& pred, const Vector& params,
                const std::vector<Example>& batch);
/// Same loss over the subset batch[idx[0]], batch[idx[1]], ...
double mse_loss_indexed(const Predictor& pred, const Vector& params,
                        const std::vector<Example>& batch,
                        const std::vector<int>& idx);

/// Gradient of mse_loss: (2 / (N d)) sum_i H_i^T (pred_i - target_i).
Vector grad_loss(const Predictor& pred, const Vector& params,
                 const std::vector<Example>& batch);
Vector grad_loss_indexed(const Predictor& pred, const Vector& params,
                         const std::vector<Example>& batch,
                         const std::vector<int>& idx);

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;

  static AdamState init(int n) {
    return {Vector::Zero(n), Vector::Zero(n), 0};
  }
};

/// Textbook Adam moment update over all parameters; the position update
/// is applied only to the ceil(q n) coordinates of largest |grad|, ties
/// broken by lower index. q = 1 is exactly the unmasked step.
void adam_subset_step(AdamState& state, Vector& params, const Vector& grad,
                      double lr, double q);

/// loss_grad_fn(params, grad_out) -> loss; grad_out may be null when only
/// the loss is needed (line-search probes still fill it here so accepted
/// points reuse the gradient).
using LossGradFn = std::function<double(const Vector&, Vector*)>;

struct LbfgsState {
  std::deque<std::pair<Vector, Vector>> pairs;  // (s, y), newest at back
  int history = 10;
};

struct LbfgsStepInfo {
  double loss = 0.0;        // at the accepted point
  bool fallback = false;    // line search failed, steepest-descent taken
  double step_length = 0.0;
};

/// One L-BFGS iteration: two-loop direction from the stored pairs,
/// backtracking Armijo search (c1 = 1e-4, halving, bounded trials).
/// Empty history descends along -grad / ||grad||. Curvature pairs with
/// s^T y <= 1e-10 are not stored. On line-search failure the iterate
/// falls back to params - lr * grad.
LbfgsStepInfo lbfgs_step(LbfgsState& state, Vector& params,
                         const LossGradFn& loss_grad_fn, double lr,
                         int max_line_searches);

struct CurvePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_s = 0.0;
};

struct TrainOutcome {
  Vector best_params;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  double convergence_wall_s = 0.0;  // elapsed at the best-val epoch
  int epochs_run = 0;
  std::vector<CurvePoint> curve;  // epoch 0 row records the init
  int warnings = 0;               // line-search fallbacks
  bool aborted = false;
  std::string abort_reason;
};

/// Shared epoch loop: minibatches sampled with replacement per epoch,
/// plateau LR decay, early stopping, best-validation selection. Epoch 0
/// evaluates the init so a finetune can legitimately return it.
TrainOutcome train(const Predictor& pred, const Vector& init,
                   const Dataset& train_split, const Dataset& val_split,
                   const TrainConfig& config);

/// CSV `epoch,train_loss,val_loss,lr,wall_clock_s`.
void write_loss_curve(const std::string& path,
                      const std::vector<CurvePoint>& curve);

/// Deterministic mini grid over learning rate {1e-4, 1e-3, 1e-2} and
/// minibatch size {16, 64}; returns base with the best-validation combo
/// filled in. Each probe runs the full train loop on the given splits.
TrainConfig tune_gradient_config(const Predictor& pred, const Vector& init,
                                 const Dataset& train_split,
                                 const Dataset& val_split, TrainConfig base);

}  // namespace sekf
