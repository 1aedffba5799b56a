#include "sekf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "sekf/rng.hpp"

namespace sekf {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kArmijoC1 = 1e-4;
constexpr double kCurvatureFloor = 1e-10;

std::vector<int> all_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Vector residual_of(const Predictor& pred, const Vector& prediction,
                   const Example& e) {
  if (!prediction.allFinite())
    throw DivergenceError("non-finite prediction");
  (void)pred;
  return prediction - flatten_target(e.target);
}

/// Shared core so loss-only and loss+grad paths stay consistent.
std::pair<double, Vector> loss_grad_indexed(const Predictor& pred,
                                            const Vector& params,
                                            const std::vector<Example>& batch,
                                            const std::vector<int>& idx) {
  require(!idx.empty(), "loss/grad: empty batch");
  const double denom =
      static_cast<double>(idx.size()) * static_cast<double>(pred.output_dim());
  double sumsq = 0.0;
  Vector grad = Vector::Zero(pred.param_dim());
  for (int i : idx) {
    require(i >= 0 && i < static_cast<int>(batch.size()),
            "loss/grad: index out of range");
    const Example& e = batch[static_cast<std::size_t>(i)];
    if (pred.is_node()) {
      auto [p, jac] = pred.predict_with_jacobian(params, e);
      Vector r = residual_of(pred, p, e);
      sumsq += r.squaredNorm();
      grad.noalias() += jac.transpose() * r;
    } else {
      Vector r = residual_of(pred, pred.predict(params, e), e);
      sumsq += r.squaredNorm();
      grad += pred.vjp(params, e, r);
    }
  }
  return {sumsq / denom, grad * (2.0 / denom)};
}

}  // namespace

double mse_loss_indexed(const Predictor& pred, const Vector& params,
                        const std::vector<Example>& batch,
                        const std::vector<int>& idx) {
  require(!idx.empty(), "mse_loss: empty batch");
  const double denom =
      static_cast<double>(idx.size()) * static_cast<double>(pred.output_dim());
  double sumsq = 0.0;
  for (int i : idx) {
    require(i >= 0 && i < static_cast<int>(batch.size()),
            "mse_loss: index out of range");
    const Example& e = batch[static_cast<std::size_t>(i)];
    sumsq += residual_of(pred, pred.predict(params, e), e).squaredNorm();
  }
  return sumsq / denom;
}

double mse_loss(const Predictor& pred, const Vector& params,
                const std::vector<Example>& batch) {
  return mse_loss_indexed(pred, params, batch,
                          all_indices(static_cast<int>(batch.size())));
}

Vector grad_loss_indexed(const Predictor& pred, const Vector& params,
                         const std::vector<Example>& batch,
                         const std::vector<int>& idx) {
  return loss_grad_indexed(pred, params, batch, idx).second;
}

Vector grad_loss(const Predictor& pred, const Vector& params,
                 const std::vector<Example>& batch) {
  return grad_loss_indexed(pred, params, batch,
                           all_indices(static_cast<int>(batch.size())));
}

void adam_subset_step(AdamState& state, Vector& params, const Vector& grad,
                      double lr, double q) {
  const int n = static_cast<int>(params.size());
  require(grad.size() == n && state.m.size() == n && state.v.size() == n,
          "adam_subset_step: size mismatch");
  require(q > 0.0 && q <= 1.0, "adam_subset_step: q must be in (0, 1]");

  ++state.step;
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grad;
  state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  const Vector delta =
      lr * (state.m / c1).cwiseQuotient(((state.v / c2).cwiseSqrt().array() + kAdamEps).matrix());

  if (q >= 1.0) {
    params -= delta;
    return;
  }
  int k = static_cast<int>(std::ceil(q * n));
  k = std::clamp(k, 1, n);
  std::vector<int> order = all_indices(n);
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                   [&grad](int a, int b) {
                     const double ga = std::fabs(grad[a]), gb = std::fabs(grad[b]);
                     return ga > gb || (ga == gb && a < b);
                   });
  for (int i = 0; i < k; ++i) params[order[static_cast<std::size_t>(i)]] -= delta[order[static_cast<std::size_t>(i)]];
}

namespace {

LbfgsStepInfo lbfgs_fallback_step(Vector& params, const Vector& g0, double lr,
                                  const LossGradFn& fn) {
  params -= lr * g0;
  Vector unused;
  LbfgsStepInfo info;
  info.loss = fn(params, &unused);
  info.fallback = true;
  info.step_length = lr;
  return info;
}

}  // namespace

LbfgsStepInfo lbfgs_step(LbfgsState& state, Vector& params,
                         const LossGradFn& loss_grad_fn, double lr,
                         int max_line_searches) {
  Vector g0(params.size());
  const double f0 = loss_grad_fn(params, &g0);
  if (!g0.allFinite() || !std::isfinite(f0))
    throw DivergenceError("non-finite loss or gradient in lbfgs_step");
  const double gnorm = g0.norm();
  if (gnorm == 0.0) return {f0, false, 0.0};

  // Two-loop recursion over stored (s, y) pairs, newest first.
  Vector d;
  if (state.pairs.empty()) {
    d = -g0 / gnorm;
  } else {
    Vector qv = g0;
    std::vector<double> alpha(state.pairs.size());
    for (int i = static_cast<int>(state.pairs.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = state.pairs[static_cast<std::size_t>(i)];
      const double rho = 1.0 / s.dot(y);
      alpha[static_cast<std::size_t>(i)] = rho * s.dot(qv);
      qv -= alpha[static_cast<std::size_t>(i)] * y;
    }
    const auto& [s_last, y_last] = state.pairs.back();
    qv *= s_last.dot(y_last) / y_last.squaredNorm();
    for (std::size_t i = 0; i < state.pairs.size(); ++i) {
      const auto& [s, y] = state.pairs[i];
      const double rho = 1.0 / s.dot(y);
      qv += s * (alpha[i] - rho * y.dot(qv));
    }
    d = -qv;
  }

  double gd = g0.dot(d);
  if (gd >= 0.0) {  // history produced a non-descent direction
    d = -g0 / gnorm;
    gd = -gnorm;
  }

  double t = lr;
  Vector gt(params.size());
  for (int trial = 0; trial < max_line_searches; ++trial) {
    Vector xt = params + t * d;
    const double ft = loss_grad_fn(xt, &gt);
    if (std::isfinite(ft) && gt.allFinite() && ft <= f0 + kArmijoC1 * t * gd) {
      Vector s = xt - params;
      Vector y = gt - g0;
      if (s.dot(y) > kCurvatureFloor) {
        state.pairs.emplace_back(std::move(s), std::move(y));
        while (static_cast<int>(state.pairs.size()) > state.history)
          state.pairs.pop_front();
      }
      params = std::move(xt);
      return {ft, false, t};
    }
    t *= 0.5;
  }
  return lbfgs_fallback_step(params, g0, lr, loss_grad_fn);
}

TrainOutcome train(const Predictor& pred, const Vector& init,
                   const Dataset& train_split, const Dataset& val_split,
                   const TrainConfig& config) {
  require(config.valid(), "train: invalid config");
  require(!train_split.empty() && !val_split.empty(), "train: empty split");
  require(init.size() == pred.param_dim(), "train: init size mismatch");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  TrainOutcome out;
  Vector params = init;
  double lr = config.learning_rate;
  out.best_params = init;
  out.best_val_loss = mse_loss(pred, init, val_split.examples);
  out.best_epoch = 0;
  out.curve.push_back({0, mse_loss(pred, init, train_split.examples),
                       out.best_val_loss, lr, elapsed()});

  Rng rng(config.seed);
  AdamState adam = AdamState::init(pred.param_dim());
  LbfgsState lbfgs;
  lbfgs.history = config.lbfgs_history;
  const int n_train = train_split.size();
  int epochs_since_improve = 0;
  int epochs_since_lr_drop = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    try {
      for (int mb = 0; mb < config.minibatches_per_epoch; ++mb) {
        std::vector<int> idx(static_cast<std::size_t>(config.minibatch_size));
        for (auto& i : idx)
          i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_train)));
        if (config.optimizer == "adam") {
          Vector g = grad_loss_indexed(pred, params, train_split.examples, idx);
          adam_subset_step(adam, params, g, lr, config.adam_subset_fraction);
        } else {
          LossGradFn fn = [&](const Vector& p, Vector* g_out) {
            auto [loss, g] =
                loss_grad_indexed(pred, p, train_split.examples, idx);
            if (g_out) *g_out = std::move(g);
            return loss;
          };
          LbfgsStepInfo info =
              lbfgs_step(lbfgs, params, fn, lr, config.lbfgs_max_line_searches);
          if (info.fallback) ++out.warnings;
        }
        if (!params.allFinite())
          throw DivergenceError("non-finite parameters after update");
      }

      const double train_loss = mse_loss(pred, params, train_split.examples);
      const double val_loss = mse_loss(pred, params, val_split.examples);
      if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
        throw DivergenceError("non-finite epoch loss");
      out.curve.push_back({epoch, train_loss, val_loss, lr, elapsed()});
      out.epochs_run = epoch;

      if (val_loss < out.best_val_loss) {
        out.best_val_loss = val_loss;
        out.best_params = params;
        out.best_epoch = epoch;
        out.convergence_wall_s = elapsed();
        epochs_since_improve = 0;
        epochs_since_lr_drop = 0;
      } else {
        ++epochs_since_improve;
        ++epochs_since_lr_drop;
      }
      if (epochs_since_improve >= config.early_stop_patience) break;
      if (epochs_since_lr_drop >= config.lr_patience) {
        lr *= config.lr_factor;
        epochs_since_lr_drop = 0;
      }
    } catch (const DivergenceError& e) {
      out.aborted = true;
      out.abort_reason = e.what();
      break;
    }
  }
  return out;
}

void write_loss_curve(const std::string& path,
                      const std::vector<CurvePoint>& curve) {
  std::ofstream f(path);
  require(f.good(), "write_loss_curve: cannot open " + path);
  f << "epoch,train_loss,val_loss,lr,wall_clock_s\n";
  char buf[200];
  for (const auto& c : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", c.epoch,
                  c.train_loss, c.val_loss, c.lr, c.wall_s);
    f << buf;
  }
  require(f.good(), "write_loss_curve: write failed for " + path);
}

TrainConfig tune_gradient_config(const Predictor& pred, const Vector& init,
                                 const Dataset& train_split,
                                 const Dataset& val_split, TrainConfig base) {
  const double lrs[] = {1e-4, 1e-3, 1e-2};
  const int batches[] = {16, 64};
  double best_val = std::numeric_limits<double>::infinity();
  TrainConfig best = base;
  for (double lr : lrs)
    for (int batch : batches) {
      TrainConfig probe = base;
      probe.learning_rate = lr;
      probe.minibatch_size = batch;
      TrainOutcome o = train(pred, init, train_split, val_split, probe);
      if (!o.aborted && o.best_val_loss < best_val) {
        best_val = o.best_val_loss;
        best = probe;
      }
    }
  return best;
}

}  // namespace sekf
