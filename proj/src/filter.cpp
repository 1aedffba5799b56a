#include "sekf/filter.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sekf/rng.hpp"

namespace sekf {
namespace {

constexpr double kDiagFloor = 1e-12;
constexpr double kJitter = 1e-10;

std::vector<int> top_m_by_score(const Vector& score, int m) {
  const int n = static_cast<int>(score.size());
  require(m >= 1 && m <= n, "select_subset: m out of range");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + (m - 1), order.end(),
                   [&score](int a, int b) {
                     return score[a] > score[b] ||
                            (score[a] == score[b] && a < b);
                   });
  std::vector<int> subset(order.begin(), order.begin() + m);
  std::sort(subset.begin(), subset.end());
  return subset;
}

}  // namespace

std::vector<int> select_subset(const Matrix& H, const CovarianceState& cov,
                               int m) {
  require(H.cols() == cov.diag.size(), "select_subset: dim mismatch");
  const Vector score =
      cov.diag.cwiseProduct(H.colwise().squaredNorm().transpose());
  return top_m_by_score(score, m);
}

std::vector<int> select_subset_gradient(const Matrix& H, const Vector& residual,
                                        int m) {
  require(H.rows() == residual.size(), "select_subset_gradient: dim mismatch");
  const Vector score = (H.transpose() * residual).cwiseAbs();
  return top_m_by_score(score, m);
}

SekfUpdateInfo sekf_update(const Predictor& pred, Vector& params,
                           CovarianceState& cov,
                           const std::vector<Example>& batch,
                           const SekfConfig& config) {
  require(config.valid(), "sekf_update: invalid config");
  const int n = pred.param_dim();
  require(params.size() == n && cov.diag.size() == n,
          "sekf_update: state size mismatch");
  require(!batch.empty() &&
              static_cast<int>(batch.size()) <= config.minibatch_size,
          "sekf_update: batch larger than minibatch_size");
  require(config.subset_size <= n, "sekf_update: subset larger than n_pi");

  cov.diag.array() += config.q_scalar;  // predict: random-walk inflation

  SekfUpdateInfo info;
  const int d_out = pred.output_dim();
  const int d = static_cast<int>(batch.size()) * d_out;
  Matrix H(d, n);
  Vector r(d);
  try {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto [p, jac] = pred.predict_with_jacobian(params, batch[i]);
      if (!p.allFinite() || !jac.allFinite())
        throw DivergenceError("non-finite prediction or Jacobian");
      const auto row0 = static_cast<Eigen::Index>(i) * d_out;
      r.segment(row0, d_out) = flatten_target(batch[i].target) - p;
      H.middleRows(row0, d_out) = jac;
    }
  } catch (const DivergenceError& e) {
    info.skipped = true;
    info.skip_reason = e.what();
    return info;
  }
  if (!r.allFinite()) {
    info.skipped = true;
    info.skip_reason = "non-finite residual";
    return info;
  }

  const std::vector<int> subset =
      config.selection_score == "gradient"
          ? select_subset_gradient(H, r, config.subset_size)
          : select_subset(H, cov, config.subset_size);
  const int m = static_cast<int>(subset.size());

  Matrix Hi(d, m);
  Vector pdiag(m);
  for (int j = 0; j < m; ++j) {
    Hi.col(j) = H.col(subset[static_cast<std::size_t>(j)]);
    pdiag[j] = cov.diag[subset[static_cast<std::size_t>(j)]];
  }

  const Matrix HiP = Hi * pdiag.asDiagonal();       // d x m
  Matrix S = HiP * Hi.transpose();                  // innovation covariance
  S.diagonal().array() += config.r_scalar;

  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    S.diagonal().array() += kJitter;
    llt.compute(S);
  }
  if (llt.info() != Eigen::Success) {
    info.skipped = true;
    info.skip_reason = "innovation solve failed";
    return info;
  }
  // K = P_I Hi^T S^-1; S is symmetric, so solve against HiP and transpose.
  const Matrix K = llt.solve(HiP).transpose();  // m x d
  if (!K.allFinite()) {
    info.skipped = true;
    info.skip_reason = "non-finite gain";
    return info;
  }

  const Vector dpi = K * r;
  Vector new_diag(m);
  for (int j = 0; j < m; ++j)
    new_diag[j] =
        std::max(pdiag[j] * (1.0 - K.row(j).dot(Hi.col(j))), kDiagFloor);

  for (int j = 0; j < m; ++j) {
    params[subset[static_cast<std::size_t>(j)]] += dpi[j];
    cov.diag[subset[static_cast<std::size_t>(j)]] = new_diag[j];
  }
  info.gain_norm = K.norm();
  return info;
}

SekfOutcome train_sekf(const Predictor& pred, const Vector& init,
                       const Dataset& train_split, const Dataset& val_split,
                       const SekfConfig& config) {
  require(config.valid(), "train_sekf: invalid config");
  require(!train_split.empty() && !val_split.empty(), "train_sekf: empty split");
  require(init.size() == pred.param_dim(), "train_sekf: init size mismatch");
  require(config.subset_size <= pred.param_dim(),
          "train_sekf: subset larger than n_pi");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  SekfOutcome out;
  Vector params = init;
  CovarianceState cov =
      CovarianceState::init(pred.param_dim(), config.p0_scalar);
  out.best_params = init;
  out.best_val_loss = mse_loss(pred, init, val_split.examples);
  out.best_pass = 0;
  out.curve.push_back({0, mse_loss(pred, init, train_split.examples),
                       out.best_val_loss, 0.0, elapsed()});
  out.diagnostics.push_back(
      {0, out.best_val_loss, cov.diag.mean(), 0.0, 0});

  Rng rng(config.seed);
  const int n_train = train_split.size();
  std::vector<int> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);
  int consecutive_skips = 0;
  int passes_since_improve = 0;

  for (int pass = 1; pass <= config.passes && !out.aborted; ++pass) {
    rng.shuffle(order);
    double max_gain = 0.0;
    int pass_skips = 0;
    for (int start = 0; start < n_train && !out.aborted;
         start += config.minibatch_size) {
      const int b = std::min(config.minibatch_size, n_train - start);
      std::vector<Example> batch;
      batch.reserve(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i)
        batch.push_back(
            train_split.examples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])]);
      SekfUpdateInfo info = sekf_update(pred, params, cov, batch, config);
      if (info.skipped) {
        ++pass_skips;
        ++out.total_skips;
        if (++consecutive_skips >= config.skip_abort_threshold) {
          out.aborted = true;
          out.abort_reason = "consecutive skipped updates: " + info.skip_reason;
        }
      } else {
        consecutive_skips = 0;
        max_gain = std::max(max_gain, info.gain_norm);
      }
    }
    if (out.aborted) break;

    try {
      const double train_loss = mse_loss(pred, params, train_split.examples);
      const double val_loss = mse_loss(pred, params, val_split.examples);
      if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
        throw DivergenceError("non-finite pass loss");
      out.curve.push_back({pass, train_loss, val_loss, 0.0, elapsed()});
      out.diagnostics.push_back(
          {pass, val_loss, cov.diag.mean(), max_gain, pass_skips});
      out.passes_run = pass;
      if (val_loss < out.best_val_loss) {
        out.best_val_loss = val_loss;
        out.best_params = params;
        out.best_pass = pass;
        out.convergence_wall_s = elapsed();
        passes_since_improve = 0;
      } else if (++passes_since_improve >= config.early_stop_patience &&
                 config.early_stop_patience > 0) {
        break;
      }
    } catch (const DivergenceError& e) {
      out.aborted = true;
      out.abort_reason = e.what();
    }
  }
  return out;
}

void write_sekf_diagnostics(const std::string& path,
                            const std::vector<SekfPassDiag>& diags) {
  std::ofstream f(path);
  require(f.good(), "write_sekf_diagnostics: cannot open " + path);
  f << "pass,val_loss,mean_diag,max_gain_norm,skipped_updates\n";
  char buf[200];
  for (const auto& d : diags) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d\n", d.pass,
                  d.val_loss, d.mean_diag, d.max_gain_norm, d.skipped_updates);
    f << buf;
  }
  require(f.good(), "write_sekf_diagnostics: write failed for " + path);
}

}  // namespace sekf
