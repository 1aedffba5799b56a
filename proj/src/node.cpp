#include "sekf/node.hpp"

#include <string>

namespace sekf {

namespace {

void check_args(const NodeSpec& spec, const Vector& params, const Vector& x0,
                const Matrix& u_seq) {
  require(spec.valid(), "invalid NodeSpec");
  require(params.size() == param_count(spec.core), "parameter length mismatch");
  require(x0.size() == spec.state_dim(), "x0 length != state dimension");
  require(u_seq.rows() == spec.horizon && u_seq.cols() == spec.input_dim(),
          "u_seq must be horizon x n_u");
}

[[noreturn]] void throw_divergence(int sample, int substep) {
  throw DivergenceError("non-finite state at sample " + std::to_string(sample) +
                        ", substep " + std::to_string(substep));
}

}  // namespace

Matrix predict_horizon(const NodeSpec& spec, const Vector& params,
                       const Vector& x0, const Matrix& u_seq) {
  check_args(spec, params, x0, u_seq);
  const int n_x = spec.state_dim();
  const double h = spec.dt_sample / spec.substeps;

  Vector in(spec.core.input_dim());
  auto f = [&](const Vector& x, int sample) -> Vector {
    in.head(n_x) = x;
    in.tail(spec.input_dim()) = u_seq.row(sample).transpose();
    return forward(spec.core, params, in);
  };

  Matrix traj(spec.horizon, n_x);
  Vector x = x0;
  for (int k = 0; k < spec.horizon; ++k) {
    for (int s = 0; s < spec.substeps; ++s) {
      const Vector k1 = f(x, k);
      const Vector k2 = f(x + 0.5 * h * k1, k);
      const Vector k3 = f(x + 0.5 * h * k2, k);
      const Vector k4 = f(x + h * k3, k);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite()) throw_divergence(k, s);
    }
    traj.row(k) = x.transpose();
  }
  return traj;
}

NodePrediction predict_horizon_with_jacobian(const NodeSpec& spec,
                                             const Vector& params,
                                             const Vector& x0,
                                             const Matrix& u_seq) {
  check_args(spec, params, x0, u_seq);
  const int n_x = spec.state_dim();
  const int n_p = param_count(spec.core);
  const double h = spec.dt_sample / spec.substeps;

  Vector in(spec.core.input_dim());
  // Stage derivative of both the state and the sensitivity S = dx/dparams:
  //   dS/dt = (df/dx) S + df/dparams, evaluated at the stage state, which
  // makes S the exact Jacobian of the discrete RK4 map.
  auto stage = [&](const Vector& x, const Matrix& S, int sample, Vector& k_out,
                   Matrix& dk_out) {
    in.head(n_x) = x;
    in.tail(spec.input_dim()) = u_seq.row(sample).transpose();
    NetworkTangent t = forward_with_jacobians(spec.core, params, in);
    k_out = std::move(t.value);
    dk_out.noalias() = t.d_input.leftCols(n_x) * S;
    dk_out += t.d_params;
  };

  NodePrediction out;
  out.trajectory.resize(spec.horizon, n_x);
  out.jacobian.resize(spec.horizon * n_x, n_p);

  Vector x = x0;
  Matrix S = Matrix::Zero(n_x, n_p);
  Vector k1, k2, k3, k4;
  Matrix d1(n_x, n_p), d2(n_x, n_p), d3(n_x, n_p), d4(n_x, n_p);
  for (int k = 0; k < spec.horizon; ++k) {
    for (int s = 0; s < spec.substeps; ++s) {
      stage(x, S, k, k1, d1);
      stage(x + 0.5 * h * k1, S + 0.5 * h * d1, k, k2, d2);
      stage(x + 0.5 * h * k2, S + 0.5 * h * d2, k, k3, d3);
      stage(x + h * k3, S + h * d3, k, k4, d4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      S += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
      if (!x.allFinite()) throw_divergence(k, s);
    }
    out.trajectory.row(k) = x.transpose();
    out.jacobian.middleRows(k * n_x, n_x) = S;
  }
  return out;
}

Matrix horizon_jacobian(const NodeSpec& spec, const Vector& params,
                        const Vector& x0, const Matrix& u_seq) {
  return predict_horizon_with_jacobian(spec, params, x0, u_seq).jacobian;
}

}  // namespace sekf
