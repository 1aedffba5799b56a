#pragma once

#include "sekf/network.hpp"
#include "sekf/types.hpp"

namespace sekf {

/// Neural-ODE predictor: integrates dx/dt = f_params(x, u) with classical
/// fixed-step RK4 and emits the state at every sample interval. Inputs are
/// zero-order-held across each interval.
struct NodeSpec {
  NetworkSpec core;   // input width n_x + n_u, output width n_x
  double dt_sample;   // seconds between emitted samples
  int substeps;       // RK4 steps per sample interval, >= 1
  int horizon;        // number of emitted samples

  int state_dim() const { return core.output_dim(); }
  int input_dim() const { return core.input_dim() - core.output_dim(); }
  bool valid() const {
    return core.valid() && input_dim() >= 0 && dt_sample > 0.0 &&
           substeps >= 1 && horizon >= 1;
  }
};

/// Trajectory of the integrated state, one row per emitted sample
/// (horizon x n_x). Row i is the state after (i + 1) * dt_sample.
/// u_seq is horizon x n_u (zero columns allowed when n_u == 0).
Matrix predict_horizon(const NodeSpec& spec, const Vector& params,
                       const Vector& x0, const Matrix& u_seq);

/// Trajectory plus its Jacobian with respect to the flat parameters,
/// via forward sensitivities run through the same RK4 stages (the exact
/// derivative of the discrete map). Jacobian rows are sample-major,
/// state-minor: row k * n_x + s.
struct NodePrediction {
  Matrix trajectory;  // horizon x n_x
  Matrix jacobian;    // (horizon * n_x) x param_count
};
NodePrediction predict_horizon_with_jacobian(const NodeSpec& spec,
                                             const Vector& params,
                                             const Vector& x0,
                                             const Matrix& u_seq);

Matrix horizon_jacobian(const NodeSpec& spec, const Vector& params,
                        const Vector& x0, const Matrix& u_seq);

}  // namespace sekf
