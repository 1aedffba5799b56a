#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sekf/node.hpp"
#include "sekf/rng.hpp"
#include "sekf/types.hpp"

using sekf::Matrix;
using sekf::NetworkSpec;
using sekf::NodeSpec;
using sekf::Vector;

namespace {

// Near-linear scalar field f(x) = slope * x via the small-weight trick:
// A * sigmoid(eps x) - A/2 with A = 4 * slope / eps is slope * x up to
// O(eps^2 x^3).
Vector linear_field_params(double slope, double eps) {
  Vector p(4);
  const double a = 4.0 * slope / eps;
  p << eps, 0.0, a, -a / 2.0;
  return p;
}

}  // namespace

TEST_CASE("hand-built decay field reproduces exp(-t) within 1e-6") {
  NodeSpec spec;
  spec.core = NetworkSpec{{1, 1, 1}};
  spec.dt_sample = 0.1;
  spec.substeps = 1;
  spec.horizon = 60;
  const Vector params = linear_field_params(-1.0, 1e-4);
  Vector x0(1);
  x0 << 1.0;
  const Matrix u_seq(60, 0);
  const Matrix traj = sekf::predict_horizon(spec, params, x0, u_seq);
  REQUIRE(traj.rows() == 60);
  REQUIRE(traj.cols() == 1);
  double max_err = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double t = 0.1 * (k + 1);
    max_err = std::max(max_err, std::fabs(traj(k, 0) - std::exp(-t)));
  }
  CHECK(max_err < 1e-6);
}

TEST_CASE("zero field leaves the state constant") {
  NodeSpec spec;
  spec.core = NetworkSpec{{2, 3, 2}};
  spec.dt_sample = 1.0;
  spec.substeps = 4;
  spec.horizon = 5;
  Vector params = Vector::Zero(sekf::param_count(spec.core));
  params.head(9).setRandom();  // first layer arbitrary, output layer zero
  Vector x0(2);
  x0 << 3.5, -1.25;
  const Matrix u_seq(5, 0);
  const Matrix traj = sekf::predict_horizon(spec, params, x0, u_seq);
  for (int k = 0; k < 5; ++k) {
    CHECK(traj(k, 0) == 3.5);
    CHECK(traj(k, 1) == -1.25);
  }
}

TEST_CASE("input channel is zero-order-held per sample") {
  // f(x, u) = u makes the sampled map x_{k+1} = x_k + dt * u_k.
  NodeSpec spec;
  spec.core = NetworkSpec{{2, 1, 1}};
  spec.dt_sample = 0.5;
  spec.substeps = 3;
  spec.horizon = 6;
  const double eps = 1e-4, a = 4.0 / eps;
  Vector params(5);
  params << 0.0, eps, 0.0, a, -a / 2.0;  // w_x, w_u, b0, w2, b2
  Vector x0(1);
  x0 << 2.0;
  Matrix u_seq(6, 1);
  u_seq << 1.0, -0.5, 0.0, 0.75, -1.0, 0.25;
  const Matrix traj = sekf::predict_horizon(spec, params, x0, u_seq);
  double expect = 2.0;
  for (int k = 0; k < 6; ++k) {
    expect += 0.5 * u_seq(k, 0);
    CHECK(traj(k, 0) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("parameter Jacobian matches finite differences on random nets") {
  struct Case {
    NetworkSpec core;
    int horizon;
    int substeps;
  };
  const std::vector<Case> cases = {
      {NetworkSpec{{1, 3, 1}}, 4, 1},
      {NetworkSpec{{3, 5, 2}}, 3, 2},
      {NetworkSpec{{5, 8, 8, 3}}, 3, 1},
  };
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    NodeSpec spec;
    spec.core = cases[ci].core;
    spec.dt_sample = 0.2;
    spec.substeps = cases[ci].substeps;
    spec.horizon = cases[ci].horizon;
    const Vector params = sekf::init_params(spec.core, 900 + ci);
    sekf::Rng rng(17 + ci);
    Vector x0(spec.state_dim());
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = rng.normal();
    Matrix u_seq(spec.horizon, spec.input_dim());
    for (Eigen::Index i = 0; i < u_seq.size(); ++i)
      u_seq.data()[i] = rng.normal();

    const auto pred = sekf::predict_horizon_with_jacobian(spec, params, x0, u_seq);
    auto rollout = [&](const Vector& q) -> Vector {
      const Matrix t = sekf::predict_horizon(spec, q, x0, u_seq);
      Matrix tt = t.transpose();  // sample-major, state-minor flattening
      return Eigen::Map<const Vector>(tt.data(), tt.size());
    };
    const Matrix fd = oracle::fd_jacobian(rollout, params, 1e-5);
    const double scale = std::max(1.0, pred.jacobian.cwiseAbs().maxCoeff());
    CHECK((pred.jacobian - fd).cwiseAbs().maxCoeff() / scale < 1e-4);
  }
}

TEST_CASE("sensitivity recursion matches a hand-rolled RK4 chain rule") {
  NodeSpec spec;
  spec.core = NetworkSpec{{3, 4, 2}};
  spec.dt_sample = 0.3;
  spec.substeps = 2;
  spec.horizon = 2;
  const Vector params = sekf::init_params(spec.core, 55);
  const int n_x = 2, n_p = sekf::param_count(spec.core);
  Vector x0(2);
  x0 << 0.4, -0.2;
  Matrix u_seq(2, 1);
  u_seq << 0.6, -0.3;

  // Manual propagation: S' = (df/dx) S + df/dparams through each stage.
  const double h = spec.dt_sample / spec.substeps;
  Vector x = x0;
  Matrix s_mat = Matrix::Zero(n_x, n_p);
  Matrix manual_jac(spec.horizon * n_x, n_p);
  auto eval = [&](const Vector& xs, int sample) {
    Vector in(3);
    in << xs[0], xs[1], u_seq(sample, 0);
    return sekf::forward_with_jacobians(spec.core, params, in);
  };
  for (int k = 0; k < spec.horizon; ++k) {
    for (int s = 0; s < spec.substeps; ++s) {
      const auto t1 = eval(x, k);
      const Matrix d1 = t1.d_input.leftCols(n_x) * s_mat + t1.d_params;
      const auto t2 = eval(x + 0.5 * h * t1.value, k);
      const Matrix d2 =
          t2.d_input.leftCols(n_x) * (s_mat + 0.5 * h * d1) + t2.d_params;
      const auto t3 = eval(x + 0.5 * h * t2.value, k);
      const Matrix d3 =
          t3.d_input.leftCols(n_x) * (s_mat + 0.5 * h * d2) + t3.d_params;
      const auto t4 = eval(x + h * t3.value, k);
      const Matrix d4 =
          t4.d_input.leftCols(n_x) * (s_mat + h * d3) + t4.d_params;
      x += (h / 6.0) * (t1.value + 2.0 * t2.value + 2.0 * t3.value + t4.value);
      s_mat += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    }
    manual_jac.middleRows(k * n_x, n_x) = s_mat;
  }

  const auto pred = sekf::predict_horizon_with_jacobian(spec, params, x0, u_seq);
  CHECK((pred.jacobian - manual_jac).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("jacobian rows are sample-major, state-minor") {
  NodeSpec spec;
  spec.core = NetworkSpec{{2, 4, 2}};
  spec.dt_sample = 0.25;
  spec.substeps = 1;
  spec.horizon = 3;
  const Vector params = sekf::init_params(spec.core, 4);
  Vector x0(2);
  x0 << 1.0, -1.0;
  const Matrix u_seq(3, 0);
  const auto pred = sekf::predict_horizon_with_jacobian(spec, params, x0, u_seq);
  const int k = 1, s = 1, j = 7;
  const double h = 1e-6;
  Vector hi = params, lo = params;
  hi[j] += h;
  lo[j] -= h;
  const double fd = (sekf::predict_horizon(spec, hi, x0, u_seq)(k, s) -
                     sekf::predict_horizon(spec, lo, x0, u_seq)(k, s)) /
                    (2.0 * h);
  CHECK(pred.jacobian(k * 2 + s, j) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("trajectory agrees between plain and jacobian-bearing rollouts") {
  NodeSpec spec;
  spec.core = NetworkSpec{{4, 6, 3}};
  spec.dt_sample = 0.4;
  spec.substeps = 2;
  spec.horizon = 4;
  const Vector params = sekf::init_params(spec.core, 12);
  Vector x0(3);
  x0 << 0.1, 0.2, 0.3;
  Matrix u_seq(4, 1);
  u_seq << 1.0, 0.0, -1.0, 0.5;
  const Matrix plain = sekf::predict_horizon(spec, params, x0, u_seq);
  const auto pred = sekf::predict_horizon_with_jacobian(spec, params, x0, u_seq);
  CHECK(plain == pred.trajectory);
  CHECK(sekf::horizon_jacobian(spec, params, x0, u_seq) == pred.jacobian);
}

TEST_CASE("non-finite states raise DivergenceError") {
  NodeSpec spec;
  spec.core = NetworkSpec{{1, 1, 1}};
  spec.dt_sample = 1.0;
  spec.substeps = 1;
  spec.horizon = 10;
  Vector params(4);
  params << 0.0, 50.0, 1e308, 0.0;  // f ~ 1e308, stage sum overflows
  Vector x0(1);
  x0 << 0.0;
  const Matrix u_seq(10, 0);
  CHECK_THROWS_AS(sekf::predict_horizon(spec, params, x0, u_seq),
                  sekf::DivergenceError);
  CHECK_THROWS_AS(sekf::predict_horizon_with_jacobian(spec, params, x0, u_seq),
                  sekf::DivergenceError);
}

TEST_CASE("shape mismatches are rejected") {
  NodeSpec spec;
  spec.core = NetworkSpec{{3, 4, 2}};
  spec.dt_sample = 0.1;
  spec.substeps = 1;
  spec.horizon = 2;
  const Vector params = sekf::init_params(spec.core, 1);
  Vector x0(2);
  x0.setZero();
  CHECK_THROWS_AS(
      sekf::predict_horizon(spec, params, Vector::Zero(3), Matrix(2, 1)),
      sekf::ContractError);
  CHECK_THROWS_AS(sekf::predict_horizon(spec, params, x0, Matrix(3, 1)),
                  sekf::ContractError);
  CHECK_THROWS_AS(sekf::predict_horizon(spec, params, x0, Matrix(2, 2)),
                  sekf::ContractError);
}
