#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sekf/types.hpp"

namespace sekf {

/// Damped spring-mass system: m x'' + c x' + k x = u.
struct SpringParams {
  double m = 1.0;   // kg
  double c = 0.5;   // N s / m
  double k = 1.0;   // N / m
  double u = 0.0;   // N, constant forcing

  bool valid() const { return m > 0.0 && k > 0.0 && c >= 0.0; }
};

/// Two-heater thermal plant, coupled energy balances per heater with
/// convective and radiative exchange between the heaters.
struct TclabParams {
  double m = 0.004;        // kg
  double c_p = 500.0;      // J / (kg K)
  double U = 10.0;         // W / (m^2 K)
  double A = 1.0e-3;       // m^2, exposed area
  double A_s = 2.0e-4;     // m^2, inter-heater area
  double eps = 0.9;        // emissivity
  double sigma = 5.67e-8;  // W / (m^2 K^4)
  double alpha1 = 0.01;    // W / %
  double alpha2 = 0.0075;  // W / %
  double T_inf = 296.15;   // K

  bool valid() const {
    return m > 0 && c_p > 0 && U > 0 && A > 0 && A_s > 0 && eps > 0 &&
           eps <= 1.0 && sigma > 0 && alpha1 > 0 && alpha2 > 0 && T_inf > 0;
  }
};

/// Piecewise-constant heater commands. Segment i holds (q1, q2) percent
/// from start_s[i] until start_s[i + 1] (or forever, for the last one).
struct HeaterSchedule {
  std::vector<double> start_s;
  std::vector<double> q1;  // percent, 0..100
  std::vector<double> q2;

  /// Commands active at time t (last segment extends to infinity).
  std::pair<double, double> at(double t) const;
};

/// Uniformly sampled state trajectory: column 0 is time, then state
/// columns, then input columns.
struct Trajectory {
  std::vector<std::string> columns;  // "t", states..., inputs...
  Matrix data;                       // samples x columns

  std::string to_csv() const;
};

/// RK4 integration of the spring, sampled every dt (t = 0 included).
/// States are position and velocity; the forcing column repeats u.
Trajectory simulate_spring(const SpringParams& p, double x0, double v0,
                           double duration, double dt);

/// RK4 integration of the thermal plant, heater powers zero-order-held
/// per schedule. Columns: t, T1, T2, Q1, Q2.
Trajectory simulate_tclab(const TclabParams& p, double T1_0, double T2_0,
                          const HeaterSchedule& schedule, double duration,
                          double dt);

/// Pseudo-random excitation: interval lengths uniform in [60, 600] s
/// (snapped to the 10 s sampling grid so zero-order holds line up), each
/// heater 50% exactly zero, otherwise uniform(0, 100) percent.
HeaterSchedule gen_heater_schedule(std::uint64_t seed, double duration);

/// Adds i.i.d. Gaussian noise to every state entry of a trajectory copy.
/// Time and input columns are left untouched.
Trajectory add_noise(const Trajectory& traj, int n_state_cols, double sigma,
                     std::uint64_t seed);

/// Gaussian noise over a plain matrix, one draw per entry, row-major order.
Matrix add_noise(const Matrix& values, double sigma, std::uint64_t seed);

}  // namespace sekf
