#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace sekf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Eigen::Index;

/// Thrown when an integrator or predictor produces a non-finite state.
/// The message names the step at which the blow-up was detected.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown on contract violations (dimension mismatches, invalid arguments).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace sekf
