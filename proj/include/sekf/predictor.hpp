#pragma once

#include <variant>

#include "sekf/dataset.hpp"
#include "sekf/network.hpp"
#include "sekf/node.hpp"
#include "sekf/types.hpp"

namespace sekf {

/// Direct multi-step map: the network consumes x0 and emits the whole
/// flattened target trajectory in one pass.
struct MlpPredictor {
  NetworkSpec net;
};

/// Learned one-step dynamics rolled out over the horizon; the network
/// core consumes [x; u] and emits dx/dt.
struct NodePredictor {
  NodeSpec node;
};

/// Linear-in-parameters scalar model y = params . x0. Exercises the
/// trainers and filter against closed-form references; has no network.
struct LinearPredictor {
  int dim = 1;
};

/// Any predictor maps (params, example) to a flattened prediction of
/// flatten_target(example.target), with a dense Jacobian w.r.t. params.
class Predictor {
 public:
  explicit Predictor(MlpPredictor m) : impl_(std::move(m)) {}
  explicit Predictor(NodePredictor n) : impl_(std::move(n)) {}
  explicit Predictor(LinearPredictor l) : impl_(std::move(l)) {}

  int param_dim() const;
  /// Length of the flattened prediction vector for one example.
  int output_dim() const;
  bool is_node() const { return std::holds_alternative<NodePredictor>(impl_); }
  /// Throws for the linear model, which has no network.
  const NetworkSpec& network() const;

  Vector init_params(std::uint64_t seed) const {
    return sekf::init_params(network(), seed);
  }

  Vector predict(const Vector& params, const Example& e) const;
  /// Prediction plus d prediction / d params, rows in prediction order.
  std::pair<Vector, Matrix> predict_with_jacobian(const Vector& params,
                                                  const Example& e) const;
  /// J^T v without materializing J when a cheap adjoint exists.
  Vector vjp(const Vector& params, const Example& e, const Vector& v) const;

 private:
  std::variant<MlpPredictor, NodePredictor, LinearPredictor> impl_;
};

/// Predictor whose architecture matches the dataset shapes.
Predictor make_spring_predictor();
Predictor make_tclab_predictor();

}  // namespace sekf
