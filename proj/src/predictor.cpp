#include "sekf/predictor.hpp"

namespace sekf {
namespace {

Vector linear_predict(const LinearPredictor& l, const Vector& params,
                      const Example& e) {
  require(params.size() == l.dim && e.x0.size() == l.dim,
          "linear predictor: dim mismatch");
  Vector out(1);
  out[0] = params.dot(e.x0);
  return out;
}

}  // namespace

int Predictor::param_dim() const {
  if (const auto* l = std::get_if<LinearPredictor>(&impl_)) return l->dim;
  return param_count(network());
}

int Predictor::output_dim() const {
  if (std::holds_alternative<LinearPredictor>(impl_)) return 1;
  if (const auto* m = std::get_if<MlpPredictor>(&impl_))
    return m->net.output_dim();
  const auto& n = std::get<NodePredictor>(impl_).node;
  return n.horizon * n.state_dim();
}

const NetworkSpec& Predictor::network() const {
  if (const auto* m = std::get_if<MlpPredictor>(&impl_)) return m->net;
  if (const auto* n = std::get_if<NodePredictor>(&impl_)) return n->node.core;
  throw ContractError("linear predictor has no network");
}

Vector Predictor::predict(const Vector& params, const Example& e) const {
  if (const auto* l = std::get_if<LinearPredictor>(&impl_))
    return linear_predict(*l, params, e);
  if (const auto* m = std::get_if<MlpPredictor>(&impl_))
    return forward(m->net, params, e.x0);
  const auto& n = std::get<NodePredictor>(impl_).node;
  return flatten_target(predict_horizon(n, params, e.x0, e.u_seq));
}

std::pair<Vector, Matrix> Predictor::predict_with_jacobian(
    const Vector& params, const Example& e) const {
  if (const auto* l = std::get_if<LinearPredictor>(&impl_))
    return {linear_predict(*l, params, e), e.x0.transpose()};
  if (const auto* m = std::get_if<MlpPredictor>(&impl_)) {
    NetworkTangent t = forward_with_jacobians(m->net, params, e.x0);
    return {std::move(t.value), std::move(t.d_params)};
  }
  const auto& n = std::get<NodePredictor>(impl_).node;
  NodePrediction p = predict_horizon_with_jacobian(n, params, e.x0, e.u_seq);
  return {flatten_target(p.trajectory), std::move(p.jacobian)};
}

Vector Predictor::vjp(const Vector& params, const Example& e,
                      const Vector& v) const {
  if (std::holds_alternative<LinearPredictor>(impl_)) {
    require(v.size() == 1, "linear predictor: vjp seed must be scalar");
    return e.x0 * v[0];
  }
  if (const auto* m = std::get_if<MlpPredictor>(&impl_))
    return backprop_params(m->net, params, e.x0, v);
  const auto& n = std::get<NodePredictor>(impl_).node;
  return horizon_jacobian(n, params, e.x0, e.u_seq).transpose() * v;
}

Predictor make_spring_predictor() {
  return Predictor(MlpPredictor{NetworkSpec{{2, 32, 32, 20}}});
}

Predictor make_tclab_predictor() {
  NodeSpec spec;
  spec.core = NetworkSpec{{4, 32, 32, 2}};
  spec.dt_sample = 10.0;
  spec.substeps = 1;
  spec.horizon = 60;
  return Predictor(NodePredictor{spec});
}

}  // namespace sekf
