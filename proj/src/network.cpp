#include "sekf/network.hpp"

#include <nlohmann/json.hpp>

#include "sekf/rng.hpp"

namespace sekf {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_spec(const NetworkSpec& spec) {
  require(spec.valid(), "NetworkSpec needs >= 3 positive layer widths");
}

void check_eval_args(const NetworkSpec& spec, const Vector& params,
                     const Vector& input) {
  check_spec(spec);
  require(params.size() == param_count(spec),
          "parameter vector length does not match spec");
  require(input.size() == spec.input_dim(),
          "input length does not match first layer width");
}

struct ForwardTrace {
  std::vector<Vector> activations;      // per layer, activations[0] = input
  std::vector<Vector> hidden_sigma_d;   // sigma'(z) per hidden layer
};

Vector run_forward(const NetworkSpec& spec, const Vector& params,
                   const Vector& input, ForwardTrace* trace) {
  const int L = spec.num_layers();
  Vector a = input;
  if (trace) trace->activations.push_back(a);
  int offset = 0;
  for (int l = 0; l < L; ++l) {
    const int in = spec.widths[l];
    const int out = spec.widths[l + 1];
    const Eigen::Map<const Matrix> W(params.data() + offset, out, in);
    const Eigen::Map<const Vector> b(params.data() + offset + out * in, out);
    Vector z = W * a + b;
    if (l + 1 < L) {
      Vector sd(out);
      for (int i = 0; i < out; ++i) {
        const double s = sigmoid(z[i]);
        z[i] = s;
        sd[i] = s * (1.0 - s);
      }
      if (trace) trace->hidden_sigma_d.push_back(std::move(sd));
    }
    a = std::move(z);
    if (trace) trace->activations.push_back(a);
    offset += (in + 1) * out;
  }
  return a;
}

}  // namespace

int param_count(const NetworkSpec& spec) {
  check_spec(spec);
  int n = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.widths.size()); ++l)
    n += (spec.widths[l] + 1) * spec.widths[l + 1];
  return n;
}

std::pair<int, int> layer_param_range(const NetworkSpec& spec, int layer) {
  check_spec(spec);
  require(layer >= 0 && layer < spec.num_layers(), "layer index out of range");
  int first = 0;
  for (int l = 0; l < layer; ++l)
    first += (spec.widths[l] + 1) * spec.widths[l + 1];
  const int size = (spec.widths[layer] + 1) * spec.widths[layer + 1];
  return {first, first + size};
}

Vector init_params(const NetworkSpec& spec, std::uint64_t seed) {
  const int n = param_count(spec);
  Vector p = Vector::Zero(n);
  Rng rng(seed);
  int offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.widths[l];
    const int out = spec.widths[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    for (int i = 0; i < out * in; ++i)
      p[offset + i] = rng.uniform(-bound, bound);
    // biases stay zero
    offset += (in + 1) * out;
  }
  return p;
}

std::vector<LayerParams> unflatten(const NetworkSpec& spec, const Vector& params) {
  check_spec(spec);
  require(params.size() == param_count(spec), "parameter vector length mismatch");
  std::vector<LayerParams> layers;
  int offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.widths[l];
    const int out = spec.widths[l + 1];
    LayerParams lp;
    lp.weights = Eigen::Map<const Matrix>(params.data() + offset, out, in);
    lp.bias = Eigen::Map<const Vector>(params.data() + offset + out * in, out);
    layers.push_back(std::move(lp));
    offset += (in + 1) * out;
  }
  return layers;
}

Vector flatten(const NetworkSpec& spec, const std::vector<LayerParams>& layers) {
  check_spec(spec);
  require(static_cast<int>(layers.size()) == spec.num_layers(),
          "layer count mismatch");
  Vector p(param_count(spec));
  int offset = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.widths[l];
    const int out = spec.widths[l + 1];
    require(layers[l].weights.rows() == out && layers[l].weights.cols() == in &&
                layers[l].bias.size() == out,
            "layer shape mismatch");
    Eigen::Map<Matrix>(p.data() + offset, out, in) = layers[l].weights;
    Eigen::Map<Vector>(p.data() + offset + out * in, out) = layers[l].bias;
    offset += (in + 1) * out;
  }
  return p;
}

Vector forward(const NetworkSpec& spec, const Vector& params, const Vector& input) {
  check_eval_args(spec, params, input);
  return run_forward(spec, params, input, nullptr);
}

NetworkTangent forward_with_jacobians(const NetworkSpec& spec,
                                      const Vector& params, const Vector& input) {
  check_eval_args(spec, params, input);
  ForwardTrace trace;
  NetworkTangent t;
  t.value = run_forward(spec, params, input, &trace);

  const int L = spec.num_layers();
  const int n_out = spec.output_dim();
  t.d_params.resize(n_out, param_count(spec));

  // delta = d(output) / d(pre-activation of layer l), walked back from the
  // linear output layer where it is the identity.
  Matrix delta = Matrix::Identity(n_out, n_out);
  for (int l = L - 1; l >= 0; --l) {
    const int in = spec.widths[l];
    const int out = spec.widths[l + 1];
    const auto [first, last] = layer_param_range(spec, l);
    (void)last;
    const Vector& a = trace.activations[l];
    for (int i = 0; i < in; ++i)
      t.d_params.middleCols(first + i * out, out) = delta * a[i];
    t.d_params.middleCols(first + out * in, out) = delta;

    const Eigen::Map<const Matrix> W(params.data() + first, out, in);
    Matrix back = delta * W;  // n_out x in
    if (l > 0) back.array().rowwise() *= trace.hidden_sigma_d[l - 1].transpose().array();
    delta = std::move(back);
  }
  t.d_input = std::move(delta);
  return t;
}

Matrix jacobian_params(const NetworkSpec& spec, const Vector& params,
                       const Vector& input) {
  return forward_with_jacobians(spec, params, input).d_params;
}

Vector backprop_params(const NetworkSpec& spec, const Vector& params,
                       const Vector& input, const Vector& seed) {
  check_eval_args(spec, params, input);
  require(seed.size() == spec.output_dim(), "seed length mismatch");
  ForwardTrace trace;
  run_forward(spec, params, input, &trace);

  Vector grad(param_count(spec));
  Vector delta = seed;  // d(seed . output) / d(pre-activation)
  for (int l = spec.num_layers() - 1; l >= 0; --l) {
    const int in = spec.widths[l];
    const int out = spec.widths[l + 1];
    const auto [first, last] = layer_param_range(spec, l);
    (void)last;
    const Vector& a = trace.activations[l];
    Eigen::Map<Matrix>(grad.data() + first, out, in).noalias() =
        delta * a.transpose();
    Eigen::Map<Vector>(grad.data() + first + out * in, out) = delta;

    const Eigen::Map<const Matrix> W(params.data() + first, out, in);
    Vector back = W.transpose() * delta;
    if (l > 0) back.array() *= trace.hidden_sigma_d[l - 1].array();
    delta = std::move(back);
  }
  return grad;
}

std::string params_to_json(const NetworkSpec& spec, const Vector& params) {
  check_spec(spec);
  require(params.size() == param_count(spec), "parameter vector length mismatch");
  nlohmann::json j;
  j["widths"] = spec.widths;
  j["activation"] = "sigmoid";
  j["values"] = std::vector<double>(params.data(), params.data() + params.size());
  return j.dump();
}

std::pair<NetworkSpec, Vector> params_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  NetworkSpec spec;
  spec.widths = j.at("widths").get<std::vector<int>>();
  const auto values = j.at("values").get<std::vector<double>>();
  require(static_cast<int>(values.size()) == param_count(spec),
          "serialized value count does not match widths");
  Vector p(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) p[i] = values[i];
  return {spec, p};
}

}  // namespace sekf
