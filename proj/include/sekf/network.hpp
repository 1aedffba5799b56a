#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sekf/types.hpp"

namespace sekf {

/// Dense feed-forward network: sigmoid hidden layers, linear output.
///
/// Parameters live in one flat vector with a fixed layer-major layout:
/// for each layer l (widths[l] -> widths[l+1]) the block is
///   [ W_l column-major (out x in) | b_l (out) ]
/// so subset indices and per-layer attribution are stable index-range
/// computations.
struct NetworkSpec {
  std::vector<int> widths;  // input, hidden..., output; at least 3 entries

  bool valid() const {
    if (widths.size() < 3) return false;
    for (const int w : widths)
      if (w <= 0) return false;
    return true;
  }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
};

/// Total number of parameters: sum over layer pairs of (in + 1) * out.
int param_count(const NetworkSpec& spec);

/// Flat-index range [first, last) of layer l's block (weights then bias).
std::pair<int, int> layer_param_range(const NetworkSpec& spec, int layer);

/// Glorot-uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases.
/// Deterministic per (spec, seed).
Vector init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Per-layer dense view of a flat parameter vector.
struct LayerParams {
  Matrix weights;  // out x in
  Vector bias;     // out
};
std::vector<LayerParams> unflatten(const NetworkSpec& spec, const Vector& params);
Vector flatten(const NetworkSpec& spec, const std::vector<LayerParams>& layers);

/// Forward evaluation. Input length must equal the first width.
Vector forward(const NetworkSpec& spec, const Vector& params, const Vector& input);

/// Jacobian of the outputs with respect to the flat parameters
/// (output_dim x param_count), by reverse-mode accumulation per output.
Matrix jacobian_params(const NetworkSpec& spec, const Vector& params,
                       const Vector& input);

/// One forward pass bundled with both Jacobians; reuses the shared
/// backward sweep. Feeds the ODE sensitivity propagation.
struct NetworkTangent {
  Vector value;     // output_dim
  Matrix d_input;   // output_dim x input_dim
  Matrix d_params;  // output_dim x param_count
};
NetworkTangent forward_with_jacobians(const NetworkSpec& spec,
                                      const Vector& params, const Vector& input);

/// Vector-Jacobian product seed^T * d(output)/d(params), without
/// materializing the Jacobian. Identical algebra to
/// jacobian_params(...)^T * seed.
Vector backprop_params(const NetworkSpec& spec, const Vector& params,
                       const Vector& input, const Vector& seed);

/// JSON serialization of (spec, params); exact double round-trip.
std::string params_to_json(const NetworkSpec& spec, const Vector& params);
std::pair<NetworkSpec, Vector> params_from_json(const std::string& text);

}  // namespace sekf
