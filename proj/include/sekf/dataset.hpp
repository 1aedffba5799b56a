#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sekf/systems.hpp"
#include "sekf/types.hpp"

namespace sekf {

/// One supervised pair: initial state, input sequence over the horizon
/// (zero columns when the system is autonomous), target trajectory.
struct Example {
  Vector x0;
  Matrix u_seq;   // horizon x n_u
  Matrix target;  // horizon x target_dim
};

/// Target matrix flattened sample-major, state-minor; matches the row
/// order of the predictor Jacobians.
Vector flatten_target(const Matrix& target);

enum class Split { train, val, test };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// Per-dimension affine map y = (x - shift) / scale.
struct Affine {
  Vector shift;
  Vector scale;

  static Affine identity(int dim);
  Vector apply(const Vector& x) const;
  Vector invert(const Vector& y) const;
  /// Column j of the matrix is dimension j (rows are samples).
  Matrix apply_cols(const Matrix& x) const;
  Matrix invert_cols(const Matrix& y) const;
};

/// Affine normalization for the three example channels. Fit on a training
/// split only; carried with the model artifact thereafter.
struct Normalizer {
  Affine x0;
  Affine u;
  Affine target;

  static Normalizer identity(int x0_dim, int u_dim, int target_dim);
  Example apply(const Example& e) const;
  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

struct Dataset {
  std::vector<Example> examples;
  Split split = Split::train;
  Normalizer normalizer;  // identity unless assigned

  int size() const { return static_cast<int>(examples.size()); }
  bool empty() const { return examples.empty(); }
  int x0_dim() const { return empty() ? 0 : static_cast<int>(examples[0].x0.size()); }
  int u_dim() const { return empty() ? 0 : static_cast<int>(examples[0].u_seq.cols()); }
  int target_dim() const {
    return empty() ? 0 : static_cast<int>(examples[0].target.cols());
  }
  int horizon() const {
    return empty() ? 0 : static_cast<int>(examples[0].target.rows());
  }

  /// Copy with the stored normalizer applied to every example.
  Dataset normalized() const;
};

/// Train-split statistics, std floored at 1e-8 so constant features do
/// not blow up. With share_state_target the x0 and target channels are
/// pooled and share one affine map (required for ODE-style predictors
/// whose output feeds back into the state input).
Normalizer fit_normalizer(const Dataset& train, bool share_state_target = false);

/// n random-start spring runs; targets are the noisy positions at
/// t = 1..20 s. Initial conditions are exact, uniform in [-5, 5]^2.
Dataset build_spring_dataset(const SpringParams& p, int n, std::uint64_t seed,
                             double noise_sigma);

/// Sliding windows over one continuous excited run sampled every 10 s:
/// x0 = temperatures at the window start, u_seq = the next 60 commands,
/// target = the next 60 temperature pairs. Windows advance by stride.
/// Measurement noise is applied to the whole temperature record before
/// windowing, so both x0 and targets are noisy reads of the run.
Dataset build_tclab_dataset(const TclabParams& p, double duration_s,
                            std::uint64_t seed, double noise_sigma, int stride);

/// Train/val pair for one requested size: the first ceil(0.9 s) examples
/// train, the remainder of the first s validate.
struct SizedSplit {
  int size = 0;
  Dataset train;
  Dataset val;
};

/// Deterministic splits per the replicate protocol. The pool is divided
/// into contiguous per-replicate blocks of (candidates + test) examples;
/// within a block the candidate examples come first and the test set is
/// the held-out remainder, shared by every size.
struct SplitResult {
  std::vector<SizedSplit> by_size;
  Dataset test;
};
SplitResult split_protocol(const Dataset& pool, const std::vector<int>& sizes,
                           int replicate, int candidates_per_replicate,
                           int test_per_replicate);

/// CSV (one example per row: x0, u flattened, target flattened) plus a
/// JSON sidecar carrying shapes, split, normalizer and caller metadata.
/// Doubles round-trip exactly.
void save_dataset(const Dataset& d, const std::string& csv_path,
                  const std::string& meta_path,
                  const nlohmann::json& extra_meta = nlohmann::json::object());
Dataset load_dataset(const std::string& csv_path, const std::string& meta_path,
                     nlohmann::json* extra_meta = nullptr);

}  // namespace sekf
