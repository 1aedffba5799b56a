#include "sekf/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace sekf {
namespace {

nlohmann::json vec_to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const nlohmann::json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

nlohmann::json TrialResult::to_json() const {
  return {{"system", system},
          {"target_name", target_name},
          {"optimizer", optimizer},
          {"init_method", init_method},
          {"size", size},
          {"replicate", replicate},
          {"seed", seed},
          {"train_loss", train_loss},
          {"val_loss", val_loss},
          {"test_loss", test_loss},
          {"convergence_wall_s", convergence_wall_s},
          {"cosine_to_source", cosine_to_source},
          {"wasserstein_to_source", wasserstein_to_source},
          {"normalized_test_loss", normalized_test_loss},
          {"normalized_convergence", normalized_convergence},
          {"gap", gap},
          {"epochs_run", epochs_run},
          {"aborted", aborted},
          {"abort_reason", abort_reason},
          {"final_params", vec_to_json(final_params)}};
}

TrialResult TrialResult::from_json(const nlohmann::json& j) {
  TrialResult r;
  r.system = j.at("system").get<std::string>();
  r.target_name = j.at("target_name").get<std::string>();
  r.optimizer = j.at("optimizer").get<std::string>();
  r.init_method = j.at("init_method").get<std::string>();
  r.size = j.at("size").get<int>();
  r.replicate = j.at("replicate").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.test_loss = j.at("test_loss").get<double>();
  r.convergence_wall_s = j.at("convergence_wall_s").get<double>();
  r.cosine_to_source = j.at("cosine_to_source").get<double>();
  r.wasserstein_to_source = j.at("wasserstein_to_source").get<double>();
  r.normalized_test_loss = j.at("normalized_test_loss").get<double>();
  r.normalized_convergence = j.at("normalized_convergence").get<double>();
  r.gap = j.at("gap").get<double>();
  r.epochs_run = j.at("epochs_run").get<int>();
  r.aborted = j.at("aborted").get<bool>();
  r.abort_reason = j.at("abort_reason").get<std::string>();
  r.final_params = vec_from_json(j.at("final_params"));
  return r;
}

double train_test_gap(const TrialResult& r) { return r.test_loss - r.train_loss; }

double normalized_mse(const TrialResult& r, double source_test_loss) {
  require(source_test_loss > 0.0, "normalized_mse: source test loss must be > 0");
  return r.test_loss / source_test_loss;
}

double normalized_convergence_time(const TrialResult& r, double source_time_s) {
  require(source_time_s > 0.0,
          "normalized_convergence_time: source time must be > 0");
  return r.convergence_wall_s / source_time_s;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), "cosine_similarity: size mismatch");
  const double na = a.norm(), nb = b.norm();
  require(na > 0.0 && nb > 0.0, "cosine_similarity: zero vector");
  return a.dot(b) / (na * nb);
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "wasserstein_1d: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double step_a = 1.0 / static_cast<double>(a.size());
  const double step_b = 1.0 / static_cast<double>(b.size());
  double dist = 0.0, fa = 0.0, fb = 0.0;
  double prev = std::min(a.front(), b.front());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double next = (i < a.size() && (j == b.size() || a[i] <= b[j]))
                            ? a[i]
                            : b[j];
    dist += std::fabs(fa - fb) * (next - prev);
    prev = next;
    while (i < a.size() && a[i] == next) {
      fa += step_a;
      ++i;
    }
    while (j < b.size() && b[j] == next) {
      fb += step_b;
      ++j;
    }
  }
  return dist;
}

double wasserstein_1d(const Vector& a, const Vector& b) {
  return wasserstein_1d(std::vector<double>(a.data(), a.data() + a.size()),
                        std::vector<double>(b.data(), b.data() + b.size()));
}

double wasserstein_per_dim_mean(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols() && a.cols() > 0,
          "wasserstein_per_dim_mean: column mismatch");
  double sum = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    sum += wasserstein_1d(Vector(a.col(c)), Vector(b.col(c)));
  return sum / static_cast<double>(a.cols());
}

LayerChangeReport layer_change_report(const NetworkSpec& spec,
                                      const Vector& source,
                                      const Vector& final_params) {
  const int n = param_count(spec);
  require(source.size() == n && final_params.size() == n,
          "layer_change_report: params do not match spec");
  const Vector delta = (final_params - source).cwiseAbs();
  constexpr int kBins = 10;

  LayerChangeReport report;
  report.bin_upper = delta.size() > 0 ? delta.maxCoeff() : 0.0;
  const double width =
      report.bin_upper > 0.0 ? report.bin_upper / kBins : 1.0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    auto [first, last] = layer_param_range(spec, l);
    LayerChange lc;
    lc.layer = l;
    lc.count = last - first;
    lc.histogram.assign(kBins, 0);
    double sum = 0.0;
    for (int i = first; i < last; ++i) {
      const double d = delta[i];
      sum += d;
      lc.max_abs = std::max(lc.max_abs, d);
      int bin = static_cast<int>(d / width);
      bin = std::min(bin, kBins - 1);
      ++lc.histogram[static_cast<std::size_t>(bin)];
    }
    lc.mean_abs = lc.count > 0 ? sum / lc.count : 0.0;
    report.layers.push_back(std::move(lc));
  }
  return report;
}

}  // namespace sekf
