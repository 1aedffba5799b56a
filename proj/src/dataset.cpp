#include "sekf/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sekf/rng.hpp"

namespace sekf {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, const char* tag) {
  return seed ^ fnv1a64(tag);
}

nlohmann::json vec_to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const nlohmann::json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

void append_double(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out += buf;
}

}  // namespace

Vector flatten_target(const Matrix& target) {
  Vector flat(target.size());
  Eigen::Index idx = 0;
  for (Eigen::Index k = 0; k < target.rows(); ++k)
    for (Eigen::Index s = 0; s < target.cols(); ++s) flat[idx++] = target(k, s);
  return flat;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ContractError("unknown split name: " + name);
}

Affine Affine::identity(int dim) {
  require(dim >= 0, "Affine: negative dim");
  return {Vector::Zero(dim), Vector::Ones(dim)};
}

Vector Affine::apply(const Vector& x) const {
  require(x.size() == shift.size(), "Affine::apply: dim mismatch");
  return (x - shift).cwiseQuotient(scale);
}

Vector Affine::invert(const Vector& y) const {
  require(y.size() == shift.size(), "Affine::invert: dim mismatch");
  return y.cwiseProduct(scale) + shift;
}

Matrix Affine::apply_cols(const Matrix& x) const {
  require(x.cols() == shift.size(), "Affine::apply_cols: dim mismatch");
  return (x.rowwise() - shift.transpose())
      .array()
      .rowwise() / scale.transpose().array();
}

Matrix Affine::invert_cols(const Matrix& y) const {
  require(y.cols() == shift.size(), "Affine::invert_cols: dim mismatch");
  return (y.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
         shift.transpose();
}

Normalizer Normalizer::identity(int x0_dim, int u_dim, int target_dim) {
  return {Affine::identity(x0_dim), Affine::identity(u_dim),
          Affine::identity(target_dim)};
}

Example Normalizer::apply(const Example& e) const {
  Example out;
  out.x0 = x0.apply(e.x0);
  out.u_seq = e.u_seq.cols() == 0 ? e.u_seq : u.apply_cols(e.u_seq);
  out.target = target.apply_cols(e.target);
  return out;
}

nlohmann::json Normalizer::to_json() const {
  auto aff = [](const Affine& a) {
    return nlohmann::json{{"shift", vec_to_json(a.shift)},
                          {"scale", vec_to_json(a.scale)}};
  };
  return {{"x0", aff(x0)}, {"u", aff(u)}, {"target", aff(target)}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  auto aff = [](const nlohmann::json& a) {
    return Affine{vec_from_json(a.at("shift")), vec_from_json(a.at("scale"))};
  };
  return {aff(j.at("x0")), aff(j.at("u")), aff(j.at("target"))};
}

Dataset Dataset::normalized() const {
  Dataset out = *this;
  for (auto& e : out.examples) e = normalizer.apply(e);
  return out;
}

namespace {

struct Moments {
  Vector sum;
  Vector sumsq;
  long n = 0;

  explicit Moments(int dim) : sum(Vector::Zero(dim)), sumsq(Vector::Zero(dim)) {}
  void add(const Vector& x) {
    sum += x;
    sumsq += x.cwiseProduct(x);
    ++n;
  }
  void add_rows(const Matrix& x) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) add(x.row(r).transpose());
  }
  Affine affine() const {
    require(n > 0, "fit_normalizer: empty channel");
    Vector mean = sum / static_cast<double>(n);
    Vector var = sumsq / static_cast<double>(n) - mean.cwiseProduct(mean);
    Vector sd = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
    return {mean, sd};
  }
};

}  // namespace

Normalizer fit_normalizer(const Dataset& train, bool share_state_target) {
  require(!train.empty(), "fit_normalizer: empty dataset");
  Moments mx(train.x0_dim()), mu(train.u_dim()), mt(train.target_dim());
  for (const auto& e : train.examples) {
    mx.add(e.x0);
    if (e.u_seq.cols() > 0) mu.add_rows(e.u_seq);
    mt.add_rows(e.target);
  }
  Normalizer out;
  out.u = train.u_dim() == 0 ? Affine::identity(0) : mu.affine();
  if (share_state_target) {
    require(train.x0_dim() == train.target_dim(),
            "fit_normalizer: shared state requires x0_dim == target_dim");
    Moments pooled(train.x0_dim());
    pooled.sum = mx.sum + mt.sum;
    pooled.sumsq = mx.sumsq + mt.sumsq;
    pooled.n = mx.n + mt.n;
    out.x0 = pooled.affine();
    out.target = out.x0;
  } else {
    out.x0 = mx.affine();
    out.target = mt.affine();
  }
  return out;
}

Dataset build_spring_dataset(const SpringParams& p, int n, std::uint64_t seed,
                             double noise_sigma) {
  require(p.valid(), "build_spring_dataset: invalid params");
  require(n > 0, "build_spring_dataset: n must be positive");
  require(noise_sigma >= 0.0, "build_spring_dataset: negative noise_sigma");
  constexpr double kDt = 0.05;
  constexpr double kDuration = 20.0;
  constexpr int kHorizon = 20;
  const int rows_per_s = static_cast<int>(std::lround(1.0 / kDt));

  Rng ic_rng(seed);
  Rng noise_rng(mix_seed(seed, "noise"));
  Dataset out;
  out.examples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x0 = ic_rng.uniform(-5.0, 5.0);
    const double v0 = ic_rng.uniform(-5.0, 5.0);
    Trajectory traj = simulate_spring(p, x0, v0, kDuration, kDt);
    Example e;
    e.x0 = Vector(2);
    e.x0 << x0, v0;
    e.u_seq = Matrix(kHorizon, 0);
    e.target = Matrix(kHorizon, 1);
    for (int k = 0; k < kHorizon; ++k) {
      double pos = traj.data((k + 1) * rows_per_s, 1);
      if (noise_sigma > 0.0) pos += noise_sigma * noise_rng.normal();
      e.target(k, 0) = pos;
    }
    out.examples.push_back(std::move(e));
  }
  out.normalizer = Normalizer::identity(2, 0, 1);
  return out;
}

Dataset build_tclab_dataset(const TclabParams& p, double duration_s,
                            std::uint64_t seed, double noise_sigma, int stride) {
  require(p.valid(), "build_tclab_dataset: invalid params");
  require(stride >= 1, "build_tclab_dataset: stride must be >= 1");
  require(noise_sigma >= 0.0, "build_tclab_dataset: negative noise_sigma");
  constexpr double kDt = 10.0;
  constexpr int kHorizon = 60;
  const int n_samples = static_cast<int>(std::floor(duration_s / kDt));
  require(n_samples - 1 >= kHorizon,
          "build_tclab_dataset: duration too short for one window");

  HeaterSchedule schedule = gen_heater_schedule(mix_seed(seed, "sched"), duration_s);
  const double sim_duration = (n_samples - 1) * kDt;
  Trajectory traj = simulate_tclab(p, p.T_inf, p.T_inf, schedule, sim_duration, kDt);
  require(traj.data.rows() == n_samples, "build_tclab_dataset: sample count mismatch");

  Matrix temps = traj.data.middleCols(1, 2);
  if (noise_sigma > 0.0) {
    Rng noise_rng(mix_seed(seed, "noise"));
    for (Eigen::Index r = 0; r < temps.rows(); ++r)
      for (Eigen::Index c = 0; c < 2; ++c)
        temps(r, c) += noise_sigma * noise_rng.normal();
  }
  const Matrix heats = traj.data.middleCols(3, 2);

  Dataset out;
  for (int i = 0; i + kHorizon <= n_samples - 1; i += stride) {
    Example e;
    e.x0 = temps.row(i).transpose();
    e.u_seq = heats.middleRows(i, kHorizon);
    e.target = temps.middleRows(i + 1, kHorizon);
    out.examples.push_back(std::move(e));
  }
  out.normalizer = Normalizer::identity(2, 2, 2);
  return out;
}

SplitResult split_protocol(const Dataset& pool, const std::vector<int>& sizes,
                           int replicate, int candidates_per_replicate,
                           int test_per_replicate) {
  require(!pool.empty(), "split_protocol: empty pool");
  require(!sizes.empty(), "split_protocol: no sizes requested");
  require(replicate >= 0, "split_protocol: negative replicate");
  require(candidates_per_replicate > 0 && test_per_replicate > 0,
          "split_protocol: block sizes must be positive");
  const int block = candidates_per_replicate + test_per_replicate;
  const long offset = static_cast<long>(replicate) * block;
  require(offset + block <= pool.size(),
          "split_protocol: replicate block exceeds pool");

  auto slice = [&pool](long first, int count, Split tag) {
    Dataset d;
    d.split = tag;
    d.normalizer = pool.normalizer;
    d.examples.assign(pool.examples.begin() + first,
                      pool.examples.begin() + first + count);
    return d;
  };

  SplitResult out;
  for (int s : sizes) {
    require(s >= 1, "split_protocol: size must be positive");
    require(s <= candidates_per_replicate,
            "split_protocol: size exceeds candidate block");
    const int n_train = (9 * s + 9) / 10;  // ceil(0.9 s)
    SizedSplit ss;
    ss.size = s;
    ss.train = slice(offset, n_train, Split::train);
    ss.val = slice(offset + n_train, s - n_train, Split::val);
    out.by_size.push_back(std::move(ss));
  }
  out.test = slice(offset + candidates_per_replicate, test_per_replicate, Split::test);
  return out;
}

void save_dataset(const Dataset& d, const std::string& csv_path,
                  const std::string& meta_path, const nlohmann::json& extra_meta) {
  require(!d.empty(), "save_dataset: empty dataset");
  const int nx = d.x0_dim(), nu = d.u_dim(), nt = d.target_dim(), h = d.horizon();

  std::string text;
  for (int j = 0; j < nx; ++j) text += (j ? ",x0_" : "x0_") + std::to_string(j);
  for (int k = 0; k < h; ++k)
    for (int j = 0; j < nu; ++j)
      text += ",u_" + std::to_string(k) + "_" + std::to_string(j);
  for (int k = 0; k < h; ++k)
    for (int j = 0; j < nt; ++j)
      text += ",y_" + std::to_string(k) + "_" + std::to_string(j);
  text += '\n';
  for (const auto& e : d.examples) {
    for (int j = 0; j < nx; ++j) {
      if (j) text += ',';
      append_double(text, e.x0[j]);
    }
    for (int k = 0; k < h; ++k)
      for (int j = 0; j < nu; ++j) {
        text += ',';
        append_double(text, e.u_seq(k, j));
      }
    for (int k = 0; k < h; ++k)
      for (int j = 0; j < nt; ++j) {
        text += ',';
        append_double(text, e.target(k, j));
      }
    text += '\n';
  }
  std::ofstream csv(csv_path);
  require(csv.good(), "save_dataset: cannot open " + csv_path);
  csv << text;
  require(csv.good(), "save_dataset: write failed for " + csv_path);

  nlohmann::json meta{{"x0_dim", nx},      {"u_dim", nu},
                      {"target_dim", nt},  {"horizon", h},
                      {"n_examples", d.size()}, {"split", split_name(d.split)},
                      {"normalizer", d.normalizer.to_json()}};
  if (!extra_meta.empty()) meta["extra"] = extra_meta;
  std::ofstream mf(meta_path);
  require(mf.good(), "save_dataset: cannot open " + meta_path);
  mf << meta.dump(2) << '\n';
  require(mf.good(), "save_dataset: write failed for " + meta_path);
}

Dataset load_dataset(const std::string& csv_path, const std::string& meta_path,
                     nlohmann::json* extra_meta) {
  std::ifstream mf(meta_path);
  require(mf.good(), "load_dataset: cannot open " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(mf);
  const int nx = meta.at("x0_dim").get<int>();
  const int nu = meta.at("u_dim").get<int>();
  const int nt = meta.at("target_dim").get<int>();
  const int h = meta.at("horizon").get<int>();
  const int n = meta.at("n_examples").get<int>();

  Dataset d;
  d.split = split_from_name(meta.at("split").get<std::string>());
  d.normalizer = Normalizer::from_json(meta.at("normalizer"));
  if (extra_meta) *extra_meta = meta.value("extra", nlohmann::json::object());

  std::ifstream csv(csv_path);
  require(csv.good(), "load_dataset: cannot open " + csv_path);
  std::string line;
  require(static_cast<bool>(std::getline(csv, line)), "load_dataset: missing header");
  const int expected_cols = nx + h * nu + h * nt;
  d.examples.reserve(static_cast<std::size_t>(n));
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    Example e;
    e.x0 = Vector(nx);
    e.u_seq = Matrix(h, nu);
    e.target = Matrix(h, nt);
    const char* ptr = line.c_str();
    int col = 0;
    auto next = [&]() {
      char* end = nullptr;
      double v = std::strtod(ptr, &end);
      require(end != ptr, "load_dataset: malformed number in " + csv_path);
      ptr = (*end == ',') ? end + 1 : end;
      ++col;
      return v;
    };
    for (int j = 0; j < nx; ++j) e.x0[j] = next();
    for (int k = 0; k < h; ++k)
      for (int j = 0; j < nu; ++j) e.u_seq(k, j) = next();
    for (int k = 0; k < h; ++k)
      for (int j = 0; j < nt; ++j) e.target(k, j) = next();
    require(col == expected_cols, "load_dataset: column count mismatch");
    d.examples.push_back(std::move(e));
  }
  require(d.size() == n, "load_dataset: row count mismatch");
  return d;
}

}  // namespace sekf
