#include "sekf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "sekf/rng.hpp"

namespace sekf {
namespace {

constexpr double kWithinMsFloor = 1e-300;

/// F statistic from per-row group ids; the total sum of squares is
/// permutation-invariant, so only group sums change under a shuffle.
double f_statistic(const std::vector<int>& group_of_row,
                   const std::vector<double>& outcomes,
                   const std::vector<int>& group_sizes, double sum_sq,
                   double grand_sum) {
  const int k = static_cast<int>(group_sizes.size());
  const auto n = static_cast<double>(outcomes.size());
  std::vector<double> group_sum(static_cast<std::size_t>(k), 0.0);
  for (std::size_t r = 0; r < outcomes.size(); ++r)
    group_sum[static_cast<std::size_t>(group_of_row[r])] += outcomes[r];

  const double correction = grand_sum * grand_sum / n;
  double ssb = -correction;
  for (int g = 0; g < k; ++g)
    ssb += group_sum[static_cast<std::size_t>(g)] *
           group_sum[static_cast<std::size_t>(g)] / group_sizes[static_cast<std::size_t>(g)];
  ssb = std::max(ssb, 0.0);
  const double sst = std::max(sum_sq - correction, 0.0);
  const double ssw = std::max(sst - ssb, 0.0);

  if (ssb == 0.0) return 0.0;
  const double msb = ssb / (k - 1);
  const double msw =
      std::max(ssw / (n - static_cast<double>(k)), kWithinMsFloor);
  return msb / msw;
}

}  // namespace

void FactorTable::add_row(std::vector<std::string> levels, double outcome) {
  require(levels.size() == factor_names.size(),
          "FactorTable: level count does not match factor count");
  require(std::isfinite(outcome), "FactorTable: non-finite outcome");
  rows.push_back(std::move(levels));
  outcomes.push_back(outcome);
}

int FactorTable::factor_index(const std::string& name) const {
  for (std::size_t i = 0; i < factor_names.size(); ++i)
    if (factor_names[i] == name) return static_cast<int>(i);
  throw ContractError("FactorTable: unknown factor " + name);
}

AnovaResult permutation_anova(const FactorTable& table,
                              const std::string& factor, int n_perm,
                              std::uint64_t seed) {
  require(n_perm >= 1, "permutation_anova: n_perm must be >= 1");
  const int fi = table.factor_index(factor);
  const int n = table.n_rows();
  require(n >= 2, "permutation_anova: need at least 2 rows");

  std::map<std::string, int> level_id;
  std::vector<int> group_of_row(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    const std::string& level = table.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(fi)];
    auto [it, inserted] =
        level_id.emplace(level, static_cast<int>(level_id.size()));
    group_of_row[static_cast<std::size_t>(r)] = it->second;
  }
  const int k = static_cast<int>(level_id.size());
  require(k >= 2, "permutation_anova: factor has a single level");
  require(n > k, "permutation_anova: no within-group degrees of freedom");

  std::vector<int> group_sizes(static_cast<std::size_t>(k), 0);
  for (int g : group_of_row) ++group_sizes[static_cast<std::size_t>(g)];

  double sum_sq = 0.0, grand_sum = 0.0;
  for (double x : table.outcomes) {
    sum_sq += x * x;
    grand_sum += x;
  }

  AnovaResult res;
  res.n_levels = k;
  res.n_rows = n;
  res.f = f_statistic(group_of_row, table.outcomes, group_sizes, sum_sq,
                      grand_sum);

  Rng rng(seed);
  std::vector<double> shuffled = table.outcomes;
  int exceed = 0;
  for (int p = 0; p < n_perm; ++p) {
    rng.shuffle(shuffled);
    const double fp =
        f_statistic(group_of_row, shuffled, group_sizes, sum_sq, grand_sum);
    if (fp >= res.f) ++exceed;
  }
  res.p = (1.0 + exceed) / (static_cast<double>(n_perm) + 1.0);
  return res;
}

void write_anova_csv(const std::string& path,
                     const std::vector<AnovaRow>& rows) {
  std::ofstream f(path);
  require(f.good(), "write_anova_csv: cannot open " + path);
  f << "outcome,factor,F,p\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", r.outcome.c_str(),
                  r.factor.c_str(), r.f, r.p);
    f << buf;
  }
  require(f.good(), "write_anova_csv: write failed for " + path);
}

}  // namespace sekf
