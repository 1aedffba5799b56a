#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sekf/rng.hpp"
#include "sekf/stats.hpp"
#include "sekf/types.hpp"

using sekf::FactorTable;

namespace {

FactorTable two_group_table(const std::vector<double>& a,
                            const std::vector<double>& b) {
  FactorTable t;
  t.factor_names = {"group"};
  for (double x : a) t.add_row({"a"}, x);
  for (double x : b) t.add_row({"b"}, x);
  return t;
}

}  // namespace

TEST_CASE("identical groups give F = 0 and p = 1") {
  const std::vector<double> same = {1.0, 2.0, 3.0, 4.0};
  const auto r = sekf::permutation_anova(two_group_table(same, same), "group",
                                         999, 1);
  CHECK(r.f == 0.0);
  CHECK(r.p == 1.0);
  CHECK(r.n_levels == 2);
  CHECK(r.n_rows == 8);
}

TEST_CASE("hand-computed F statistic on the {1,2,3} vs {4,5,9} table") {
  // Group means 2 and 6, grand mean 4: SSB = 24, SSW = 16, F = 24/4 = 6.
  const auto r = sekf::permutation_anova(
      two_group_table({1.0, 2.0, 3.0}, {4.0, 5.0, 9.0}), "group", 99, 2);
  CHECK(r.f == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("F agrees with the two-pass textbook route on random tables") {
  sekf::Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    FactorTable t;
    t.factor_names = {"g"};
    std::vector<std::vector<double>> groups(3);
    const char* names[] = {"x", "y", "z"};
    for (int g = 0; g < 3; ++g) {
      const int n = 3 + static_cast<int>(rng.below(6));
      for (int i = 0; i < n; ++i) {
        const double v = rng.normal() + g * rng.uniform01();
        groups[static_cast<std::size_t>(g)].push_back(v);
        t.add_row({names[g]}, v);
      }
    }
    const auto r = sekf::permutation_anova(t, "g", 9, 4);
    const double want = oracle::anova_f_handroute(groups);
    CHECK(r.f == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("perfectly separated groups reach the permutation floor") {
  // 15 per group, no overlap: no permutation can beat the observed F, so
  // p = 1/(4999+1), which the double literal 2e-4 represents exactly
  // enough for equality.
  std::vector<double> lo(15), hi(15);
  sekf::Rng rng(5);
  for (int i = 0; i < 15; ++i) {
    lo[static_cast<std::size_t>(i)] = rng.uniform01();
    hi[static_cast<std::size_t>(i)] = 100.0 + rng.uniform01();
  }
  const auto r =
      sekf::permutation_anova(two_group_table(lo, hi), "group", 4999, 6);
  CHECK(r.p == 1.0 / 5000.0);
  CHECK(r.p == 2e-4);
  CHECK(r.f > 1e4);
  CHECK(std::isfinite(r.f));
}

TEST_CASE("p stays within its attainable bounds") {
  sekf::Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[static_cast<std::size_t>(i)] = rng.normal();
      b[static_cast<std::size_t>(i)] = rng.normal();
    }
    const auto r = sekf::permutation_anova(two_group_table(a, b), "group", 99,
                                           static_cast<std::uint64_t>(trial));
    CHECK(r.p >= 1.0 / 100.0);
    CHECK(r.p <= 1.0);
  }
}

TEST_CASE("fixed seeds reproduce p exactly; seeds matter") {
  sekf::Rng rng(8);
  std::vector<double> a(10), b(10);
  for (int i = 0; i < 10; ++i) {
    a[static_cast<std::size_t>(i)] = rng.normal();
    b[static_cast<std::size_t>(i)] = 0.8 * rng.normal() + 0.5;
  }
  const auto t = two_group_table(a, b);
  const auto r1 = sekf::permutation_anova(t, "group", 499, 42);
  const auto r2 = sekf::permutation_anova(t, "group", 499, 42);
  CHECK(r1.p == r2.p);
  CHECK(r1.f == r2.f);
}

TEST_CASE("null p-values are close to uniform (KS check)") {
  // 200 null tables, 199 permutations each: the p-values should look
  // uniform; D_200 < 0.115 fails with probability ~1% under uniformity.
  sekf::Rng rng(9);
  std::vector<double> pvals;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(10), b(10);
    for (int i = 0; i < 10; ++i) {
      a[static_cast<std::size_t>(i)] = rng.normal();
      b[static_cast<std::size_t>(i)] = rng.normal();
    }
    const auto r = sekf::permutation_anova(
        two_group_table(a, b), "group", 199,
        1000 + static_cast<std::uint64_t>(rep));
    pvals.push_back(r.p);
  }
  std::sort(pvals.begin(), pvals.end());
  double d = 0.0;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    const double ecdf_hi = static_cast<double>(i + 1) / 200.0;
    const double ecdf_lo = static_cast<double>(i) / 200.0;
    d = std::max(d, std::fabs(ecdf_hi - pvals[i]));
    d = std::max(d, std::fabs(pvals[i] - ecdf_lo));
  }
  CHECK(d < 0.115);
}

TEST_CASE("three factors are addressed by name") {
  FactorTable t;
  t.factor_names = {"opt", "init", "size"};
  sekf::Rng rng(10);
  const char* opts[] = {"adam", "lbfgs", "sekf"};
  for (int i = 0; i < 30; ++i) {
    const char* opt = opts[rng.below(3)];
    const char* init = rng.below(2) ? "finetune" : "retrain";
    const char* size = rng.below(2) ? "10" : "1000";
    // The size factor carries a real effect; the others are null.
    const double outcome = rng.normal() + (std::string(size) == "10" ? 3.0 : 0.0);
    t.add_row({opt, init, size}, outcome);
  }
  const auto by_size = sekf::permutation_anova(t, "size", 999, 11);
  const auto by_init = sekf::permutation_anova(t, "init", 999, 11);
  CHECK(by_size.n_levels == 2);
  CHECK(by_size.p < 0.01);
  CHECK(by_init.p > 0.01);
  CHECK(sekf::permutation_anova(t, "opt", 99, 1).n_levels == 3);
  CHECK_THROWS_AS(sekf::permutation_anova(t, "bogus", 99, 1),
                  sekf::ContractError);
}

TEST_CASE("degenerate tables are rejected") {
  FactorTable t;
  t.factor_names = {"g"};
  t.add_row({"a"}, 1.0);
  t.add_row({"a"}, 2.0);
  t.add_row({"a"}, 3.0);
  CHECK_THROWS_AS(sekf::permutation_anova(t, "g", 99, 1),
                  sekf::ContractError);  // single level
  t.add_row({"b"}, 4.0);
  CHECK_THROWS_AS(sekf::permutation_anova(t, "g", 0, 1),
                  sekf::ContractError);  // no permutations requested
  FactorTable bad;
  bad.factor_names = {"g"};
  CHECK_THROWS_AS(bad.add_row({"a"}, std::nan("")), sekf::ContractError);
  CHECK_THROWS_AS(bad.add_row({"a", "extra"}, 1.0), sekf::ContractError);
}

TEST_CASE("anova CSV has the documented header") {
  const std::vector<sekf::AnovaRow> rows = {
      {"normalized_test_loss", "init_method", 12.5, 0.001},
      {"gap", "optimizer", 0.8, 0.45},
  };
  const std::string path = "test_anova_tmp.csv";
  sekf::write_anova_csv(path, rows);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "outcome,factor,F,p");
  int n = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++n;
  CHECK(n == 2);
  std::remove(path.c_str());
}
