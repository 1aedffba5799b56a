#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sekf/types.hpp"

namespace sekf {

/// Flat observations table: categorical factor levels per row plus one
/// real outcome.
struct FactorTable {
  std::vector<std::string> factor_names;
  std::vector<std::vector<std::string>> rows;  // one level per factor
  std::vector<double> outcomes;

  void add_row(std::vector<std::string> levels, double outcome);
  int n_rows() const { return static_cast<int>(outcomes.size()); }
  int factor_index(const std::string& name) const;
};

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  int n_levels = 0;
  int n_rows = 0;
};

/// One-way permutation ANOVA for the named factor: F = MSB / MSW on the
/// observed grouping, then n_perm seeded raw shuffles of the outcomes;
/// p = (1 + #{F_perm >= F_obs}) / (n_perm + 1). With zero between-group
/// variation F is 0; a zero within-MS is floored so perfect separation
/// yields a finite, maximal F.
AnovaResult permutation_anova(const FactorTable& table,
                              const std::string& factor, int n_perm,
                              std::uint64_t seed);

struct AnovaRow {
  std::string outcome;
  std::string factor;
  double f = 0.0;
  double p = 1.0;
};

/// CSV `outcome,factor,F,p`.
void write_anova_csv(const std::string& path, const std::vector<AnovaRow>& rows);

}  // namespace sekf
