#pragma once

#include <vector>

namespace ppd {

struct ContinuousCounts {
  std::vector<double> cases;
  std::vector<double> deaths;
};

struct IntegerCounts {
  std::vector<long long> cases;
  std::vector<long long> deaths;
};

// L2-nearest point to (noisy_cases, noisy_deaths) subject to
//   sum_j cases_j = total   and   cases_j >= deaths_j >= 0.
// The single sum constraint is dualized with a scalar multiplier; each
// per-county 2-variable cone projection is closed form, and the multiplier is
// bisected until the sum constraint holds within 1e-9. Feasible for any
// total >= 0.
ContinuousCounts project_counts(const std::vector<double>& noisy_cases,
                                const std::vector<double>& noisy_deaths, double total);

// Integer rounding stage: floors both vectors, hands out the remaining
// `total - sum(floor)` case units one per county, and rounds deaths to the
// nearest feasible integer below the rounded cases. The unit assignment
// accounts for the death cost a capped county would pay, so the L1 objective
// matches the exhaustive integer optimum. Ties break on the lowest county
// index. Inputs must satisfy the continuous constraints within 1e-6.
IntegerCounts round_counts(const std::vector<double>& cont_cases,
                           const std::vector<double>& cont_deaths, long long total);

// Euclidean projection of y onto the affine subspace {v : rows . v = rhs},
// computed from an orthonormalized constraint basis. Redundant rows are
// dropped; inconsistent rows raise an infeasibility error.
std::vector<double> project_affine(const std::vector<double>& y,
                                   const std::vector<std::vector<double>>& rows,
                                   const std::vector<double>& rhs);

}  // namespace ppd
