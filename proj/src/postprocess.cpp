#include "ppd/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ppd/errors.hpp"

namespace ppd {

namespace {

// Projection of (u, v) onto the cone {(c, d) : c >= d >= 0}. Regions follow
// the normal-cone decomposition of the cone spanned by (1,0) and (1,1).
void project_cone(double u, double v, double* c, double* d) {
  if (u >= v && v >= 0.0) {
    *c = u;
    *d = v;
  } else if (v > u && u + v >= 0.0) {
    *c = *d = 0.5 * (u + v);
  } else if (v < 0.0 && u >= 0.0) {
    *c = u;
    *d = 0.0;
  } else {
    *c = 0.0;
    *d = 0.0;
  }
}

double case_sum_at(const std::vector<double>& a, const std::vector<double>& b, double lambda) {
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double c, d;
    project_cone(a[j] - lambda, b[j], &c, &d);
    total += c;
  }
  return total;
}

}  // namespace

ContinuousCounts project_counts(const std::vector<double>& noisy_cases,
                                const std::vector<double>& noisy_deaths, double total) {
  if (noisy_cases.size() != noisy_deaths.size() || noisy_cases.empty()) {
    throw std::invalid_argument("project_counts: case and death vectors must align");
  }
  if (!(total >= 0.0)) {
    throw std::invalid_argument("project_counts: total must be nonnegative");
  }

  double max_abs = 0.0;
  double max_pull = 0.0;  // largest a_j + max(b_j, 0): beyond it every county projects to 0
  for (std::size_t j = 0; j < noisy_cases.size(); ++j) {
    max_abs = std::max(max_abs, std::abs(noisy_cases[j]));
    max_pull = std::max(max_pull, noisy_cases[j] + std::max(noisy_deaths[j], 0.0));
  }
  double lo = -(max_abs + total + 1.0);
  double hi = max_pull + total + 1.0;

  // case_sum_at is continuous and nonincreasing in lambda.
  double lambda = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    lambda = 0.5 * (lo + hi);
    const double g = case_sum_at(noisy_cases, noisy_deaths, lambda) - total;
    if (std::abs(g) <= 1e-10) break;
    if (g > 0.0) {
      lo = lambda;
    } else {
      hi = lambda;
    }
  }

  ContinuousCounts out;
  out.cases.resize(noisy_cases.size());
  out.deaths.resize(noisy_cases.size());
  for (std::size_t j = 0; j < noisy_cases.size(); ++j) {
    project_cone(noisy_cases[j] - lambda, noisy_deaths[j], &out.cases[j], &out.deaths[j]);
  }
  return out;
}

IntegerCounts round_counts(const std::vector<double>& cont_cases,
                           const std::vector<double>& cont_deaths, long long total) {
  const std::size_t J = cont_cases.size();
  if (cont_deaths.size() != J || J == 0) {
    throw std::invalid_argument("round_counts: case and death vectors must align");
  }
  constexpr double kTol = 1e-6;
  double sum = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    if (cont_cases[j] < -kTol || cont_deaths[j] < -kTol ||
        cont_deaths[j] > cont_cases[j] + kTol) {
      throw ValidationError("round_counts: inputs violate the continuous constraints at county " +
                            std::to_string(j));
    }
    sum += cont_cases[j];
  }
  if (std::abs(sum - static_cast<double>(total)) > kTol) {
    throw ValidationError("round_counts: continuous cases sum to " + std::to_string(sum) +
                          ", expected " + std::to_string(total));
  }

  std::vector<double> c(J), d(J);
  std::vector<long long> floor_c(J);
  for (std::size_t j = 0; j < J; ++j) {
    c[j] = std::max(cont_cases[j], 0.0);
    d[j] = std::min(std::max(cont_deaths[j], 0.0), c[j]);
    floor_c[j] = static_cast<long long>(std::floor(c[j]));
  }
  long long remaining = total - std::accumulate(floor_c.begin(), floor_c.end(), 0LL);
  if (remaining < 0 || remaining > static_cast<long long>(J)) {
    throw ValidationError("round_counts: inconsistent unit remainder " +
                          std::to_string(remaining));
  }

  // Death cost when the county's cases land at `cap`: nearest of
  // {floor(d), floor(d)+1} that stays within [0, cap].
  auto death_choice = [](double dj, long long cap, long long* pick) {
    long long k = std::max(static_cast<long long>(std::floor(dj)), 0LL);
    double best_cost = std::abs(static_cast<double>(k) - dj);
    long long best_k = k;
    if (k + 1 <= cap) {
      const double up_cost = std::abs(static_cast<double>(k + 1) - dj);
      if (up_cost < best_cost) {
        best_cost = up_cost;
        best_k = k + 1;
      }
    }
    if (best_k > cap) best_k = cap;  // floor(d) <= floor(c) <= cap, so this is defensive only
    if (pick != nullptr) *pick = best_k;
    return std::abs(static_cast<double>(best_k) - dj);
  };

  // Net objective change from granting county j the extra case unit, death
  // cost included: counties whose death rounding would be capped at floor(c)
  // get credit for the unit unblocking it.
  std::vector<std::size_t> order(J);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> gain(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double frac = c[j] - static_cast<double>(floor_c[j]);
    const double with_unit = (1.0 - frac) + death_choice(d[j], floor_c[j] + 1, nullptr);
    const double without = frac + death_choice(d[j], floor_c[j], nullptr);
    gain[j] = with_unit - without;
  }
  std::stable_sort(order.begin(), order.end(), [&gain](std::size_t a, std::size_t b) {
    if (gain[a] != gain[b]) return gain[a] < gain[b];
    return a < b;
  });

  IntegerCounts out;
  out.cases.assign(J, 0);
  out.deaths.assign(J, 0);
  std::vector<bool> granted(J, false);
  for (long long u = 0; u < remaining; ++u) granted[order[static_cast<std::size_t>(u)]] = true;
  for (std::size_t j = 0; j < J; ++j) {
    out.cases[j] = floor_c[j] + (granted[j] ? 1 : 0);
    death_choice(d[j], out.cases[j], &out.deaths[j]);
  }
  return out;
}

std::vector<double> project_affine(const std::vector<double>& y,
                                   const std::vector<std::vector<double>>& rows,
                                   const std::vector<double>& rhs) {
  const std::size_t dim = y.size();
  if (rows.size() != rhs.size()) {
    throw std::invalid_argument("project_affine: row and rhs counts differ");
  }
  std::vector<std::vector<double>> basis;
  std::vector<double> beta;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim) {
      throw std::invalid_argument("project_affine: row dimension mismatch");
    }
    std::vector<double> a = rows[r];
    double b = rhs[r];
    double original = 0.0;
    for (double v : a) original += v * v;
    original = std::sqrt(original);
    for (std::size_t k = 0; k < basis.size(); ++k) {
      double coef = 0.0;
      for (std::size_t i = 0; i < dim; ++i) coef += a[i] * basis[k][i];
      for (std::size_t i = 0; i < dim; ++i) a[i] -= coef * basis[k][i];
      b -= coef * beta[k];
    }
    double norm = 0.0;
    for (double v : a) norm += v * v;
    norm = std::sqrt(norm);
    if (norm <= 1e-10 * (original + 1.0)) {
      if (std::abs(b) > 1e-8 * (std::abs(rhs[r]) + 1.0)) {
        throw InfeasibleConstraintError("project_affine: inconsistent constraint row " +
                                        std::to_string(r));
      }
      continue;  // redundant row
    }
    for (double& v : a) v /= norm;
    basis.push_back(std::move(a));
    beta.push_back(b / norm);
  }

  std::vector<double> out = y;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    double coef = -beta[k];
    for (std::size_t i = 0; i < dim; ++i) coef += basis[k][i] * out[i];
    for (std::size_t i = 0; i < dim; ++i) out[i] -= coef * basis[k][i];
  }
  return out;
}

}  // namespace ppd
