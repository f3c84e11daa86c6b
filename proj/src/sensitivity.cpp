#include "ppd/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>
#include <string>
#include <vector>

#include "ppd/errors.hpp"

namespace ppd {

namespace {

constexpr double kCumTie = 1e-12;

// Max-flow feasibility of a coupling moving p onto q using only pairs with
// |x - y| <= limit. Tiny bipartite graph; Edmonds-Karp with real capacities.
bool coupling_feasible(const DiscretePmf& p, const DiscretePmf& q, long long limit) {
  const int np = static_cast<int>(p.size());
  const int nq = static_cast<int>(q.size());
  const int n = np + nq + 2;
  const int src = np + nq;
  const int snk = np + nq + 1;
  std::vector<std::vector<double>> cap(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < np; ++i) cap[src][i] = p.mass()[i];
  for (int j = 0; j < nq; ++j) cap[np + j][snk] = q.mass()[j];
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < nq; ++j) {
      if (std::llabs(p.support()[i] - q.support()[j]) <= limit) {
        cap[i][np + j] = 2.0;  // effectively unbounded: total mass is 1
      }
    }
  }
  double flow = 0.0;
  while (true) {
    std::vector<int> parent(n, -1);
    parent[src] = src;
    std::queue<int> frontier;
    frontier.push(src);
    while (!frontier.empty() && parent[snk] < 0) {
      const int u = frontier.front();
      frontier.pop();
      for (int v = 0; v < n; ++v) {
        if (parent[v] < 0 && cap[u][v] > 1e-13) {
          parent[v] = u;
          frontier.push(v);
        }
      }
    }
    if (parent[snk] < 0) break;
    double bottleneck = 2.0;
    for (int v = snk; v != src; v = parent[v]) {
      bottleneck = std::min(bottleneck, cap[parent[v]][v]);
    }
    for (int v = snk; v != src; v = parent[v]) {
      cap[parent[v]][v] -= bottleneck;
      cap[v][parent[v]] += bottleneck;
    }
    flow += bottleneck;
  }
  return flow >= 1.0 - 1e-9;
}

}  // namespace

void CountBoundFamily::validate() const {
  if (n < 2) throw ValidationError("count family: n must be at least 2");
  if (!(z0 >= 0.0 && z0 <= 1.0) || !(z1 >= 0.0 && z1 <= 1.0)) {
    throw ValidationError("count family: z0 and z1 must lie in [0, 1]");
  }
}

void GaussianCondFamily::validate() const {
  if (!(delta >= 0.0)) throw ValidationError("gaussian family: delta must be nonnegative");
  if (std::abs(sigma_vz[0][1] - sigma_vz[1][0]) > 1e-12 * (1.0 + std::abs(sigma_vz[0][1]))) {
    throw ValidationError("gaussian family: sigma_vz must be symmetric");
  }
}

double wasserstein_inf(const DiscretePmf& p, const DiscretePmf& q) {
  const auto& sp = p.support();
  const auto& sq = q.support();
  const auto& mp = p.mass();
  const auto& mq = q.mass();
  std::size_t i = 0, j = 0;
  double cp = mp[0], cq = mq[0];
  long long best = 0;
  while (true) {
    best = std::max(best, std::llabs(sp[i] - sq[j]));
    const bool more_p = i + 1 < sp.size();
    const bool more_q = j + 1 < sq.size();
    if (!more_p && !more_q) break;
    if (cp < cq - kCumTie && more_p) {
      cp += mp[++i];
    } else if (cq < cp - kCumTie && more_q) {
      cq += mq[++j];
    } else {
      // Quantile segments end together (or one side is exhausted).
      if (more_p) cp += mp[++i];
      if (more_q) cq += mq[++j];
    }
  }
  return static_cast<double>(best);
}

double wasserstein_inf_flow(const DiscretePmf& p, const DiscretePmf& q) {
  if (p.size() > 12 || q.size() > 12) {
    throw UnsupportedError("wasserstein_inf_flow: supports larger than 12 are not handled");
  }
  std::vector<long long> candidates;
  for (long long x : p.support()) {
    for (long long y : q.support()) {
      candidates.push_back(std::llabs(x - y));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // Feasibility is monotone in the displacement limit.
  std::size_t lo = 0, hi = candidates.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (coupling_feasible(p, q, candidates[mid])) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return static_cast<double>(candidates[lo]);
}

CountDeltaZ count_delta_z_detail(const CountBoundFamily& family, int grid_steps) {
  family.validate();
  if (grid_steps < 2) throw std::invalid_argument("count_delta_z: grid_steps must be >= 2");

  // Shared absolute grid on [0, 1]; each bound restricts it. Evaluating on a
  // shared grid keeps the sup monotone as the intervals grow.
  std::vector<double> grid(static_cast<std::size_t>(grid_steps));
  for (int i = 0; i < grid_steps; ++i) {
    grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (grid_steps - 1);
  }
  std::vector<double> p1_values, p0_values;
  for (double g : grid) {
    if (g <= family.z1 + 1e-12) p1_values.push_back(g);
    if (g >= family.z0 - 1e-12) p0_values.push_back(g);
  }
  if (p1_values.empty()) p1_values.push_back(0.0);  // 0 is always admissible
  if (p0_values.empty()) p0_values.push_back(1.0);

  std::vector<DiscretePmf> one_laws, zero_laws;
  one_laws.reserve(p1_values.size());
  zero_laws.reserve(p0_values.size());
  for (double p1 : p1_values) {
    one_laws.push_back(DiscretePmf::binomial(family.n - 1, p1).shifted(1));
  }
  for (double p0 : p0_values) {
    zero_laws.push_back(DiscretePmf::binomial(family.n - 1, p0));
  }

  CountDeltaZ out;
  for (std::size_t a = 0; a < one_laws.size(); ++a) {
    for (std::size_t b = 0; b < zero_laws.size(); ++b) {
      const long long w = static_cast<long long>(wasserstein_inf(one_laws[a], zero_laws[b]));
      if (w > out.delta_z) {
        out.delta_z = w;
        out.argmax_p1 = p1_values[a];
        out.argmax_p0 = p0_values[b];
      }
    }
  }
  return out;
}

long long count_delta_z(const CountBoundFamily& family, int grid_steps) {
  return count_delta_z_detail(family, grid_steps).delta_z;
}

double gaussian_delta_z(const GaussianCondFamily& family) {
  family.validate();
  const double a = family.sigma_vz[0][0];
  const double b = family.sigma_vz[0][1];
  const double d = family.sigma_vz[1][1];
  const double det = a * d - b * b;
  const double trace = a + d;
  const double disc = std::sqrt(std::max(0.0, trace * trace - 4.0 * det));
  const double eig_max = 0.5 * (trace + disc);
  const double eig_min = 0.5 * (trace - disc);
  if (!(eig_min > 0.0) || eig_max / eig_min > 1e12) {
    throw NumericalError(
        "gaussian_delta_z: sigma_vz is singular or ill-conditioned (condition number " +
        std::to_string(eig_min > 0.0 ? eig_max / eig_min
                                     : std::numeric_limits<double>::infinity()) +
        ")");
  }
  // inv(sigma_vz) * (delta, z - mu_z)^T, then dot with sigma_xvz.
  const double r0 = family.delta;
  const double r1 = family.z - family.mu_z;
  const double s0 = (d * r0 - b * r1) / det;
  const double s1 = (-b * r0 + a * r1) / det;
  return family.sigma_xvz[0] * s0 + family.sigma_xvz[1] * s1;
}

double loss_variation_bound(LossFamily family, double delta_z) {
  if (!(delta_z >= 0.0)) {
    throw std::invalid_argument("loss_variation_bound: delta_z must be nonnegative");
  }
  if (family != LossFamily::norm_of_difference) {
    throw UnsupportedError(
        "loss_variation_bound: only norm-of-difference losses have a built-in bound; "
        "supply a custom bound for other losses");
  }
  return delta_z;
}

bool sdl_admits_count(long long n, const SdlFilter& filter, long long s_n) {
  if (s_n < 0 || s_n > n) {
    throw ValidationError("sdl_admits_count: count outside [0, n]");
  }
  if (filter.k_anonymity) {
    const long long k = *filter.k_anonymity;
    if (k < 1) throw std::invalid_argument("sdl_admits_count: k must be positive");
    if (2 * k > n) {
      throw InfeasibleConstraintError("sdl_admits_count: k-anonymity with k > n/2 admits no count");
    }
    if (s_n < k || s_n > n - k) return false;
  }
  if (filter.t_closeness) {
    const auto [t, t_star] = *filter.t_closeness;
    if (!(t >= 0.0)) throw std::invalid_argument("sdl_admits_count: t must be nonnegative");
    if (std::abs(static_cast<double>(s_n) / static_cast<double>(n) - t_star) > t) return false;
  }
  return true;
}

}  // namespace ppd
