#pragma once

#include <array>
#include <optional>
#include <utility>

#include "ppd/pmf.hpp"

namespace ppd {

// Family of conditional count laws for one binary record's discriminative
// pair, bounded by two probabilities: given the "other record is 1" secret
// the success rate of the remaining n-1 records lies in [0, z1]; given the
// "other record is 0" secret it lies in [z0, 1].
struct CountBoundFamily {
  long long n = 2;
  double z0 = 0.0;
  double z1 = 1.0;

  void validate() const;
};

// Jointly Gaussian (mean, record, public value) block. sigma_xvz is the
// cross-covariance of the target mean with (record, Z); sigma_vz the 2x2
// covariance of (record, Z); delta bounds a single record's displacement;
// z - mu_z is the realized public offset.
struct GaussianCondFamily {
  std::array<double, 2> sigma_xvz{0.0, 0.0};
  std::array<std::array<double, 2>, 2> sigma_vz{{{1.0, 0.0}, {0.0, 1.0}}};
  double delta = 0.0;
  double mu_z = 0.0;
  double z = 0.0;

  void validate() const;
};

// One-dimensional Wasserstein-infinity distance via the monotone (quantile)
// coupling: sup over quantile levels of |F_p^-(t) - F_q^-(t)|.
double wasserstein_inf(const DiscretePmf& p, const DiscretePmf& q);

// Independent evaluator for desk-scale inputs (supports of size <= 12): binary
// search over candidate displacements, each checked by a transportation
// feasibility max-flow. Must agree with wasserstein_inf everywhere.
double wasserstein_inf_flow(const DiscretePmf& p, const DiscretePmf& q);

struct CountDeltaZ {
  long long delta_z = 0;
  double argmax_p1 = 0.0;  // success rate under the "record is 1" secret
  double argmax_p0 = 0.0;  // success rate under the "record is 0" secret
};

// Sup over the family of W-infinity between the conditional count laws
//   S_n | record=1  ~  1 + Binomial(n-1, p1),  p1 in [0, z1]
//   S_n | record=0  ~      Binomial(n-1, p0),  p0 in [z0, 1],
// maximized over an absolute grid of grid_steps points on [0, 1] restricted
// to each interval. Restricting a shared grid keeps the reported sup monotone
// as the family grows. Result lies in {1, ..., n}.
CountDeltaZ count_delta_z_detail(const CountBoundFamily& family, int grid_steps);
long long count_delta_z(const CountBoundFamily& family, int grid_steps = 101);

// Closed-form W-infinity between the two conditional Gaussian location-family
// members: sigma_xvz^T sigma_vz^{-1} (delta, z - mu_z)^T. The optimal coupling
// is a constant shift, so no discretization is involved.
double gaussian_delta_z(const GaussianCondFamily& family);

enum class LossFamily {
  norm_of_difference,  // L_x(y) = ||y - T(x)|| with d(x, x') = ||T(x) - T(x')||
  custom,              // caller must supply their own bound
};

// Maximum loss variation over databases within delta_z of each other. For
// norm-of-difference losses the reverse triangle inequality makes this
// exactly delta_z; other loss families are rejected.
double loss_variation_bound(LossFamily family, double delta_z);

struct SdlFilter {
  std::optional<long long> k_anonymity;
  // (t, t_star): require |s_n / n - t_star| <= t.
  std::optional<std::pair<double, double>> t_closeness;
};

// Whether releasing (S_n, n - S_n) meets the requested disclosure-limitation
// constraints. Pairs inconsistent with the constraint set fall outside the
// guarantee surface.
bool sdl_admits_count(long long n, const SdlFilter& filter, long long s_n);

}  // namespace ppd
