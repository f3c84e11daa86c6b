#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppd/random.hpp"

namespace ppd {

enum class Norm { l1, l2, linf };

enum class LossKind {
  norm_of_difference,  // L_x(y) = ||y - T(x)||; exponential mechanism
  quadratic,           // L_x(y) = curvature/2 ||y - T(x)||^2; gradient mechanism
};

struct LossSpec {
  LossKind kind = LossKind::norm_of_difference;
  Norm norm = Norm::l2;
  double curvature = 1.0;  // gradient scale of the quadratic loss
};

enum class BaseMeasureKind {
  naive,                   // counting measure on the integer lattice
  deterministic_congenial,  // exact case total and cases >= deaths >= 0
  prior_congenial,          // congenial set weighted by a Dirichlet-Multinomial prior
};

struct BaseMeasure {
  BaseMeasureKind kind = BaseMeasureKind::naive;
  long long total = 0;                // required case sum for congenial kinds
  double alpha = 1.0;                 // Dirichlet-Multinomial concentration
  std::vector<double> prior_counts;   // per-county prior weights (previous month)
  bool ordering = true;               // enforce cases >= deaths >= 0

  void validate() const;
};

struct ChainConfig {
  long long burn_sweeps = -1;  // default 50 * J
  long long thin_sweeps = -1;  // default J, between retained replicates
};

struct MechanismSpec {
  double epsilon = 1.0;
  double sensitivity = 1.0;  // loss-variation bound sigma(delta_z)
  LossSpec loss;
  BaseMeasure base;
  std::uint64_t seed = 0;
  ChainConfig chain;

  void validate() const;
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  long long sweeps = 0;
};

struct Release {
  std::vector<long long> cases;   // empty for continuous releases
  std::vector<long long> deaths;  // may be empty
  std::vector<double> values;     // continuous releases
  std::optional<ChainDiagnostics> diagnostics;
};

// p(k) proportional to exp(-scale |k|), normalized to
// (e^s - 1)/(e^s + 1) e^{-s|k|}.
double discrete_laplace_pmf(long long k, double scale);
double discrete_laplace_log_pmf(long long k, double scale);

// Difference of two geometric tails; matches discrete_laplace_pmf exactly.
long long sample_discrete_laplace(double scale, RandomStream& rng);

// Dirichlet-Multinomial log mass of y (summing to total) with concentration
// vector alphas, via log-gamma accumulation. Stable for counts up to 1e6.
double dm_log_pmf(const std::vector<long long>& y, long long total,
                  const std::vector<double>& alphas);

struct ChainConstraints {
  long long total = 0;
  bool ordering = true;
};

using ChainTarget =
    std::function<double(const std::vector<long long>& cases, const std::vector<long long>& deaths)>;

struct ChainResult {
  std::vector<long long> cases;
  std::vector<long long> deaths;
  ChainDiagnostics diagnostics;
};

// Metropolis chain over integer vectors with a fixed case sum: case moves
// transfer delta units between two counties, death moves resample one county's
// deaths within [0, cases_j] (ordering) or step locally (no ordering). Deaths
// may be empty for cases-only targets. The move set is irreducible on the
// constraint polytope's integer points.
ChainResult constrained_chain_sample(const ChainTarget& target_log_density,
                                     std::vector<long long> init_cases,
                                     std::vector<long long> init_deaths,
                                     const ChainConstraints& constraints, long long sweeps,
                                     RandomStream& rng);

// Draw from the density f_X(y) proportional to
// exp(-epsilon L_X(y) / (2 sigma(delta_z))) with respect to the configured
// base measure. The naive integer base measure with L1 loss reduces exactly
// to per-coordinate discrete Laplace at scale epsilon / (2 sigma); congenial
// base measures run the constrained chain from the deterministic congenial
// projection of the statistic.
Release wasserstein_exp_mech(const MechanismSpec& spec, const std::vector<long long>& stat_cases,
                             const std::vector<long long>& stat_deaths, RandomStream& rng);

// Thinned replicates from one chain (congenial kinds) or independent draws
// (naive kind).
std::vector<Release> wasserstein_exp_mech_replicates(const MechanismSpec& spec,
                                                     const std::vector<long long>& stat_cases,
                                                     const std::vector<long long>& stat_deaths,
                                                     int n_replicates, RandomStream& rng);

// Noise with density proportional to exp(-||w||_K / scale) on R^dim:
// radial Gamma(dim, scale) times a uniform direction on the K-norm sphere.
std::vector<double> sample_knorm_noise(int dim, Norm k_norm, double scale, RandomStream& rng);

// Draw from f_X(y) proportional to
// exp(-epsilon ||grad L_X(y)||_K / (2 sigma_y(delta_z))). Requires a
// differentiable (quadratic) loss; the constant sensitivity bound comes from
// spec.sensitivity. For quadratic loss this is a K-norm density centered at
// the statistic.
Release knorm_gradient_mech(const MechanismSpec& spec, const std::vector<double>& statistic,
                            Norm k_norm, RandomStream& rng);

// Unnormalized log density of the gradient mechanism at y. sigma_y_hook, when
// given, supplies a y-dependent sensitivity bound; its calibration is the
// caller's responsibility.
double knorm_gradient_log_density(
    const MechanismSpec& spec, const std::vector<double>& statistic, Norm k_norm,
    const std::vector<double>& y,
    const std::function<double(const std::vector<double>&)>* sigma_y_hook = nullptr);

// CSV schema: replicate,county,cases,deaths (one row per replicate, county).
void releases_to_csv(std::ostream& out, const std::vector<Release>& releases);

std::string chain_diagnostics_json(const ChainDiagnostics& diag);

}  // namespace ppd
