#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppd/core.hpp"
#include "ppd/random.hpp"

namespace ppd {

enum class Strategy {
  postprocess,            // additive discrete Laplace, then two-stage projection
  wasserstein_naive,      // exponential mechanism over the unrestricted lattice
  wasserstein_congenial,  // exponential mechanism over the exact-total ordered set
  wasserstein_prior,      // congenial set weighted by a Dirichlet-Multinomial prior
};

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy strategy);

struct SynthSpec {
  long long counties = 10;
  long long months = 6;
};

struct ExperimentConfig {
  Strategy strategy = Strategy::postprocess;
  double epsilon = 1.0;
  double delta_z = 2.0;
  int replicates = 100;
  double alpha = 1.0;  // Dirichlet-Multinomial concentration
  std::uint64_t seed = 0;
  std::string input;  // panel CSV path; empty means synthesize
  SynthSpec synth;
  long long chain_burn = -1;
  long long chain_thin = -1;

  void validate() const;
  static ExperimentConfig from_json(const std::string& text);
  std::string to_json() const;
};

// One synthesized month: per-county case and death vectors.
struct MonthRelease {
  long long month = 0;
  std::vector<long long> cases;
  std::vector<long long> deaths;
};

struct MetricsCell {
  int replicate = 0;
  long long month = 0;
  long long county = 0;
  double rel_cases = 0.0;  // |synthetic - true| / max(true, 1) * 100
  double rel_deaths = 0.0;
};

struct MetricsReport {
  long long counties = 0;
  long long months = 0;
  int replicates = 0;
  std::vector<MetricsCell> errors;  // replicate-major, then month, then county
  // Counts per [county][month] across replicates.
  std::vector<std::vector<long long>> contracted_case_zeros;
  std::vector<std::vector<long long>> contracted_death_zeros;
  std::vector<std::vector<long long>> contracted_rates;
  std::vector<std::string> month_failures;  // infeasible months, recorded and skipped
};

struct SynthesisOutput {
  // [replicate] -> synthesized months (t >= 1), in month order.
  std::vector<std::vector<MonthRelease>> replicates;
  // Pre-projection states for the postprocess strategy; mirrors `replicates`
  // (identical to it for strategies without a projection step).
  std::vector<std::vector<MonthRelease>> pre_projection;
  MetricsReport metrics;
};

// Validated panel from a CSV file on disk.
CountPanel ingest_panel(const std::string& path);

// Synthetic panel: log-normal county scales spread over two-plus orders of
// magnitude, multiplicative month-over-month drift, deaths thinned from
// cases. Bit-identical for a fixed seed.
CountPanel synth_panel(long long counties, long long months, std::uint64_t seed);

// For each month t >= 1 builds the public information from month t-1 and the
// true total, runs the configured strategy for every replicate, and fills the
// metrics report. Infeasible months are recorded and skipped. Replicates run
// on a worker pool with per-task seeds; output order is deterministic.
SynthesisOutput run_synthesis(const ExperimentConfig& config, const CountPanel& panel);

struct ContractionFlags {
  bool case_zero = false;
  bool death_zero = false;
  bool rate = false;
};

// Per-county contraction events of one replicate month: a positive count
// collapsing to zero, or the ordering constraint forcing cases == deaths.
// `truth` fixes the expected shape.
std::vector<ContractionFlags> contraction_metrics(const std::vector<long long>& pre_cases,
                                                  const std::vector<long long>& pre_deaths,
                                                  const std::vector<long long>& post_cases,
                                                  const std::vector<long long>& post_deaths,
                                                  const std::vector<long long>& truth_cases);

struct DeltaZGridRow {
  long long n = 0;
  double z0 = 0.0;
  double z1 = 0.0;
  long long delta_z = 0;
};

std::vector<DeltaZGridRow> experiment_delta_z_grid(const std::vector<long long>& n_values,
                                                   const std::vector<double>& z0_grid,
                                                   const std::vector<double>& z1_grid,
                                                   int grid_steps = 101);

struct ManifoldResult {
  int d1 = 0;
  int d2 = 0;
  double mse_project_ambient = 0.0;
  double mse_subspace = 0.0;
};

// Mean estimation with L1 K-norm noise: ambient noise projected onto a rank-d2
// subspace versus noise added intrinsically, each calibrated to its own
// sensitivity. Mean squared errors are against the non-private mean.
ManifoldResult experiment_manifold(int d1, int d2, long long n, double epsilon, int reps,
                                   RandomStream& rng);

struct KngRateResult {
  std::vector<long long> n_grid;
  std::vector<double> median_error_gradient;
  std::vector<double> median_error_laplace;
  double slope_gradient = 0.0;
  double slope_laplace = 0.0;
};

// Median release error of the gradient mechanism for sample means across a
// grid of data sizes, with an additive-Laplace baseline; both log-log slopes
// should sit near -1. Requires >= 3 distinct sizes spanning at least 16x.
KngRateResult experiment_kng_rate(const std::vector<long long>& n_grid, double epsilon, int reps,
                                  RandomStream& rng);

struct PowerResult {
  std::vector<double> alternatives;
  std::vector<double> power_clamped;  // test on the clamped release alone
  std::vector<double> power_joint;    // test on the raw release and window
  std::vector<double> se_diff;        // paired standard error of the difference
  double alpha = 0.0;
};

// Binomial counts released through discrete Laplace noise, then clamped to
// [lo, hi]. Builds exact size-alpha randomized threshold tests on the clamped
// release and on the raw release, and estimates both powers by Monte Carlo on
// shared draws.
PowerResult experiment_power(long long n, double theta0, double epsilon, long long lo,
                             long long hi, double alpha, int reps,
                             const std::vector<double>& alternatives, RandomStream& rng);

// Output writers. Column layouts are described in docs/output-schema.md.
void replicates_to_csv(std::ostream& out, const SynthesisOutput& output);
void metrics_to_csv(std::ostream& out, const MetricsReport& metrics);
void delta_z_grid_to_csv(std::ostream& out, const std::vector<DeltaZGridRow>& rows);
std::string manifold_to_json(const ManifoldResult& result);
std::string kng_rate_to_json(const KngRateResult& result);
std::string power_to_json(const PowerResult& result);

}  // namespace ppd
