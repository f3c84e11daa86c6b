#include "ppd/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "ppd/errors.hpp"
#include "ppd/mechanisms.hpp"
#include "ppd/parallel.hpp"
#include "ppd/pmf.hpp"
#include "ppd/postprocess.hpp"
#include "ppd/sensitivity.hpp"

namespace ppd {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double relative_error(long long synthetic, long long truth) {
  const double denom = std::max<double>(static_cast<double>(truth), 1.0);
  return std::abs(static_cast<double>(synthetic - truth)) / denom * 100.0;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid) - 1,
                     values.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + values[mid - 1]);
  }
  return m;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  if (name == "postprocess") return Strategy::postprocess;
  if (name == "wasserstein-naive") return Strategy::wasserstein_naive;
  if (name == "wasserstein-congenial") return Strategy::wasserstein_congenial;
  if (name == "wasserstein-prior") return Strategy::wasserstein_prior;
  throw ValidationError("unknown strategy '" + name +
                        "'; expected postprocess, wasserstein-naive, wasserstein-congenial, or "
                        "wasserstein-prior");
}

std::string strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::postprocess:
      return "postprocess";
    case Strategy::wasserstein_naive:
      return "wasserstein-naive";
    case Strategy::wasserstein_congenial:
      return "wasserstein-congenial";
    case Strategy::wasserstein_prior:
      return "wasserstein-prior";
  }
  return "postprocess";
}

void ExperimentConfig::validate() const {
  if (!(epsilon > 0.0)) throw ValidationError("config: epsilon must be positive");
  if (!(delta_z > 0.0)) throw ValidationError("config: delta_z must be positive");
  if (replicates < 1) throw ValidationError("config: need at least one replicate");
  if (!(alpha > 0.0)) throw ValidationError("config: alpha must be positive");
  if (input.empty() && (synth.counties < 1 || synth.months < 2)) {
    throw ValidationError("config: synthetic panels need >= 1 county and >= 2 months");
  }
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig config;
  try {
    if (doc.contains("strategy")) config.strategy = strategy_from_string(doc["strategy"]);
    if (doc.contains("epsilon")) config.epsilon = doc["epsilon"].get<double>();
    if (doc.contains("delta_z")) config.delta_z = doc["delta_z"].get<double>();
    if (doc.contains("replicates")) config.replicates = doc["replicates"].get<int>();
    if (doc.contains("alpha")) config.alpha = doc["alpha"].get<double>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("input")) config.input = doc["input"].get<std::string>();
    if (doc.contains("synth_counties")) config.synth.counties = doc["synth_counties"].get<long long>();
    if (doc.contains("synth_months")) config.synth.months = doc["synth_months"].get<long long>();
    if (doc.contains("chain_burn")) config.chain_burn = doc["chain_burn"].get<long long>();
    if (doc.contains("chain_thin")) config.chain_thin = doc["chain_thin"].get<long long>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: bad field type: ") + e.what());
  }
  config.validate();
  return config;
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json doc;
  doc["strategy"] = strategy_name(strategy);
  doc["epsilon"] = epsilon;
  doc["delta_z"] = delta_z;
  doc["replicates"] = replicates;
  doc["alpha"] = alpha;
  doc["seed"] = seed;
  doc["input"] = input;
  doc["synth_counties"] = synth.counties;
  doc["synth_months"] = synth.months;
  doc["chain_burn"] = chain_burn;
  doc["chain_thin"] = chain_thin;
  return doc.dump(2);
}

CountPanel ingest_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file '" + path + "'");
  return CountPanel::from_csv(in);
}

CountPanel synth_panel(long long counties, long long months, std::uint64_t seed) {
  if (counties < 1 || months < 1) {
    throw std::invalid_argument("synth_panel: need at least one county and one month");
  }
  RandomStream root(seed);
  RandomStream scale_rng = root.split(1);
  RandomStream drift_rng = root.split(2);
  RandomStream noise_rng = root.split(3);
  RandomStream rate_rng = root.split(4);

  // County scales: log-spaced from small-rural to large-urban with log-normal
  // jitter, so the largest/smallest ratio stays well above 100x for J >= 10.
  std::vector<double> scales(static_cast<std::size_t>(counties));
  for (long long j = 0; j < counties; ++j) {
    const double frac = counties > 1 ? static_cast<double>(j) / (counties - 1) : 0.5;
    const double log_scale = std::log(20.0) + frac * (std::log(8000.0) - std::log(20.0));
    scales[static_cast<std::size_t>(j)] = std::exp(log_scale + 0.25 * scale_rng.normal());
  }
  std::vector<double> death_rates(static_cast<std::size_t>(counties));
  for (double& r : death_rates) {
    r = std::clamp(0.05 * std::exp(0.4 * rate_rng.normal()), 0.01, 0.2);
  }

  CountPanel panel;
  panel.counties = counties;
  panel.months = months;
  panel.cases.assign(static_cast<std::size_t>(counties),
                     std::vector<long long>(static_cast<std::size_t>(months), 0));
  panel.deaths.assign(static_cast<std::size_t>(counties),
                      std::vector<long long>(static_cast<std::size_t>(months), 0));
  double month_level = 1.0;
  for (long long t = 0; t < months; ++t) {
    if (t > 0) {
      month_level = std::clamp(month_level * std::exp(0.2 * drift_rng.normal()), 0.3, 3.0);
    }
    for (long long j = 0; j < counties; ++j) {
      const double mean = scales[static_cast<std::size_t>(j)] * month_level;
      const long long c =
          std::max<long long>(0, std::llround(mean * std::exp(0.15 * noise_rng.normal())));
      const double death_mean = static_cast<double>(c) * death_rates[static_cast<std::size_t>(j)];
      const long long d = std::min<long long>(
          c, std::max<long long>(0, std::llround(death_mean * std::exp(0.2 * noise_rng.normal()))));
      panel.cases[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)] = c;
      panel.deaths[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)] = d;
    }
  }
  panel.validate();
  return panel;
}

std::vector<ContractionFlags> contraction_metrics(const std::vector<long long>& pre_cases,
                                                  const std::vector<long long>& pre_deaths,
                                                  const std::vector<long long>& post_cases,
                                                  const std::vector<long long>& post_deaths,
                                                  const std::vector<long long>& truth_cases) {
  const std::size_t J = truth_cases.size();
  if (pre_cases.size() != J || pre_deaths.size() != J || post_cases.size() != J ||
      post_deaths.size() != J) {
    throw std::invalid_argument("contraction_metrics: replicate arrays are not aligned");
  }
  std::vector<ContractionFlags> flags(J);
  for (std::size_t j = 0; j < J; ++j) {
    flags[j].case_zero = pre_cases[j] > 0 && post_cases[j] == 0;
    flags[j].death_zero = pre_deaths[j] > 0 && post_deaths[j] == 0;
    flags[j].rate = post_cases[j] == post_deaths[j] && pre_cases[j] > pre_deaths[j];
  }
  return flags;
}

namespace {

struct ReplicateMonth {
  MonthRelease pre;
  MonthRelease post;
  bool ok = false;
  std::string failure;
};

ReplicateMonth synthesize_month(const ExperimentConfig& config,
                                const std::vector<long long>& truth_cases,
                                const std::vector<long long>& truth_deaths,
                                const PublicInfo& info, long long month, RandomStream& rng) {
  ReplicateMonth out;
  out.pre.month = out.post.month = month;
  const std::size_t J = truth_cases.size();
  const double sigma = loss_variation_bound(LossFamily::norm_of_difference, config.delta_z);

  switch (config.strategy) {
    case Strategy::postprocess: {
      const double scale = config.epsilon / config.delta_z;
      std::vector<long long> noisy_cases(J), noisy_deaths(J);
      for (std::size_t j = 0; j < J; ++j) {
        noisy_cases[j] = truth_cases[j] + sample_discrete_laplace(scale, rng);
        noisy_deaths[j] = truth_deaths[j] + sample_discrete_laplace(scale, rng);
      }
      out.pre.cases = noisy_cases;
      out.pre.deaths = noisy_deaths;
      const std::vector<double> c(noisy_cases.begin(), noisy_cases.end());
      const std::vector<double> d(noisy_deaths.begin(), noisy_deaths.end());
      const ContinuousCounts cont =
          project_counts(c, d, static_cast<double>(info.current_total));
      const IntegerCounts rounded = round_counts(cont.cases, cont.deaths, info.current_total);
      out.post.cases = rounded.cases;
      out.post.deaths = rounded.deaths;
      break;
    }
    case Strategy::wasserstein_naive:
    case Strategy::wasserstein_congenial:
    case Strategy::wasserstein_prior: {
      MechanismSpec spec;
      spec.epsilon = config.epsilon;
      spec.sensitivity = sigma;
      spec.seed = rng.seed();
      spec.chain.burn_sweeps = config.chain_burn;
      spec.chain.thin_sweeps = config.chain_thin;
      if (config.strategy == Strategy::wasserstein_naive) {
        spec.loss = LossSpec{LossKind::norm_of_difference, Norm::l1, 1.0};
        spec.base.kind = BaseMeasureKind::naive;
        spec.base.ordering = false;
      } else {
        spec.loss = LossSpec{LossKind::norm_of_difference, Norm::l2, 1.0};
        spec.base.kind = config.strategy == Strategy::wasserstein_congenial
                             ? BaseMeasureKind::deterministic_congenial
                             : BaseMeasureKind::prior_congenial;
        spec.base.total = info.current_total;
        spec.base.ordering = info.ordering_enforced;
        if (config.strategy == Strategy::wasserstein_prior) {
          spec.base.alpha = config.alpha;
          spec.base.prior_counts.assign(info.prior_cases.begin(), info.prior_cases.end());
        }
      }
      const Release release = wasserstein_exp_mech(spec, truth_cases, truth_deaths, rng);
      out.post.cases = release.cases;
      out.post.deaths = release.deaths;
      out.pre = out.post;  // no projection step
      break;
    }
  }
  out.ok = true;
  return out;
}

}  // namespace

SynthesisOutput run_synthesis(const ExperimentConfig& config, const CountPanel& panel) {
  config.validate();
  panel.validate();
  if (panel.months < 2) {
    throw ValidationError("run_synthesis: panels need at least two months");
  }
  const long long J = panel.counties;
  const long long T = panel.months;
  const int R = config.replicates;

  SynthesisOutput output;
  output.replicates.resize(static_cast<std::size_t>(R));
  output.pre_projection.resize(static_cast<std::size_t>(R));
  output.metrics.counties = J;
  output.metrics.months = T;
  output.metrics.replicates = R;
  output.metrics.contracted_case_zeros.assign(
      static_cast<std::size_t>(J), std::vector<long long>(static_cast<std::size_t>(T), 0));
  output.metrics.contracted_death_zeros = output.metrics.contracted_case_zeros;
  output.metrics.contracted_rates = output.metrics.contracted_case_zeros;

  std::vector<std::vector<MetricsCell>> cell_buffers(static_cast<std::size_t>(R));
  std::vector<std::vector<std::string>> failure_buffers(static_cast<std::size_t>(R));
  const RandomStream root(config.seed);

  parallel_for(static_cast<std::size_t>(R), [&](std::size_t r) {
    RandomStream replicate_rng = root.split(r);
    for (long long t = 1; t < T; ++t) {
      std::vector<long long> truth_cases(static_cast<std::size_t>(J)),
          truth_deaths(static_cast<std::size_t>(J));
      PublicInfo info;
      info.prior_cases.resize(static_cast<std::size_t>(J));
      info.prior_deaths.resize(static_cast<std::size_t>(J));
      info.current_total = 0;
      for (long long j = 0; j < J; ++j) {
        truth_cases[static_cast<std::size_t>(j)] = panel.cases[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
        truth_deaths[static_cast<std::size_t>(j)] = panel.deaths[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
        info.prior_cases[static_cast<std::size_t>(j)] =
            panel.cases[static_cast<std::size_t>(j)][static_cast<std::size_t>(t - 1)];
        info.prior_deaths[static_cast<std::size_t>(j)] =
            panel.deaths[static_cast<std::size_t>(j)][static_cast<std::size_t>(t - 1)];
        info.current_total += truth_cases[static_cast<std::size_t>(j)];
      }
      RandomStream month_rng = replicate_rng.split(static_cast<std::uint64_t>(t));
      ReplicateMonth result;
      try {
        result = synthesize_month(config, truth_cases, truth_deaths, info, t, month_rng);
      } catch (const InfeasibleConstraintError& e) {
        failure_buffers[r].push_back("replicate " + std::to_string(r) + " month " +
                                     std::to_string(t) + ": " + e.what());
        continue;
      }
      for (long long j = 0; j < J; ++j) {
        MetricsCell cell;
        cell.replicate = static_cast<int>(r);
        cell.month = t;
        cell.county = j;
        cell.rel_cases = relative_error(result.post.cases[static_cast<std::size_t>(j)],
                                        truth_cases[static_cast<std::size_t>(j)]);
        cell.rel_deaths = relative_error(result.post.deaths[static_cast<std::size_t>(j)],
                                         truth_deaths[static_cast<std::size_t>(j)]);
        cell_buffers[r].push_back(cell);
      }
      output.pre_projection[r].push_back(result.pre);
      output.replicates[r].push_back(result.post);
    }
  });

  for (std::size_t r = 0; r < static_cast<std::size_t>(R); ++r) {
    for (const MetricsCell& cell : cell_buffers[r]) output.metrics.errors.push_back(cell);
    for (const std::string& failure : failure_buffers[r]) {
      output.metrics.month_failures.push_back(failure);
    }
    for (std::size_t m = 0; m < output.replicates[r].size(); ++m) {
      const MonthRelease& pre = output.pre_projection[r][m];
      const MonthRelease& post = output.replicates[r][m];
      std::vector<long long> truth(static_cast<std::size_t>(J));
      for (long long j = 0; j < J; ++j) {
        truth[static_cast<std::size_t>(j)] =
            panel.cases[static_cast<std::size_t>(j)][static_cast<std::size_t>(post.month)];
      }
      const auto flags = contraction_metrics(pre.cases, pre.deaths, post.cases, post.deaths, truth);
      for (long long j = 0; j < J; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const auto tt = static_cast<std::size_t>(post.month);
        if (flags[jj].case_zero) ++output.metrics.contracted_case_zeros[jj][tt];
        if (flags[jj].death_zero) ++output.metrics.contracted_death_zeros[jj][tt];
        if (flags[jj].rate) ++output.metrics.contracted_rates[jj][tt];
      }
    }
  }
  return output;
}

std::vector<DeltaZGridRow> experiment_delta_z_grid(const std::vector<long long>& n_values,
                                                   const std::vector<double>& z0_grid,
                                                   const std::vector<double>& z1_grid,
                                                   int grid_steps) {
  std::vector<DeltaZGridRow> rows;
  for (long long n : n_values) {
    for (double z0 : z0_grid) {
      for (double z1 : z1_grid) {
        CountBoundFamily family{n, z0, z1};
        rows.push_back(DeltaZGridRow{n, z0, z1, count_delta_z(family, grid_steps)});
      }
    }
  }
  return rows;
}

ManifoldResult experiment_manifold(int d1, int d2, long long n, double epsilon, int reps,
                                   RandomStream& rng) {
  if (d2 < 1 || d2 > d1) throw std::invalid_argument("experiment_manifold: need 1 <= d2 <= d1");
  if (n < 1 || reps < 1) throw std::invalid_argument("experiment_manifold: need n, reps >= 1");

  // Random orthonormal basis of the subspace (Gram-Schmidt on a Gaussian
  // matrix). Only Q^T w is needed: the projection's squared norm equals
  // ||Q^T w||^2.
  std::vector<std::vector<double>> basis;
  for (int k = 0; k < d2; ++k) {
    std::vector<double> v(static_cast<std::size_t>(d1));
    for (double& x : v) x = rng.normal();
    for (const auto& q : basis) {
      double coef = 0.0;
      for (int i = 0; i < d1; ++i) coef += v[static_cast<std::size_t>(i)] * q[static_cast<std::size_t>(i)];
      for (int i = 0; i < d1; ++i) v[static_cast<std::size_t>(i)] -= coef * q[static_cast<std::size_t>(i)];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }

  // Per-record L-infinity bound 1: the ambient mean's L1 sensitivity is d1/n,
  // the intrinsic mean's is sqrt(d1 d2)/n.
  const double sigma_ambient = static_cast<double>(d1) / static_cast<double>(n);
  const double sigma_subspace =
      std::sqrt(static_cast<double>(d1) * static_cast<double>(d2)) / static_cast<double>(n);
  const double scale_ambient = 2.0 * sigma_ambient / epsilon;
  const double scale_subspace = 2.0 * sigma_subspace / epsilon;

  double mse_ambient = 0.0, mse_subspace = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const std::vector<double> w1 = sample_knorm_noise(d1, Norm::l1, scale_ambient, rng);
    double projected_sq = 0.0;
    for (const auto& q : basis) {
      double coef = 0.0;
      for (int i = 0; i < d1; ++i) coef += q[static_cast<std::size_t>(i)] * w1[static_cast<std::size_t>(i)];
      projected_sq += coef * coef;
    }
    mse_ambient += projected_sq;
    const std::vector<double> w2 = sample_knorm_noise(d2, Norm::l1, scale_subspace, rng);
    double intrinsic_sq = 0.0;
    for (double x : w2) intrinsic_sq += x * x;
    mse_subspace += intrinsic_sq;
  }
  ManifoldResult out;
  out.d1 = d1;
  out.d2 = d2;
  out.mse_project_ambient = mse_ambient / reps;
  out.mse_subspace = mse_subspace / reps;
  return out;
}

KngRateResult experiment_kng_rate(const std::vector<long long>& n_grid, double epsilon, int reps,
                                  RandomStream& rng) {
  std::set<long long> distinct(n_grid.begin(), n_grid.end());
  if (distinct.size() < 3) {
    throw std::invalid_argument("experiment_kng_rate: need at least 3 distinct data sizes");
  }
  const long long n_min = *distinct.begin();
  const long long n_max = *distinct.rbegin();
  if (n_min < 1 || n_max < 16 * n_min) {
    throw std::invalid_argument("experiment_kng_rate: sizes must span at least 16x");
  }
  if (reps < 2) throw std::invalid_argument("experiment_kng_rate: need reps >= 2");

  KngRateResult out;
  out.n_grid.assign(distinct.begin(), distinct.end());
  std::uint64_t task = 0;
  for (long long n : out.n_grid) {
    std::vector<double> err_gradient(static_cast<std::size_t>(reps));
    std::vector<double> err_laplace(static_cast<std::size_t>(reps));
    RandomStream size_rng = rng.split(task++);
    MechanismSpec spec;
    spec.epsilon = epsilon;
    // Records live in [-1/2, 1/2]; with summed quadratic loss the gradient
    // sensitivity over mean displacements of at most 1/n is constant 1.
    spec.sensitivity = 1.0;
    spec.loss = LossSpec{LossKind::quadratic, Norm::l2, static_cast<double>(n)};
    for (int rep = 0; rep < reps; ++rep) {
      double mean = 0.0;
      for (long long i = 0; i < n; ++i) mean += size_rng.uniform01() - 0.5;
      mean /= static_cast<double>(n);
      const Release release = knorm_gradient_mech(spec, {mean}, Norm::l2, size_rng);
      err_gradient[static_cast<std::size_t>(rep)] = std::abs(release.values[0] - mean);
      const double lap = (size_rng.exponential() - size_rng.exponential()) /
                         (static_cast<double>(n) * epsilon);
      err_laplace[static_cast<std::size_t>(rep)] = std::abs(lap);
    }
    out.median_error_gradient.push_back(median_of(std::move(err_gradient)));
    out.median_error_laplace.push_back(median_of(std::move(err_laplace)));
  }
  std::vector<double> log_n, log_gradient, log_laplace;
  for (std::size_t i = 0; i < out.n_grid.size(); ++i) {
    log_n.push_back(std::log(static_cast<double>(out.n_grid[i])));
    log_gradient.push_back(std::log(out.median_error_gradient[i]));
    log_laplace.push_back(std::log(out.median_error_laplace[i]));
  }
  out.slope_gradient = ols_slope(log_n, log_gradient);
  out.slope_laplace = ols_slope(log_n, log_laplace);
  return out;
}

namespace {

struct ThresholdTest {
  long long threshold = 0;
  double gamma = 0.0;  // rejection probability exactly at the threshold
  bool always_accept = false;
};

// Smallest threshold with P(V > c) <= alpha, randomized at c to hit alpha
// exactly. `support` must be ascending with matching masses.
ThresholdTest build_threshold_test(const std::vector<long long>& support,
                                   const std::vector<double>& mass, double alpha) {
  ThresholdTest test;
  if (alpha <= 0.0) {
    test.always_accept = true;
    return test;
  }
  double tail = 0.0;  // P(V > c) starting past the end
  std::size_t i = support.size();
  while (i > 0) {
    const double with_point = tail + mass[i - 1];
    if (with_point > alpha) {
      test.threshold = support[i - 1];
      test.gamma = mass[i - 1] > 0.0 ? (alpha - tail) / mass[i - 1] : 0.0;
      return test;
    }
    tail = with_point;
    --i;
  }
  // Everything rejects at level alpha >= 1.
  test.threshold = support.front() - 1;
  test.gamma = 0.0;
  return test;
}

}  // namespace

PowerResult experiment_power(long long n, double theta0, double epsilon, long long lo,
                             long long hi, double alpha, int reps,
                             const std::vector<double>& alternatives, RandomStream& rng) {
  if (n < 1) throw std::invalid_argument("experiment_power: n must be positive");
  if (!(theta0 > 0.0 && theta0 < 1.0)) {
    throw std::invalid_argument("experiment_power: theta0 must lie in (0, 1)");
  }
  if (lo > hi) throw std::invalid_argument("experiment_power: empty clamp window");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("experiment_power: alpha must lie in [0, 1]");
  }
  if (reps < 2) throw std::invalid_argument("experiment_power: need reps >= 2");

  // Exact null law of Y = S + K with S ~ Binomial(n, theta0) and K discrete
  // Laplace at scale epsilon; the tail truncation error is below 1e-20.
  const long long margin = std::max<long long>(60, static_cast<long long>(60.0 / epsilon));
  const DiscretePmf null_counts = DiscretePmf::binomial(n, theta0);
  std::vector<long long> y_support;
  std::vector<double> y_mass;
  for (long long y = -margin; y <= n + margin; ++y) {
    double mass = 0.0;
    for (std::size_t s = 0; s < null_counts.size(); ++s) {
      mass += null_counts.mass()[s] * discrete_laplace_pmf(y - null_counts.support()[s], epsilon);
    }
    y_support.push_back(y);
    y_mass.push_back(mass);
  }
  const ThresholdTest joint_test = build_threshold_test(y_support, y_mass, alpha);

  std::vector<long long> clamped_support;
  std::vector<double> clamped_mass;
  for (long long v = lo; v <= hi; ++v) {
    clamped_support.push_back(v);
    clamped_mass.push_back(0.0);
  }
  for (std::size_t i = 0; i < y_support.size(); ++i) {
    const long long v = std::clamp(y_support[i], lo, hi);
    clamped_mass[static_cast<std::size_t>(v - lo)] += y_mass[i];
  }
  const ThresholdTest clamped_test = build_threshold_test(clamped_support, clamped_mass, alpha);

  auto apply = [](const ThresholdTest& test, long long value, double u) {
    if (test.always_accept) return false;
    if (value > test.threshold) return true;
    return value == test.threshold && u < test.gamma;
  };

  PowerResult out;
  out.alpha = alpha;
  out.alternatives = alternatives;
  for (std::size_t a = 0; a < alternatives.size(); ++a) {
    const double theta = alternatives[a];
    RandomStream alt_rng = rng.split(a);
    long long joint_rejections = 0, clamped_rejections = 0;
    double diff_sum = 0.0, diff_sq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      long long s = 0;
      for (long long i = 0; i < n; ++i) s += alt_rng.bernoulli(theta) ? 1 : 0;
      const long long y = s + sample_discrete_laplace(epsilon, alt_rng);
      const double u = alt_rng.uniform01();
      const bool joint = apply(joint_test, y, u);
      const bool clamped = apply(clamped_test, std::clamp(y, lo, hi), u);
      joint_rejections += joint ? 1 : 0;
      clamped_rejections += clamped ? 1 : 0;
      const double diff = static_cast<double>(joint) - static_cast<double>(clamped);
      diff_sum += diff;
      diff_sq += diff * diff;
    }
    const double mean_diff = diff_sum / reps;
    const double var_diff = std::max(0.0, diff_sq / reps - mean_diff * mean_diff);
    out.power_joint.push_back(static_cast<double>(joint_rejections) / reps);
    out.power_clamped.push_back(static_cast<double>(clamped_rejections) / reps);
    out.se_diff.push_back(std::sqrt(var_diff / reps));
  }
  return out;
}

void replicates_to_csv(std::ostream& out, const SynthesisOutput& output) {
  out << "replicate,month,county,cases,deaths\n";
  for (std::size_t r = 0; r < output.replicates.size(); ++r) {
    for (const MonthRelease& month : output.replicates[r]) {
      for (std::size_t j = 0; j < month.cases.size(); ++j) {
        out << r << ',' << month.month << ',' << j << ',' << month.cases[j] << ','
            << (j < month.deaths.size() ? month.deaths[j] : 0) << '\n';
      }
    }
  }
}

void metrics_to_csv(std::ostream& out, const MetricsReport& metrics) {
  out << "county,month,replicates,mean_rel_cases,median_rel_cases,max_rel_cases,mean_rel_deaths,"
         "contracted_case_zeros,contracted_death_zeros,contracted_rates\n";
  std::map<std::pair<long long, long long>, std::vector<const MetricsCell*>> groups;
  for (const MetricsCell& cell : metrics.errors) {
    groups[{cell.county, cell.month}].push_back(&cell);
  }
  for (const auto& [key, cells] : groups) {
    const auto [county, month] = key;
    std::vector<double> rel_cases;
    double mean_cases = 0.0, mean_deaths = 0.0, max_cases = 0.0;
    for (const MetricsCell* cell : cells) {
      rel_cases.push_back(cell->rel_cases);
      mean_cases += cell->rel_cases;
      mean_deaths += cell->rel_deaths;
      max_cases = std::max(max_cases, cell->rel_cases);
    }
    mean_cases /= static_cast<double>(cells.size());
    mean_deaths /= static_cast<double>(cells.size());
    out << county << ',' << month << ',' << cells.size() << ',' << format_double(mean_cases) << ','
        << format_double(median_of(std::move(rel_cases))) << ',' << format_double(max_cases) << ','
        << format_double(mean_deaths) << ','
        << metrics.contracted_case_zeros[static_cast<std::size_t>(county)][static_cast<std::size_t>(month)]
        << ','
        << metrics.contracted_death_zeros[static_cast<std::size_t>(county)][static_cast<std::size_t>(month)]
        << ','
        << metrics.contracted_rates[static_cast<std::size_t>(county)][static_cast<std::size_t>(month)]
        << '\n';
  }
}

void delta_z_grid_to_csv(std::ostream& out, const std::vector<DeltaZGridRow>& rows) {
  out << "n,z0,z1,delta_z\n";
  for (const DeltaZGridRow& row : rows) {
    out << row.n << ',' << format_double(row.z0) << ',' << format_double(row.z1) << ','
        << row.delta_z << '\n';
  }
}

std::string manifold_to_json(const ManifoldResult& result) {
  nlohmann::json doc;
  doc["d1"] = result.d1;
  doc["d2"] = result.d2;
  doc["mse_project_ambient"] = result.mse_project_ambient;
  doc["mse_subspace"] = result.mse_subspace;
  doc["ratio"] = result.mse_subspace / result.mse_project_ambient;
  return doc.dump(2);
}

std::string kng_rate_to_json(const KngRateResult& result) {
  nlohmann::json doc;
  doc["n_grid"] = result.n_grid;
  doc["median_error_gradient"] = result.median_error_gradient;
  doc["median_error_laplace"] = result.median_error_laplace;
  doc["slope_gradient"] = result.slope_gradient;
  doc["slope_laplace"] = result.slope_laplace;
  return doc.dump(2);
}

std::string power_to_json(const PowerResult& result) {
  nlohmann::json doc;
  doc["alpha"] = result.alpha;
  doc["alternatives"] = result.alternatives;
  doc["power_clamped"] = result.power_clamped;
  doc["power_joint"] = result.power_joint;
  doc["se_diff"] = result.se_diff;
  return doc.dump(2);
}

}  // namespace ppd
