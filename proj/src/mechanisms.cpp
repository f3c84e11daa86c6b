#include "ppd/mechanisms.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ppd/errors.hpp"
#include "ppd/postprocess.hpp"

namespace ppd {

namespace {

double norm_value(Norm norm, const std::vector<double>& v) {
  switch (norm) {
    case Norm::l1: {
      double s = 0.0;
      for (double x : v) s += std::abs(x);
      return s;
    }
    case Norm::l2: {
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    }
    case Norm::linf: {
      double s = 0.0;
      for (double x : v) s = std::max(s, std::abs(x));
      return s;
    }
  }
  return 0.0;
}

long long log_uniform_step(long long cap, RandomStream& rng) {
  if (cap <= 1) return 1;
  const double u = rng.uniform01();
  const long long step =
      static_cast<long long>(std::floor(std::exp(u * std::log(static_cast<double>(cap) + 1.0))));
  return std::clamp(step, 1LL, cap);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void BaseMeasure::validate() const {
  if (kind == BaseMeasureKind::prior_congenial) {
    if (!(alpha > 0.0)) {
      throw ValidationError("base measure: prior-congenial requires alpha > 0");
    }
    bool any_positive = false;
    for (double p : prior_counts) {
      if (p < 0.0) throw ValidationError("base measure: negative prior count");
      if (p > 0.0) any_positive = true;
    }
    if (!any_positive) {
      throw ValidationError("base measure: prior-congenial requires a positive prior count");
    }
  }
  if (kind != BaseMeasureKind::naive && total < 0) {
    throw InfeasibleConstraintError("base measure: negative case total admits no release");
  }
}

void MechanismSpec::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("mechanism: epsilon must be positive");
  if (!(sensitivity > 0.0)) throw std::invalid_argument("mechanism: sensitivity must be positive");
  base.validate();
}

double discrete_laplace_log_pmf(long long k, double scale) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("discrete laplace: scale must be positive");
  }
  // log((e^s - 1)/(e^s + 1)) = log(1 - e^-s) - log(1 + e^-s)
  const double em = std::exp(-scale);
  return std::log1p(-em) - std::log1p(em) - scale * static_cast<double>(std::llabs(k));
}

double discrete_laplace_pmf(long long k, double scale) {
  return std::exp(discrete_laplace_log_pmf(k, scale));
}

long long sample_discrete_laplace(double scale, RandomStream& rng) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("discrete laplace: scale must be positive");
  }
  const double q = std::exp(-scale);
  if (q <= 0.0) return 0;
  const long long g1 = rng.geometric(q);
  const long long g2 = rng.geometric(q);
  return g1 - g2;
}

double dm_log_pmf(const std::vector<long long>& y, long long total,
                  const std::vector<double>& alphas) {
  if (y.size() != alphas.size() || y.empty()) {
    throw std::invalid_argument("dm_log_pmf: count and alpha vectors must align");
  }
  long long sum = 0;
  double alpha_total = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] < 0) throw ValidationError("dm_log_pmf: negative count");
    if (!(alphas[j] > 0.0)) throw std::invalid_argument("dm_log_pmf: alphas must be positive");
    sum += y[j];
    alpha_total += alphas[j];
  }
  if (sum != total) {
    throw ValidationError("dm_log_pmf: counts sum to " + std::to_string(sum) + ", expected " +
                          std::to_string(total));
  }
  double log_mass = std::lgamma(alpha_total) - std::lgamma(static_cast<double>(total) + alpha_total) +
                    std::lgamma(static_cast<double>(total) + 1.0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double yj = static_cast<double>(y[j]);
    log_mass += std::lgamma(yj + alphas[j]) - std::lgamma(alphas[j]) - std::lgamma(yj + 1.0);
  }
  return log_mass;
}

ChainResult constrained_chain_sample(const ChainTarget& target_log_density,
                                     std::vector<long long> init_cases,
                                     std::vector<long long> init_deaths,
                                     const ChainConstraints& constraints, long long sweeps,
                                     RandomStream& rng) {
  const std::size_t J = init_cases.size();
  if (J == 0) throw std::invalid_argument("chain: empty state");
  if (constraints.total < 0) {
    throw InfeasibleConstraintError("chain: negative case total admits no state");
  }
  const bool with_deaths = !init_deaths.empty();
  if (with_deaths && init_deaths.size() != J) {
    throw std::invalid_argument("chain: death vector length mismatch");
  }
  long long sum = 0;
  for (std::size_t j = 0; j < J; ++j) {
    if (init_cases[j] < 0) throw std::invalid_argument("chain: negative initial cases");
    sum += init_cases[j];
    if (with_deaths) {
      if (init_deaths[j] < 0 || (constraints.ordering && init_deaths[j] > init_cases[j])) {
        throw std::invalid_argument("chain: initial deaths violate constraints");
      }
    }
  }
  if (sum != constraints.total) {
    throw std::invalid_argument("chain: initial cases sum to " + std::to_string(sum) +
                                ", expected " + std::to_string(constraints.total));
  }

  double log_target = target_log_density(init_cases, init_deaths);
  if (!std::isfinite(log_target)) {
    throw std::invalid_argument("chain: target is not finite at the initial state");
  }

  const long long case_cap =
      std::max(1LL, constraints.total / (2 * static_cast<long long>(J)));
  long long proposed = 0, accepted = 0;

  auto metropolis = [&](double proposal_log_target) {
    ++proposed;
    const double log_ratio = proposal_log_target - log_target;
    if (log_ratio >= 0.0 || std::log(rng.uniform_pos()) < log_ratio) {
      log_target = proposal_log_target;
      ++accepted;
      return true;
    }
    return false;
  };

  for (long long sweep = 0; sweep < sweeps; ++sweep) {
    // Case transfers preserve the total exactly.
    if (J >= 2) {
      for (std::size_t attempt = 0; attempt < J; ++attempt) {
        const std::size_t from = static_cast<std::size_t>(rng.below(J));
        std::size_t to = static_cast<std::size_t>(rng.below(J - 1));
        if (to >= from) ++to;
        const long long delta = log_uniform_step(case_cap, rng);
        const long long floor_from = (with_deaths && constraints.ordering) ? init_deaths[from] : 0;
        if (init_cases[from] - delta < floor_from) {
          ++proposed;  // infeasible, stay
          continue;
        }
        init_cases[from] -= delta;
        init_cases[to] += delta;
        const double proposal = target_log_density(init_cases, init_deaths);
        if (!metropolis(proposal)) {
          init_cases[from] += delta;
          init_cases[to] -= delta;
        }
      }
    }
    if (with_deaths) {
      for (std::size_t attempt = 0; attempt < J; ++attempt) {
        const std::size_t j = static_cast<std::size_t>(rng.below(J));
        long long candidate;
        if (constraints.ordering) {
          // Mix a global resample within [0, cases_j] with a local walk; both
          // kernels are symmetric given the fixed case coordinate.
          if (rng.bernoulli(0.5)) {
            candidate = rng.uniform_int(0, init_cases[j]);
          } else {
            const long long cap = std::max(1LL, init_cases[j] / 8);
            const long long step = log_uniform_step(cap, rng);
            candidate = init_deaths[j] + (rng.bernoulli(0.5) ? step : -step);
          }
          if (candidate < 0 || candidate > init_cases[j]) {
            ++proposed;
            continue;
          }
        } else {
          const long long step = log_uniform_step(8, rng);
          candidate = init_deaths[j] + (rng.bernoulli(0.5) ? step : -step);
          if (candidate < 0) {
            ++proposed;
            continue;
          }
        }
        const long long previous = init_deaths[j];
        init_deaths[j] = candidate;
        const double proposal = target_log_density(init_cases, init_deaths);
        if (!metropolis(proposal)) {
          init_deaths[j] = previous;
        }
      }
    }
  }

  ChainResult out;
  out.cases = std::move(init_cases);
  out.deaths = std::move(init_deaths);
  out.diagnostics.sweeps = sweeps;
  out.diagnostics.acceptance_rate =
      proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  return out;
}

namespace {

Release naive_l1_release(const MechanismSpec& spec, const std::vector<long long>& stat_cases,
                         const std::vector<long long>& stat_deaths, RandomStream& rng) {
  // With an L1 loss over the lattice the joint density factorizes into
  // independent discrete Laplace coordinates at scale epsilon / (2 sigma).
  const double scale = spec.epsilon / (2.0 * spec.sensitivity);
  Release out;
  out.cases.reserve(stat_cases.size());
  for (long long c : stat_cases) out.cases.push_back(c + sample_discrete_laplace(scale, rng));
  out.deaths.reserve(stat_deaths.size());
  for (long long d : stat_deaths) out.deaths.push_back(d + sample_discrete_laplace(scale, rng));
  return out;
}

// Deterministic congenial projection of the statistic: the chain's initial
// state, feasible for every total >= 0.
void congenial_init(const std::vector<long long>& stat_cases,
                    const std::vector<long long>& stat_deaths, long long total,
                    std::vector<long long>* cases, std::vector<long long>* deaths) {
  std::vector<double> c(stat_cases.begin(), stat_cases.end());
  std::vector<double> d(stat_deaths.begin(), stat_deaths.end());
  if (d.empty()) d.assign(c.size(), 0.0);
  const ContinuousCounts cont = project_counts(c, d, static_cast<double>(total));
  const IntegerCounts rounded = round_counts(cont.cases, cont.deaths, total);
  *cases = rounded.cases;
  *deaths = stat_deaths.empty() ? std::vector<long long>{} : rounded.deaths;
}

ChainTarget make_congenial_target(const MechanismSpec& spec,
                                  const std::vector<long long>& stat_cases,
                                  const std::vector<long long>& stat_deaths) {
  std::vector<double> alphas;
  double dm_constant = 0.0;
  if (spec.base.kind == BaseMeasureKind::prior_congenial) {
    if (spec.base.prior_counts.size() != stat_cases.size()) {
      throw std::invalid_argument("mechanism: prior counts must match county count");
    }
    alphas.reserve(spec.base.prior_counts.size());
    // Half a pseudo-count keeps counties with an empty prior month inside the
    // support of the Dirichlet-Multinomial weight.
    double alpha_total = 0.0;
    for (double p : spec.base.prior_counts) {
      const double a = spec.base.alpha * p + 0.5;
      alphas.push_back(a);
      alpha_total += a;
      dm_constant -= std::lgamma(a);
    }
    dm_constant += std::lgamma(alpha_total) -
                   std::lgamma(static_cast<double>(spec.base.total) + alpha_total) +
                   std::lgamma(static_cast<double>(spec.base.total) + 1.0);
  }
  const double rate = spec.epsilon / (2.0 * spec.sensitivity);
  const Norm norm = spec.loss.norm;

  // Chain proposals touch at most two coordinates, so the loss accumulators
  // and the per-county Dirichlet-Multinomial terms are updated by diffing
  // against the previous call. The squared and absolute sums are integer
  // valued, so the incremental updates are exact.
  struct Memo {
    bool primed = false;
    std::vector<long long> cases, deaths;
    double sum_sq = 0.0;
    double sum_abs = 0.0;
    double dm_sum = 0.0;
  };
  auto memo = std::make_shared<Memo>();
  return [memo, alphas, dm_constant, rate, norm, stat_cases, stat_deaths](
             const std::vector<long long>& cases, const std::vector<long long>& deaths) {
    auto county_dm = [&alphas](long long c, std::size_t j) {
      return std::lgamma(static_cast<double>(c) + alphas[j]) -
             std::lgamma(static_cast<double>(c) + 1.0);
    };
    if (!memo->primed || memo->cases.size() != cases.size() ||
        memo->deaths.size() != deaths.size()) {
      memo->sum_sq = memo->sum_abs = memo->dm_sum = 0.0;
      for (std::size_t j = 0; j < cases.size(); ++j) {
        const double d = static_cast<double>(cases[j] - stat_cases[j]);
        memo->sum_sq += d * d;
        memo->sum_abs += std::abs(d);
        if (!alphas.empty()) memo->dm_sum += county_dm(cases[j], j);
      }
      for (std::size_t j = 0; j < deaths.size(); ++j) {
        const double d = static_cast<double>(deaths[j] - stat_deaths[j]);
        memo->sum_sq += d * d;
        memo->sum_abs += std::abs(d);
      }
      memo->cases = cases;
      memo->deaths = deaths;
      memo->primed = true;
    } else {
      for (std::size_t j = 0; j < cases.size(); ++j) {
        if (cases[j] == memo->cases[j]) continue;
        const double old_d = static_cast<double>(memo->cases[j] - stat_cases[j]);
        const double new_d = static_cast<double>(cases[j] - stat_cases[j]);
        memo->sum_sq += new_d * new_d - old_d * old_d;
        memo->sum_abs += std::abs(new_d) - std::abs(old_d);
        if (!alphas.empty()) {
          memo->dm_sum += county_dm(cases[j], j) - county_dm(memo->cases[j], j);
        }
        memo->cases[j] = cases[j];
      }
      for (std::size_t j = 0; j < deaths.size(); ++j) {
        if (deaths[j] == memo->deaths[j]) continue;
        const double old_d = static_cast<double>(memo->deaths[j] - stat_deaths[j]);
        const double new_d = static_cast<double>(deaths[j] - stat_deaths[j]);
        memo->sum_sq += new_d * new_d - old_d * old_d;
        memo->sum_abs += std::abs(new_d) - std::abs(old_d);
        memo->deaths[j] = deaths[j];
      }
    }
    double norm_v = 0.0;
    switch (norm) {
      case Norm::l1:
        norm_v = memo->sum_abs;
        break;
      case Norm::l2:
        norm_v = std::sqrt(memo->sum_sq);
        break;
      case Norm::linf: {
        for (std::size_t j = 0; j < cases.size(); ++j) {
          norm_v = std::max(norm_v, std::abs(static_cast<double>(cases[j] - stat_cases[j])));
        }
        for (std::size_t j = 0; j < deaths.size(); ++j) {
          norm_v = std::max(norm_v, std::abs(static_cast<double>(deaths[j] - stat_deaths[j])));
        }
        break;
      }
    }
    double log_density = -rate * norm_v;
    if (!alphas.empty()) log_density += dm_constant + memo->dm_sum;
    return log_density;
  };
}

}  // namespace

Release wasserstein_exp_mech(const MechanismSpec& spec, const std::vector<long long>& stat_cases,
                             const std::vector<long long>& stat_deaths, RandomStream& rng) {
  spec.validate();
  if (spec.loss.kind != LossKind::norm_of_difference) {
    throw UnsupportedError("wasserstein_exp_mech: loss must be a norm of differences");
  }
  if (!stat_deaths.empty() && stat_deaths.size() != stat_cases.size()) {
    throw std::invalid_argument("wasserstein_exp_mech: death statistic length mismatch");
  }
  if (spec.base.kind == BaseMeasureKind::naive) {
    if (spec.loss.norm != Norm::l1) {
      throw UnsupportedError(
          "wasserstein_exp_mech: the naive base measure is implemented for L1 loss only");
    }
    return naive_l1_release(spec, stat_cases, stat_deaths, rng);
  }

  const long long J = static_cast<long long>(stat_cases.size());
  ChainConstraints constraints{spec.base.total, spec.base.ordering};
  std::vector<long long> cases, deaths;
  congenial_init(stat_cases, stat_deaths, spec.base.total, &cases, &deaths);
  const long long burn = spec.chain.burn_sweeps >= 0 ? spec.chain.burn_sweeps : 50 * J;
  ChainResult result = constrained_chain_sample(make_congenial_target(spec, stat_cases, stat_deaths),
                                                std::move(cases), std::move(deaths), constraints,
                                                burn, rng);
  Release out;
  out.cases = std::move(result.cases);
  out.deaths = std::move(result.deaths);
  out.diagnostics = result.diagnostics;
  return out;
}

std::vector<Release> wasserstein_exp_mech_replicates(const MechanismSpec& spec,
                                                     const std::vector<long long>& stat_cases,
                                                     const std::vector<long long>& stat_deaths,
                                                     int n_replicates, RandomStream& rng) {
  spec.validate();
  if (n_replicates < 1) throw std::invalid_argument("mechanism: need at least one replicate");
  std::vector<Release> out;
  out.reserve(static_cast<std::size_t>(n_replicates));
  if (spec.base.kind == BaseMeasureKind::naive) {
    for (int r = 0; r < n_replicates; ++r) {
      out.push_back(wasserstein_exp_mech(spec, stat_cases, stat_deaths, rng));
    }
    return out;
  }

  const long long J = static_cast<long long>(stat_cases.size());
  const long long burn = spec.chain.burn_sweeps >= 0 ? spec.chain.burn_sweeps : 50 * J;
  const long long thin = spec.chain.thin_sweeps >= 0 ? spec.chain.thin_sweeps : J;
  ChainConstraints constraints{spec.base.total, spec.base.ordering};
  const ChainTarget target = make_congenial_target(spec, stat_cases, stat_deaths);
  std::vector<long long> cases, deaths;
  congenial_init(stat_cases, stat_deaths, spec.base.total, &cases, &deaths);
  ChainResult state = constrained_chain_sample(target, std::move(cases), std::move(deaths),
                                               constraints, burn, rng);
  for (int r = 0; r < n_replicates; ++r) {
    state = constrained_chain_sample(target, std::move(state.cases), std::move(state.deaths),
                                     constraints, std::max(thin, 1LL), rng);
    Release release;
    release.cases = state.cases;
    release.deaths = state.deaths;
    release.diagnostics = state.diagnostics;
    out.push_back(std::move(release));
  }
  return out;
}

std::vector<double> sample_knorm_noise(int dim, Norm k_norm, double scale, RandomStream& rng) {
  if (dim < 1) throw std::invalid_argument("knorm noise: dimension must be positive");
  if (!(scale > 0.0)) throw std::invalid_argument("knorm noise: scale must be positive");
  // Radial component: Gamma(dim, scale), drawn as a sum of exponentials.
  double radius = 0.0;
  for (int i = 0; i < dim; ++i) radius += rng.exponential();
  radius *= scale;

  std::vector<double> direction(static_cast<std::size_t>(dim));
  switch (k_norm) {
    case Norm::l2: {
      double norm_sq = 0.0;
      for (double& v : direction) {
        v = rng.normal();
        norm_sq += v * v;
      }
      const double norm = std::sqrt(norm_sq);
      for (double& v : direction) v /= norm;
      break;
    }
    case Norm::l1: {
      double sum = 0.0;
      for (double& v : direction) {
        v = rng.exponential() * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        sum += std::abs(v);
      }
      for (double& v : direction) v /= sum;
      break;
    }
    case Norm::linf: {
      const std::size_t face = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(dim)));
      for (std::size_t i = 0; i < direction.size(); ++i) {
        direction[i] = 2.0 * rng.uniform01() - 1.0;
      }
      direction[face] = rng.bernoulli(0.5) ? 1.0 : -1.0;
      break;
    }
  }
  for (double& v : direction) v *= radius;
  return direction;
}

Release knorm_gradient_mech(const MechanismSpec& spec, const std::vector<double>& statistic,
                            Norm k_norm, RandomStream& rng) {
  spec.validate();
  if (spec.loss.kind != LossKind::quadratic) {
    throw UnsupportedError("knorm_gradient_mech: loss must be differentiable (quadratic)");
  }
  if (statistic.empty()) throw std::invalid_argument("knorm_gradient_mech: empty statistic");
  if (!(spec.loss.curvature > 0.0)) {
    throw std::invalid_argument("knorm_gradient_mech: curvature must be positive");
  }
  // grad L = curvature (y - m), so the density is a K-norm law centered at m
  // with radial scale 2 sigma / (epsilon curvature).
  const double scale = 2.0 * spec.sensitivity / (spec.epsilon * spec.loss.curvature);
  std::vector<double> noise =
      sample_knorm_noise(static_cast<int>(statistic.size()), k_norm, scale, rng);
  Release out;
  out.values.resize(statistic.size());
  for (std::size_t i = 0; i < statistic.size(); ++i) out.values[i] = statistic[i] + noise[i];
  return out;
}

double knorm_gradient_log_density(
    const MechanismSpec& spec, const std::vector<double>& statistic, Norm k_norm,
    const std::vector<double>& y,
    const std::function<double(const std::vector<double>&)>* sigma_y_hook) {
  if (spec.loss.kind != LossKind::quadratic) {
    throw UnsupportedError("knorm_gradient_log_density: loss must be differentiable (quadratic)");
  }
  if (y.size() != statistic.size()) {
    throw std::invalid_argument("knorm_gradient_log_density: dimension mismatch");
  }
  std::vector<double> grad(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    grad[i] = spec.loss.curvature * (y[i] - statistic[i]);
  }
  const double sigma = sigma_y_hook != nullptr ? (*sigma_y_hook)(y) : spec.sensitivity;
  if (!(sigma > 0.0)) throw NumericalError("knorm_gradient_log_density: nonpositive sensitivity");
  return -spec.epsilon * norm_value(k_norm, grad) / (2.0 * sigma);
}

void releases_to_csv(std::ostream& out, const std::vector<Release>& releases) {
  out << "replicate,county,cases,deaths\n";
  for (std::size_t r = 0; r < releases.size(); ++r) {
    const Release& release = releases[r];
    for (std::size_t j = 0; j < release.cases.size(); ++j) {
      out << r << ',' << j << ',' << release.cases[j] << ','
          << (j < release.deaths.size() ? release.deaths[j] : 0) << '\n';
    }
  }
}

std::string chain_diagnostics_json(const ChainDiagnostics& diag) {
  return std::string("{\"acceptance_rate\":") + format_double(diag.acceptance_rate) +
         ",\"sweeps\":" + std::to_string(diag.sweeps) + "}";
}

}  // namespace ppd
