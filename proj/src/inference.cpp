#include "ppd/inference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "ppd/errors.hpp"
#include "ppd/parallel.hpp"

namespace ppd {

namespace {

constexpr long long kBatchSize = 4096;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void check_model(const GenerativeModel& model, bool need_prior_density) {
  if (!model.sample_prior || !model.sample_data || !model.mechanism_density ||
      !model.mechanism_density_sup) {
    throw std::invalid_argument("inference: model is missing a component");
  }
  if (need_prior_density && !model.prior_density) {
    throw std::invalid_argument("inference: custom proposals need the prior density");
  }
}

}  // namespace

RejectionDraws rejection_posterior(const GenerativeModel& model, long long y, long long n_draws,
                                   RandomStream& rng, long long max_proposals_per_draw) {
  check_model(model, false);
  if (n_draws < 1) throw std::invalid_argument("rejection_posterior: need at least one draw");
  if (max_proposals_per_draw < 1) {
    throw std::invalid_argument("rejection_posterior: nonpositive proposal budget");
  }
  const long long budget = max_proposals_per_draw * n_draws;

  RejectionDraws out;
  long long consumed = 0;
  long long accepted_total = 0;
  std::uint64_t next_batch = 0;
  // Waves of independently seeded batches, merged in batch order: the result
  // is a pure function of the root seed.
  const std::size_t wave = 8;
  while (static_cast<long long>(out.draws.size()) < n_draws) {
    if (consumed >= budget) {
      const double rate =
          consumed > 0 ? static_cast<double>(out.draws.size()) / static_cast<double>(consumed)
                       : 0.0;
      throw BudgetExhaustedError(
          "rejection_posterior: budget of " + std::to_string(budget) + " proposals exhausted with " +
              std::to_string(out.draws.size()) + "/" + std::to_string(n_draws) +
              " draws (acceptance rate " + format_double(rate) + ")",
          static_cast<long long>(out.draws.size()), consumed);
    }
    std::vector<std::vector<double>> batch_accepted(wave);
    parallel_for(wave, [&](std::size_t b) {
      RandomStream stream = rng.split(next_batch + b);
      std::vector<double>& accepted = batch_accepted[b];
      for (long long i = 0; i < kBatchSize; ++i) {
        const double theta = model.sample_prior(stream);
        const long long x = model.sample_data(theta, stream);
        const double density = model.mechanism_density(y, x);
        const double sup = model.mechanism_density_sup(x);
        if (!(sup > 0.0)) {
          throw NumericalError("rejection_posterior: nonpositive mechanism density bound");
        }
        if (stream.uniform01() < density / sup) accepted.push_back(theta);
      }
    });
    next_batch += wave;
    consumed += static_cast<long long>(wave) * kBatchSize;
    for (const auto& accepted : batch_accepted) {
      accepted_total += static_cast<long long>(accepted.size());
      for (double theta : accepted) {
        if (static_cast<long long>(out.draws.size()) < n_draws) out.draws.push_back(theta);
      }
    }
  }
  out.proposals = consumed;
  out.acceptance_rate = static_cast<double>(accepted_total) / static_cast<double>(consumed);
  return out;
}

double WeightedPosterior::ess() const {
  double sum_sq = 0.0;
  for (double w : weights) sum_sq += w * w;
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

void WeightedPosterior::validate() const {
  if (draws.size() != weights.size()) {
    throw ValidationError("weighted posterior: draw and weight lengths differ");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("weighted posterior: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("weighted posterior: weights sum to " + std::to_string(total));
  }
}

ImportanceEstimate importance_posterior(const GenerativeModel& model, long long y, long long m,
                                        const std::function<double(double)>& functional_a,
                                        RandomStream& rng, const Proposal* proposal) {
  check_model(model, proposal != nullptr);
  if (m < 1) throw std::invalid_argument("importance_posterior: need at least one proposal");
  if (!functional_a) throw std::invalid_argument("importance_posterior: missing functional");
  if (proposal != nullptr && (!proposal->sample || !proposal->density)) {
    throw std::invalid_argument("importance_posterior: incomplete proposal");
  }

  std::vector<double> thetas(static_cast<std::size_t>(m));
  std::vector<double> weights(static_cast<std::size_t>(m));
  const std::size_t batches = static_cast<std::size_t>((m + kBatchSize - 1) / kBatchSize);
  parallel_for(batches, [&](std::size_t b) {
    RandomStream stream = rng.split(b);
    const long long lo = static_cast<long long>(b) * kBatchSize;
    const long long hi = std::min<long long>(lo + kBatchSize, m);
    for (long long i = lo; i < hi; ++i) {
      double theta, weight;
      if (proposal != nullptr) {
        theta = proposal->sample(stream);
        const double g = proposal->density(theta);
        if (!(g > 0.0)) {
          throw NumericalError("importance_posterior: proposal density vanished at a draw");
        }
        const long long x = model.sample_data(theta, stream);
        weight = model.mechanism_density(y, x) * model.prior_density(theta) / g;
      } else {
        // Prior proposal: the prior/proposal ratio cancels exactly.
        theta = model.sample_prior(stream);
        const long long x = model.sample_data(theta, stream);
        weight = model.mechanism_density(y, x);
      }
      thetas[static_cast<std::size_t>(i)] = theta;
      weights[static_cast<std::size_t>(i)] = weight;
    }
  });

  double weight_total = 0.0;
  double weighted_a = 0.0;
  for (long long i = 0; i < m; ++i) {
    weight_total += weights[static_cast<std::size_t>(i)];
    weighted_a += weights[static_cast<std::size_t>(i)] * functional_a(thetas[static_cast<std::size_t>(i)]);
  }
  if (!(weight_total > 0.0)) {
    throw DegenerateWeightsError("importance_posterior: all " + std::to_string(m) +
                                 " weights are zero; the proposal misses the posterior support");
  }

  ImportanceEstimate out;
  out.estimate = weighted_a / weight_total;
  out.posterior.draws = std::move(thetas);
  out.posterior.weights = std::move(weights);
  for (double& w : out.posterior.weights) w /= weight_total;
  return out;
}

GridPosterior exhaustive_posterior(const EnumerableModel& model, long long y) {
  if (model.theta_grid.empty() || model.x_values.empty()) {
    throw std::invalid_argument("exhaustive_posterior: empty grid");
  }
  if (model.theta_grid.size() != model.prior_mass.size()) {
    throw std::invalid_argument("exhaustive_posterior: prior mass length mismatch");
  }
  if (model.theta_grid.size() * model.x_values.size() > 1000000) {
    throw UnsupportedError("exhaustive_posterior: grid times data space exceeds 1e6 states");
  }
  GridPosterior out;
  out.grid = model.theta_grid;
  out.mass.resize(model.theta_grid.size());
  double total = 0.0;
  for (std::size_t i = 0; i < model.theta_grid.size(); ++i) {
    double sum = 0.0;
    for (long long x : model.x_values) {
      sum += model.data_mass(model.theta_grid[i], x) * model.mechanism_density(y, x);
    }
    out.mass[i] = model.prior_mass[i] * sum;
    total += out.mass[i];
  }
  if (!(total > 0.0)) {
    throw NumericalError("exhaustive_posterior: posterior has zero total mass");
  }
  for (double& m : out.mass) m /= total;
  return out;
}

void weighted_posterior_to_csv(std::ostream& out, const WeightedPosterior& posterior) {
  out << "draw,theta,weight\n";
  for (std::size_t i = 0; i < posterior.draws.size(); ++i) {
    out << i << ',' << format_double(posterior.draws[i]) << ','
        << format_double(posterior.weights[i]) << '\n';
  }
}

}  // namespace ppd
