#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "ppd/random.hpp"

namespace ppd {

// Generative model conditioned on the realized public information: the
// samplers and densities below are all "given Z = z". The mechanism density
// may be unnormalized, but mechanism_density(y, x) <= mechanism_density_sup(x)
// must hold for every y; acceptance probabilities are invariant to common
// rescaling of the pair. The sup is required analytically (for the discrete
// Laplace mechanism it is the mass at zero displacement).
struct GenerativeModel {
  std::function<double(RandomStream&)> sample_prior;                  // theta ~ pi(theta | z)
  std::function<long long(double theta, RandomStream&)> sample_data;  // X ~ pi(. | theta, z)
  std::function<double(long long y, long long x)> mechanism_density;  // pi(y | x, z), unnormalized
  std::function<double(long long x)> mechanism_density_sup;           // sup_y pi(y | x, z)
  std::function<double(double theta)> prior_density;  // needed for non-prior proposals
};

struct RejectionDraws {
  std::vector<double> draws;
  long long proposals = 0;
  double acceptance_rate = 0.0;
};

// Exact posterior sampling: propose theta* from the prior and X* from the
// data model, accept with probability pi(y | X*, z) / sup_y pi(y | X*, z).
// Accepted values are exact draws from theta | Y = y, Z = z. Proposals run in
// seeded batches with a deterministic merge, so results do not depend on
// thread scheduling. Exhausting the proposal budget raises
// BudgetExhaustedError carrying the observed acceptance rate.
//
// Both samplers derive their batch streams from the passed stream's seed;
// give each sampler invocation its own stream (split a root per call) so
// batches never share a seed across operations.
RejectionDraws rejection_posterior(const GenerativeModel& model, long long y, long long n_draws,
                                   RandomStream& rng, long long max_proposals_per_draw = 1000000);

struct WeightedPosterior {
  std::vector<double> draws;
  std::vector<double> weights;  // normalized to sum 1 within 1e-12

  double ess() const;  // 1 / sum of squared normalized weights
  void validate() const;
};

struct Proposal {
  std::function<double(RandomStream&)> sample;
  std::function<double(double theta)> density;
};

struct ImportanceEstimate {
  double estimate = 0.0;
  WeightedPosterior posterior;
};

// Self-normalized importance sampling for E[a(theta) | Y, Z] with weights
// w_j = pi(y | X_j, z) pi(theta_j | z) / g(theta_j). With no proposal the
// prior is used and the weights reduce exactly to the mechanism densities.
ImportanceEstimate importance_posterior(const GenerativeModel& model, long long y, long long m,
                                        const std::function<double(double)>& functional_a,
                                        RandomStream& rng, const Proposal* proposal = nullptr);

// Finite model for exhaustive posterior computation.
struct EnumerableModel {
  std::vector<double> theta_grid;
  std::vector<double> prior_mass;  // same length as theta_grid; any positive scale
  std::function<double(double theta, long long x)> data_mass;
  std::vector<long long> x_values;
  std::function<double(long long y, long long x)> mechanism_density;
};

struct GridPosterior {
  std::vector<double> grid;
  std::vector<double> mass;  // normalized exactly
};

// pi(theta | y, z) proportional to sum_x pi(theta | z) pi(x | theta, z)
// pi(y | x, z) by full enumeration. Refuses |grid| * |X| > 1e6.
GridPosterior exhaustive_posterior(const EnumerableModel& model, long long y);

// CSV schema: draw,theta,weight.
void weighted_posterior_to_csv(std::ostream& out, const WeightedPosterior& posterior);

}  // namespace ppd
