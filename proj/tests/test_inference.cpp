#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "ppd/errors.hpp"
#include "ppd/inference.hpp"
#include "ppd/mechanisms.hpp"
#include "ppd/random.hpp"
#include "test_support.hpp"

using namespace ppd;

namespace {

std::vector<double> uniform_grid(int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  }
  return grid;
}

double binomial_mass(long long n, double theta, long long x) {
  if (x < 0 || x > n) return 0.0;
  if (theta <= 0.0) return x == 0 ? 1.0 : 0.0;
  if (theta >= 1.0) return x == n ? 1.0 : 0.0;
  const double nd = static_cast<double>(n), xd = static_cast<double>(x);
  return std::exp(std::lgamma(nd + 1.0) - std::lgamma(xd + 1.0) - std::lgamma(nd - xd + 1.0) +
                  xd * std::log(theta) + (nd - xd) * std::log1p(-theta));
}

// Grid prior, Binomial(n) data, discrete Laplace release of the count.
GenerativeModel count_model(long long n, double epsilon, const std::vector<double>& grid) {
  GenerativeModel model;
  model.sample_prior = [grid](RandomStream& rng) {
    return grid[static_cast<std::size_t>(rng.below(grid.size()))];
  };
  model.sample_data = [n](double theta, RandomStream& rng) {
    long long s = 0;
    for (long long i = 0; i < n; ++i) s += rng.bernoulli(theta) ? 1 : 0;
    return s;
  };
  model.mechanism_density = [epsilon](long long y, long long x) {
    return discrete_laplace_pmf(y - x, epsilon);
  };
  model.mechanism_density_sup = [epsilon](long long) { return discrete_laplace_pmf(0, epsilon); };
  model.prior_density = [grid](double) { return 1.0 / static_cast<double>(grid.size()); };
  return model;
}

EnumerableModel count_oracle_model(long long n, double epsilon, const std::vector<double>& grid) {
  EnumerableModel model;
  model.theta_grid = grid;
  model.prior_mass.assign(grid.size(), 1.0);
  model.data_mass = [n](double theta, long long x) { return binomial_mass(n, theta, x); };
  for (long long x = 0; x <= n; ++x) model.x_values.push_back(x);
  model.mechanism_density = [epsilon](long long y, long long x) {
    return discrete_laplace_pmf(y - x, epsilon);
  };
  return model;
}

std::vector<double> empirical_grid_mass(const std::vector<double>& draws,
                                        const std::vector<double>& grid) {
  std::vector<double> mass(grid.size(), 0.0);
  for (double draw : draws) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(draw - grid[i]) < 1e-9) {
        mass[i] += 1.0;
        break;
      }
    }
  }
  for (double& m : mass) m /= static_cast<double>(draws.size());
  return mass;
}

}  // namespace

TEST_CASE("exhaustive posterior oracle") {
  SUBCASE("flat mechanism returns the prior") {
    EnumerableModel model = count_oracle_model(4, 1.0, uniform_grid(5));
    model.mechanism_density = [](long long, long long) { return 0.5; };
    const GridPosterior posterior = exhaustive_posterior(model, 2);
    for (double m : posterior.mass) CHECK(m == doctest::Approx(0.2).epsilon(1e-12));
  }
  SUBCASE("degenerate mechanism keeps only consistent states") {
    // Two states, one feasible x per theta: posterior follows the indicator.
    EnumerableModel model;
    model.theta_grid = {0.25, 0.75};
    model.prior_mass = {1.0, 1.0};
    model.x_values = {0, 1};
    model.data_mass = [](double theta, long long x) {
      return x == 1 ? theta : 1.0 - theta;
    };
    model.mechanism_density = [](long long y, long long x) { return y == x ? 1.0 : 0.0; };
    const GridPosterior posterior = exhaustive_posterior(model, 1);
    // Hand check: masses proportional to theta -> (0.25, 0.75).
    CHECK(posterior.mass[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(posterior.mass[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("normalization and refusal") {
    const GridPosterior posterior = exhaustive_posterior(count_oracle_model(8, 1.0, uniform_grid(21)), 4);
    double total = 0.0;
    for (double m : posterior.mass) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    EnumerableModel oversized = count_oracle_model(8, 1.0, uniform_grid(21));
    oversized.theta_grid.assign(2000, 0.5);
    oversized.prior_mass.assign(2000, 1.0);
    oversized.x_values.assign(2000, 0);
    CHECK_THROWS_AS(exhaustive_posterior(oversized, 0), UnsupportedError);
  }
}

TEST_CASE("rejection sampler draws from the posterior") {
  const std::vector<double> grid = uniform_grid(21);
  const GenerativeModel model = count_model(8, 1.0, grid);
  RandomStream rng(2024);
  const RejectionDraws draws = rejection_posterior(model, 5, 20000, rng);
  CHECK(draws.acceptance_rate > 0.01);
  const GridPosterior oracle = exhaustive_posterior(count_oracle_model(8, 1.0, grid), 5);
  const std::vector<double> empirical = empirical_grid_mass(draws.draws, grid);
  CHECK(ppd_test::tv_distance(empirical, oracle.mass) <= 0.03);
}

TEST_CASE("degenerate mechanism accepts exactly the consistent proposals") {
  const std::vector<double> grid = uniform_grid(9);
  GenerativeModel model = count_model(4, 1.0, grid);
  model.mechanism_density = [](long long y, long long x) { return y == x ? 1.0 : 0.0; };
  model.mechanism_density_sup = [](long long) { return 1.0; };
  RandomStream rng(55);
  const RejectionDraws draws = rejection_posterior(model, 4, 5000, rng);
  // Observed count 4 of 4: theta = 0 is impossible, high rates dominate.
  EnumerableModel oracle_model = count_oracle_model(4, 1.0, grid);
  oracle_model.mechanism_density = [](long long y, long long x) { return y == x ? 1.0 : 0.0; };
  const GridPosterior oracle = exhaustive_posterior(oracle_model, 4);
  const std::vector<double> empirical = empirical_grid_mass(draws.draws, grid);
  CHECK(ppd_test::tv_distance(empirical, oracle.mass) <= 0.03);
  CHECK(empirical[0] == 0.0);
}

TEST_CASE("flat mechanism density returns the prior") {
  const std::vector<double> grid = uniform_grid(5);
  GenerativeModel model = count_model(4, 1.0, grid);
  model.mechanism_density = [](long long, long long) { return 0.7; };
  model.mechanism_density_sup = [](long long) { return 0.7; };
  RandomStream rng(66);
  const RejectionDraws draws = rejection_posterior(model, 2, 20000, rng);
  CHECK(draws.acceptance_rate == doctest::Approx(1.0));
  const std::vector<double> empirical = empirical_grid_mass(draws.draws, grid);
  for (double m : empirical) CHECK(m == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("acceptance is invariant to rescaling the unnormalized density") {
  const std::vector<double> grid = uniform_grid(21);
  GenerativeModel scaled = count_model(8, 1.0, grid);
  const auto base_density = scaled.mechanism_density;
  const auto base_sup = scaled.mechanism_density_sup;
  scaled.mechanism_density = [base_density](long long y, long long x) {
    return 5.0 * base_density(y, x);
  };
  scaled.mechanism_density_sup = [base_sup](long long x) { return 5.0 * base_sup(x); };
  RandomStream rng_a(31337), rng_b(31337);
  const RejectionDraws plain = rejection_posterior(count_model(8, 1.0, grid), 5, 500, rng_a);
  const RejectionDraws rescaled = rejection_posterior(scaled, 5, 500, rng_b);
  CHECK(plain.draws == rescaled.draws);
  CHECK(plain.proposals == rescaled.proposals);
}

TEST_CASE("proposal budget exhaustion surfaces the acceptance rate") {
  const std::vector<double> grid = uniform_grid(5);
  GenerativeModel model = count_model(4, 1.0, grid);
  model.mechanism_density = [](long long, long long) { return 1e-12; };
  model.mechanism_density_sup = [](long long) { return 1.0; };
  RandomStream rng(9);
  CHECK_THROWS_AS(rejection_posterior(model, 2, 0, rng), std::invalid_argument);
  try {
    rejection_posterior(model, 2, 10, rng, 100);
    FAIL("expected budget exhaustion");
  } catch (const BudgetExhaustedError& e) {
    CHECK(e.proposed() >= 1000);
    CHECK(e.accepted() < 10);
    CHECK(e.acceptance_rate() < 0.01);
    CHECK(doctest::Contains("acceptance rate").checkWith(e.what()));
  }
}

TEST_CASE("importance sampler") {
  const std::vector<double> grid = uniform_grid(21);
  const GenerativeModel model = count_model(8, 1.0, grid);

  SUBCASE("constant functional is exactly one") {
    RandomStream rng(101);
    const ImportanceEstimate out =
        importance_posterior(model, 5, 4000, [](double) { return 1.0; }, rng);
    CHECK(out.estimate == 1.0);
    out.posterior.validate();
  }
  SUBCASE("weights are normalized and the effective size is bounded") {
    RandomStream rng(103);
    const ImportanceEstimate out =
        importance_posterior(model, 5, 5000, [](double theta) { return theta; }, rng);
    out.posterior.validate();
    CHECK(out.posterior.ess() <= 5000.0 + 1e-9);
    CHECK(out.posterior.ess() > 100.0);
  }
  SUBCASE("flat weights give an effective size of exactly m") {
    GenerativeModel flat = model;
    flat.mechanism_density = [](long long, long long) { return 0.3; };
    flat.mechanism_density_sup = [](long long) { return 0.3; };
    RandomStream rng(107);
    const ImportanceEstimate out =
        importance_posterior(flat, 5, 8, [](double theta) { return theta; }, rng);
    CHECK(out.posterior.ess() == 8.0);
  }
  SUBCASE("estimate agrees with the exhaustive posterior mean") {
    RandomStream rng(109);
    const ImportanceEstimate out =
        importance_posterior(model, 5, 100000, [](double theta) { return theta; }, rng);
    const GridPosterior oracle = exhaustive_posterior(count_oracle_model(8, 1.0, grid), 5);
    double oracle_mean = 0.0;
    for (std::size_t i = 0; i < oracle.grid.size(); ++i) {
      oracle_mean += oracle.grid[i] * oracle.mass[i];
    }
    CHECK(out.estimate == doctest::Approx(oracle_mean).epsilon(0.02));
  }
  SUBCASE("explicit proposal equal to the prior matches the built-in path") {
    RandomStream rng(113);
    Proposal proposal;
    proposal.sample = [grid](RandomStream& r) {
      return grid[static_cast<std::size_t>(r.below(grid.size()))];
    };
    proposal.density = [&grid](double) { return 1.0 / static_cast<double>(grid.size()); };
    const ImportanceEstimate out = importance_posterior(
        model, 5, 20000, [](double theta) { return theta; }, rng, &proposal);
    const GridPosterior oracle = exhaustive_posterior(count_oracle_model(8, 1.0, grid), 5);
    double oracle_mean = 0.0;
    for (std::size_t i = 0; i < oracle.grid.size(); ++i) {
      oracle_mean += oracle.grid[i] * oracle.mass[i];
    }
    CHECK(out.estimate == doctest::Approx(oracle_mean).epsilon(0.05));
  }
  SUBCASE("all-zero weights raise a degenerate-weights error") {
    GenerativeModel dead = model;
    dead.mechanism_density = [](long long, long long) { return 0.0; };
    RandomStream rng(127);
    CHECK_THROWS_AS(
        importance_posterior(dead, 5, 100, [](double theta) { return theta; }, rng),
        DegenerateWeightsError);
  }
}

TEST_CASE("mechanism density never exceeds its stated bound") {
  // Random probing of the model invariant the samplers rely on.
  const GenerativeModel model = count_model(8, 1.0, uniform_grid(21));
  RandomStream rng(17);
  for (int probe = 0; probe < 1000; ++probe) {
    const long long x = rng.uniform_int(0, 8);
    const long long y = rng.uniform_int(-30, 38);
    CHECK(model.mechanism_density(y, x) <= model.mechanism_density_sup(x) + 1e-15);
  }
}

TEST_CASE("weighted posterior validation and serialization") {
  WeightedPosterior posterior;
  posterior.draws = {0.1, 0.9};
  posterior.weights = {0.25, 0.75};
  CHECK_NOTHROW(posterior.validate());
  CHECK(posterior.ess() == doctest::Approx(1.0 / (0.0625 + 0.5625)));
  std::ostringstream out;
  weighted_posterior_to_csv(out, posterior);
  CHECK(out.str() == "draw,theta,weight\n0,0.1,0.25\n1,0.9,0.75\n");

  posterior.weights = {0.5, 0.6};
  CHECK_THROWS_AS(posterior.validate(), ValidationError);
}
