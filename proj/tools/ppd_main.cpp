// Command-line front end: synthesize panels, run release strategies, sweep
// sensitivities, and reproduce the library's experiments. Outputs land in an
// output directory as CSV/JSON; docs/output-schema.md lists every column.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppd/core.hpp"
#include "ppd/errors.hpp"
#include "ppd/harness.hpp"
#include "ppd/inference.hpp"
#include "ppd/mechanisms.hpp"
#include "ppd/pmf.hpp"
#include "ppd/random.hpp"

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ppd::ValidationError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Reference inference model: uniform prior over a theta grid, Binomial(n)
// data, discrete Laplace release of the count at the given budget.
ppd::GenerativeModel make_count_model(long long n, double epsilon, int grid_points) {
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (grid_points - 1);
  }
  ppd::GenerativeModel model;
  model.sample_prior = [grid](ppd::RandomStream& rng) {
    return grid[static_cast<std::size_t>(rng.below(grid.size()))];
  };
  model.sample_data = [n](double theta, ppd::RandomStream& rng) {
    long long s = 0;
    for (long long i = 0; i < n; ++i) s += rng.bernoulli(theta) ? 1 : 0;
    return s;
  };
  model.mechanism_density = [epsilon](long long y, long long x) {
    return ppd::discrete_laplace_pmf(y - x, epsilon);
  };
  model.mechanism_density_sup = [epsilon](long long) {
    return ppd::discrete_laplace_pmf(0, epsilon);
  };
  model.prior_density = [grid](double) { return 1.0 / static_cast<double>(grid.size()); };
  return model;
}

struct SynthesisArgs {
  std::string config_path;
  std::string input;
  std::string strategy = "postprocess";
  double epsilon = 1.0;
  double delta_z = 2.0;
  int replicates = 100;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  long long counties = 10;
  long long months = 6;
  std::string out_dir = "out";
};

int run_synthesis_command(const SynthesisArgs& args, bool seed_given) {
  ppd::ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = ppd::ExperimentConfig::from_json(slurp(args.config_path));
    if (seed_given) config.seed = args.seed;
  } else {
    config.strategy = ppd::strategy_from_string(args.strategy);
    config.epsilon = args.epsilon;
    config.delta_z = args.delta_z;
    config.replicates = args.replicates;
    config.alpha = args.alpha;
    config.seed = args.seed;
    config.input = args.input;
    config.synth.counties = args.counties;
    config.synth.months = args.months;
  }
  config.validate();
  const ppd::CountPanel panel = config.input.empty()
                                    ? ppd::synth_panel(config.synth.counties, config.synth.months,
                                                       ppd::mix64(config.seed ^ 0x70616e656cULL))
                                    : ppd::ingest_panel(config.input);
  const ppd::SynthesisOutput output = ppd::run_synthesis(config, panel);

  std::ostringstream replicates;
  ppd::replicates_to_csv(replicates, output);
  write_file(fs::path(args.out_dir) / "replicates.csv", replicates.str());
  std::ostringstream metrics;
  ppd::metrics_to_csv(metrics, output.metrics);
  write_file(fs::path(args.out_dir) / "metrics.csv", metrics.str());
  if (config.input.empty()) {
    std::ostringstream panel_csv;
    panel.to_csv(panel_csv);
    write_file(fs::path(args.out_dir) / "synthetic_panel.csv", panel_csv.str());
  }
  for (const std::string& failure : output.metrics.month_failures) {
    std::cerr << "infeasible: " << failure << '\n';
  }
  std::cout << "wrote " << (fs::path(args.out_dir) / "replicates.csv").string() << " and "
            << (fs::path(args.out_dir) / "metrics.csv").string() << '\n';
  return output.metrics.month_failures.empty() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partially private count-panel release toolkit"};
  app.require_subcommand(1);

  // synth: generate a synthetic panel CSV.
  auto* synth = app.add_subcommand("synth", "generate a synthetic count panel");
  long long synth_counties = 10, synth_months = 6;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "out";
  synth->add_option("-J,--counties", synth_counties, "number of counties");
  synth->add_option("-T,--months", synth_months, "number of months");
  synth->add_option("--seed", synth_seed, "random seed")->required();
  synth->add_option("-o,--out-dir", synth_out, "output directory");

  // postprocess: run a synthesis strategy over a panel and report metrics.
  auto* post = app.add_subcommand(
      "postprocess", "synthesize replicates under a strategy and compute metrics");
  SynthesisArgs args;
  post->add_option("--config", args.config_path, "JSON config file");
  post->add_option("--input", args.input, "panel CSV (omit to synthesize one)");
  post->add_option("--strategy", args.strategy,
                   "postprocess | wasserstein-naive | wasserstein-congenial | wasserstein-prior");
  post->add_option("--epsilon", args.epsilon, "privacy budget");
  post->add_option("--delta-z", args.delta_z, "sensitivity bound");
  post->add_option("--replicates", args.replicates, "replicates per month");
  post->add_option("--alpha", args.alpha, "Dirichlet-Multinomial concentration");
  auto* post_seed = post->add_option("--seed", args.seed, "random seed")->required();
  post->add_option("-J,--counties", args.counties, "synthetic county count");
  post->add_option("-T,--months", args.months, "synthetic month count");
  post->add_option("-o,--out-dir", args.out_dir, "output directory");

  // delta-z: sensitivity sweep table.
  auto* dz = app.add_subcommand("delta-z", "tabulate the count sensitivity over (z0, z1)");
  std::vector<long long> dz_n{20};
  int dz_points = 11, dz_grid_steps = 101;
  std::string dz_out = "out";
  dz->add_option("-n,--records", dz_n, "record counts to sweep");
  dz->add_option("--z-points", dz_points, "grid points per z axis");
  dz->add_option("--grid-steps", dz_grid_steps, "inner maximization grid resolution");
  dz->add_option("-o,--out-dir", dz_out, "output directory");

  // infer-rejection / infer-importance on the reference count model.
  auto* rej = app.add_subcommand("infer-rejection",
                                 "posterior draws for a binomial rate from a noisy count");
  long long rej_n = 8, rej_y = 4, rej_draws = 10000;
  double rej_eps = 1.0;
  int rej_grid = 21;
  std::uint64_t rej_seed = 0;
  std::string rej_out = "out";
  rej->add_option("-n,--records", rej_n, "number of records");
  rej->add_option("-y,--observed", rej_y, "observed noisy count");
  rej->add_option("--epsilon", rej_eps, "mechanism budget");
  rej->add_option("--draws", rej_draws, "accepted draws to collect");
  rej->add_option("--grid-points", rej_grid, "prior grid resolution");
  rej->add_option("--seed", rej_seed, "random seed")->required();
  rej->add_option("-o,--out-dir", rej_out, "output directory");

  auto* imp = app.add_subcommand("infer-importance",
                                 "posterior mean for a binomial rate from a noisy count");
  long long imp_n = 8, imp_y = 4, imp_m = 100000;
  double imp_eps = 1.0;
  int imp_grid = 21;
  std::uint64_t imp_seed = 0;
  std::string imp_out = "out";
  imp->add_option("-n,--records", imp_n, "number of records");
  imp->add_option("-y,--observed", imp_y, "observed noisy count");
  imp->add_option("--epsilon", imp_eps, "mechanism budget");
  imp->add_option("-m,--proposals", imp_m, "importance proposals");
  imp->add_option("--grid-points", imp_grid, "prior grid resolution");
  imp->add_option("--seed", imp_seed, "random seed")->required();
  imp->add_option("-o,--out-dir", imp_out, "output directory");

  // experiment: manifold / kng-rate / power studies.
  auto* experiment = app.add_subcommand("experiment", "run a study");
  experiment->require_subcommand(1);
  auto* manifold = experiment->add_subcommand("manifold", "projected versus intrinsic noise");
  int man_d1 = 16, man_d2 = 4, man_reps = 2000;
  long long man_n = 1000;
  double man_eps = 1.0;
  std::uint64_t man_seed = 0;
  std::string man_out = "out";
  manifold->add_option("--d1", man_d1, "ambient dimension");
  manifold->add_option("--d2", man_d2, "subspace dimension");
  manifold->add_option("-n,--records", man_n, "sample size");
  manifold->add_option("--epsilon", man_eps, "budget");
  manifold->add_option("--reps", man_reps, "Monte Carlo repetitions");
  manifold->add_option("--seed", man_seed, "random seed")->required();
  manifold->add_option("-o,--out-dir", man_out, "output directory");

  auto* rate = experiment->add_subcommand("kng-rate", "release error decay across sample sizes");
  std::vector<long long> rate_grid{100, 400, 1600, 6400};
  double rate_eps = 1.0;
  int rate_reps = 500;
  std::uint64_t rate_seed = 0;
  std::string rate_out = "out";
  rate->add_option("-n,--sizes", rate_grid, "sample sizes");
  rate->add_option("--epsilon", rate_eps, "budget");
  rate->add_option("--reps", rate_reps, "repetitions per size");
  rate->add_option("--seed", rate_seed, "random seed")->required();
  rate->add_option("-o,--out-dir", rate_out, "output directory");

  auto* power = experiment->add_subcommand("power", "clamped versus joint test power");
  long long pow_n = 20, pow_lo = 0, pow_hi = 8;
  double pow_theta0 = 0.3, pow_eps = 1.0, pow_alpha = 0.05;
  int pow_reps = 20000;
  std::uint64_t pow_seed = 0;
  std::string pow_out = "out";
  power->add_option("-n,--records", pow_n, "number of records");
  power->add_option("--theta0", pow_theta0, "null success rate");
  power->add_option("--epsilon", pow_eps, "budget");
  power->add_option("--lo", pow_lo, "clamp window lower edge");
  power->add_option("--hi", pow_hi, "clamp window upper edge");
  power->add_option("--alpha", pow_alpha, "test size");
  power->add_option("--reps", pow_reps, "Monte Carlo repetitions");
  power->add_option("--seed", pow_seed, "random seed")->required();
  power->add_option("-o,--out-dir", pow_out, "output directory");

  // validate: schema-check a panel CSV.
  auto* validate = app.add_subcommand("validate", "validate a panel CSV");
  std::string validate_input;
  validate->add_option("--input", validate_input, "panel CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const ppd::CountPanel panel = ppd::synth_panel(synth_counties, synth_months, synth_seed);
      std::ostringstream csv;
      panel.to_csv(csv);
      write_file(fs::path(synth_out) / "synthetic_panel.csv", csv.str());
      std::cout << "wrote " << (fs::path(synth_out) / "synthetic_panel.csv").string() << '\n';
      return 0;
    }
    if (post->parsed()) {
      return run_synthesis_command(args, post_seed->count() > 0);
    }
    if (dz->parsed()) {
      std::vector<double> zs(static_cast<std::size_t>(dz_points));
      for (int i = 0; i < dz_points; ++i) {
        zs[static_cast<std::size_t>(i)] = dz_points > 1 ? static_cast<double>(i) / (dz_points - 1) : 0.0;
      }
      const auto rows = ppd::experiment_delta_z_grid(dz_n, zs, zs, dz_grid_steps);
      std::ostringstream csv;
      ppd::delta_z_grid_to_csv(csv, rows);
      write_file(fs::path(dz_out) / "delta_z_grid.csv", csv.str());
      std::cout << "wrote " << (fs::path(dz_out) / "delta_z_grid.csv").string() << '\n';
      return 0;
    }
    if (rej->parsed()) {
      const ppd::GenerativeModel model = make_count_model(rej_n, rej_eps, rej_grid);
      ppd::RandomStream rng(rej_seed);
      const ppd::RejectionDraws draws = ppd::rejection_posterior(model, rej_y, rej_draws, rng);
      ppd::WeightedPosterior posterior;
      posterior.draws = draws.draws;
      posterior.weights.assign(draws.draws.size(), 1.0 / static_cast<double>(draws.draws.size()));
      std::ostringstream csv;
      ppd::weighted_posterior_to_csv(csv, posterior);
      write_file(fs::path(rej_out) / "posterior_rejection.csv", csv.str());
      std::cout << "acceptance rate " << draws.acceptance_rate << ", wrote "
                << (fs::path(rej_out) / "posterior_rejection.csv").string() << '\n';
      return 0;
    }
    if (imp->parsed()) {
      const ppd::GenerativeModel model = make_count_model(imp_n, imp_eps, imp_grid);
      ppd::RandomStream rng(imp_seed);
      const ppd::ImportanceEstimate estimate = ppd::importance_posterior(
          model, imp_y, imp_m, [](double theta) { return theta; }, rng);
      std::ostringstream csv;
      ppd::weighted_posterior_to_csv(csv, estimate.posterior);
      write_file(fs::path(imp_out) / "posterior_importance.csv", csv.str());
      std::cout << "posterior mean " << estimate.estimate << ", ess "
                << estimate.posterior.ess() << ", wrote "
                << (fs::path(imp_out) / "posterior_importance.csv").string() << '\n';
      return 0;
    }
    if (manifold->parsed()) {
      ppd::RandomStream rng(man_seed);
      const auto result = ppd::experiment_manifold(man_d1, man_d2, man_n, man_eps, man_reps, rng);
      write_file(fs::path(man_out) / "experiment_manifold.json", ppd::manifold_to_json(result));
      std::cout << "wrote " << (fs::path(man_out) / "experiment_manifold.json").string() << '\n';
      return 0;
    }
    if (rate->parsed()) {
      ppd::RandomStream rng(rate_seed);
      const auto result = ppd::experiment_kng_rate(rate_grid, rate_eps, rate_reps, rng);
      write_file(fs::path(rate_out) / "experiment_kng_rate.json", ppd::kng_rate_to_json(result));
      std::cout << "wrote " << (fs::path(rate_out) / "experiment_kng_rate.json").string() << '\n';
      return 0;
    }
    if (power->parsed()) {
      ppd::RandomStream rng(pow_seed);
      std::vector<double> alternatives;
      for (double theta = pow_theta0 + 0.1; theta < 0.95; theta += 0.1) {
        alternatives.push_back(theta);
      }
      const auto result = ppd::experiment_power(pow_n, pow_theta0, pow_eps, pow_lo, pow_hi,
                                                pow_alpha, pow_reps, alternatives, rng);
      write_file(fs::path(pow_out) / "experiment_power.json", ppd::power_to_json(result));
      std::cout << "wrote " << (fs::path(pow_out) / "experiment_power.json").string() << '\n';
      return 0;
    }
    if (validate->parsed()) {
      ppd::ingest_panel(validate_input);
      std::cout << "ok\n";
      return 0;
    }
  } catch (const ppd::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const ppd::InfeasibleConstraintError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const ppd::BudgetExhaustedError& e) {
    std::cerr << "budget exhausted: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
