#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "she/csv.hpp"
#include "she/errors.hpp"
#include "she/experiment.hpp"

namespace {

struct CommonFlags {
  std::optional<std::string> config, preset, lh_coeff, out, sigma;
  std::optional<std::uint64_t> seed;
  std::optional<long> workers;
  std::optional<double> bandwidth;
  std::optional<long long> realizations, points;
};

void add_common(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config, "flat key = value config file");
  app.add_option("--preset", f.preset, "desk or paper");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--workers", f.workers, "worker threads (0: all cores)");
  app.add_option("--bandwidth", f.bandwidth, "kernel bandwidth in u units");
  app.add_option("--lh-coeff", f.lh_coeff, "paper, generator, or a=<real>[,b=<real>]");
  app.add_option("--out", f.out, "output directory (estimate: output file)");
}

she::ExperimentConfig resolve(const CommonFlags& f) {
  auto c = she::load_config(f.config, f.preset);
  if (f.seed) c.master_seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (f.bandwidth) c.bandwidth = *f.bandwidth;
  if (f.lh_coeff) c.lh_coeff = she::LhCoefficients::parse(*f.lh_coeff);
  if (f.out) c.output_dir = *f.out;
  if (f.sigma) c.sigma_id = *f.sigma;
  if (f.realizations) c.n_realizations = *f.realizations;
  if (f.points) c.n_points = *f.points;
  return c;
}

std::vector<std::optional<double>> parse_betas(const std::vector<std::string>& items) {
  std::vector<std::optional<double>> betas;
  for (const auto& s : items) {
    if (s == "white") {
      betas.emplace_back();
      continue;
    }
    try {
      std::size_t used = 0;
      const double b = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      betas.emplace_back(b);
    } catch (const std::logic_error&) {
      throw she::ValidationError("bad beta '" + s + "' (expected white or a number)");
    }
  }
  return betas;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic heat equation: simulation and nonparametric recovery of sigma"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(she::version_string()));
  CommonFlags flags;

  auto* simulate = app.add_subcommand("simulate", "simulate realizations and write datasets");
  add_common(*simulate, flags);
  simulate->add_option("--sigma", flags.sigma, "sigma1..sigma7, zero, or custom:<expr>");
  simulate->add_option("--realizations", flags.realizations);
  simulate->add_option("--points", flags.points, "conditioning points per realization and window");

  auto* estimate = app.add_subcommand("estimate", "fit a kernel regression to one dataset");
  add_common(*estimate, flags);
  std::string dataset;
  std::optional<std::string> est_sigma;
  double est_lipschitz = -1.0, u_min = 0.0, u_max = 4.0;
  she::Index grid_n = 512;
  estimate->add_option("dataset", dataset, "dataset CSV")->required();
  estimate->add_option("--sigma", est_sigma, "truth model (default: from the manifest)");
  estimate->add_option("--sigma-lipschitz", est_lipschitz, "Lipschitz constant for custom models");
  estimate->add_option("--u-min", u_min);
  estimate->add_option("--u-max", u_max);
  estimate->add_option("--grid-n", grid_n);

  auto* table = app.add_subcommand("table", "L1 error matrix over the (h, eps) grid");
  add_common(*table, flags);
  table->add_option("--sigma", flags.sigma, "truth model used for the datasets");

  auto* rates = app.add_subcommand("rates", "normalizer scaling against theoretical exponents");
  add_common(*rates, flags);
  std::vector<std::string> beta_items;
  std::vector<double> h_values;
  std::optional<double> rho;
  rates->add_option("--beta", beta_items, "white and/or Riesz exponents in (0,1)")->delimiter(',');
  rates->add_option("--h-values", h_values, "h values")->delimiter(',');
  rates->add_option("--rho", rho, "eps = h^rho (default: the optimal exponent per beta)");

  auto* shift = app.add_subcommand("shift-demo", "regression under a skewed covariate shift");
  add_common(*shift, flags);
  she::Index shift_n = 2000;
  bool literal = false;
  shift->add_option("--n", shift_n, "number of points");
  shift->add_flag("--literal", literal, "compose the noise scale with y instead of x");

  auto* verify = app.add_subcommand("verify", "run the invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      const auto cfg = resolve(flags);
      const auto rep = she::cmd_simulate(cfg);
      for (const auto& p : rep.dataset_paths) std::cout << "wrote " << p << '\n';
      std::cout << "wrote " << rep.manifest_path << '\n';
      for (const auto& [r, step] : rep.diverged)
        std::cerr << "realization " << r << " diverged at step " << step << '\n';
    } else if (estimate->parsed()) {
      she::EstimateOptions opt;
      opt.dataset = dataset;
      opt.sigma_id = est_sigma;
      opt.sigma_lipschitz = est_lipschitz;
      opt.bandwidth = flags.bandwidth.value_or(0.05);
      opt.u_min = u_min;
      opt.u_max = u_max;
      opt.grid_n = grid_n;
      opt.out = flags.out.value_or("");
      std::cout << "wrote " << she::cmd_estimate(opt) << '\n';
    } else if (table->parsed()) {
      const auto rep = she::cmd_table(resolve(flags));
      she::print_table(std::cout, rep);
      std::cout << "wrote " << rep.path << '\n';
    } else if (rates->parsed()) {
      she::RatesOptions opt;
      if (!beta_items.empty()) opt.betas = parse_betas(beta_items);
      if (!h_values.empty()) opt.hs = h_values;
      opt.rho = rho;
      opt.output_dir = flags.out.value_or("she_out");
      opt.workers = flags.workers.value_or(0);
      const auto rep = she::cmd_rates(opt);
      for (const auto& r : rep.rows)
        if (!r.failure.empty()) std::cerr << "h=" << r.h << ": " << r.failure << '\n';
      std::printf("%-8s %-10s %-12s %-12s %-12s %-12s\n", "beta", "rho", "slope(m^)", "theory",
                  "slope(m_R)", "theory");
      for (const auto& s : rep.summary)
        std::printf("%-8s %-10.6f %-12.6f %-12.6f %-12.6f %-12.6f\n",
                    s.beta ? she::format_double(*s.beta).c_str() : "white", s.rho, s.slope_m_hat,
                    s.theory_m_hat, s.slope_m_riesz, s.theory_m_riesz);
      std::cout << "wrote " << rep.path << "\nwrote " << rep.summary_path << '\n';
    } else if (shift->parsed()) {
      const auto rep = she::cmd_shift_demo(shift_n, flags.seed.value_or(1), literal,
                                           flags.bandwidth.value_or(0.05), flags.out.value_or("she_out"));
      std::cout << "true peaks:";
      for (double x : rep.true_peaks) std::cout << ' ' << x;
      std::cout << "\nfitted peaks:";
      for (double x : rep.fitted_peaks) std::cout << ' ' << x;
      std::cout << "\nmean noise: " << rep.noise_mean << '\n';
      std::cout << "wrote " << rep.points_path << "\nwrote " << rep.curve_path << '\n';
    } else if (verify->parsed()) {
      return she::run_verify(std::cout) ? 0 : 2;
    }
  } catch (const she::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
