#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dqgm/bounds.hpp"
#include "dqgm/harness.hpp"
#include "dqgm/verify.hpp"
#include "dqgm/waterfill.hpp"

namespace {

std::string fmt(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int run_sweep(const std::string& path, const std::string& only, const std::string& csv,
              const std::string& svg, unsigned threads) {
  using namespace dqgm::harness;
  auto configs = load_config(path);
  int ran = 0;
  for (auto& c : configs) {
    if (!only.empty() && c.name != only) continue;
    if (threads) c.threads = threads;
    if (!csv.empty()) c.csv_path = csv;
    if (!svg.empty()) c.svg_path = svg;
    const auto table = run_sweep(c);
    if (c.csv_path.empty()) {
      emit_csv(table, std::cout);
    } else {
      emit_csv(table, c.csv_path);
      std::cerr << c.name << ": wrote " << c.csv_path.string() << "\n";
    }
    if (!c.svg_path.empty()) {
      emit_svg(table, c.svg_path);
      std::cerr << c.name << ": wrote " << c.svg_path.string() << "\n";
    }
    for (const auto& r : table.rows)
      if (r.violations)
        std::cerr << c.name << ": " << name(r.algo) << " R=" << r.rate << ": " << r.violations
                  << " containment violations\n";
    ++ran;
  }
  if (ran == 0) {
    std::cerr << "no experiment named '" << only << "' in " << path << "\n";
    return 1;
  }
  return 0;
}

int print_bounds(double kappa, long n, int rmin, int rmax) {
  using namespace dqgm::bounds;
  const double rho = std::sqrt(static_cast<double>(n));
  std::cout << "# kappa=" << fmt(kappa) << " n=" << n << " rho=" << fmt(rho)
            << " sigma_gd=" << fmt(sigma_gd(kappa)) << " sigma_agd=" << fmt(sigma_agd(kappa))
            << " sigma_hb=" << fmt(sigma_hb(kappa)) << "\n";
  for (Scheme s : {Scheme::dq_gd, Scheme::dq_agd, Scheme::dq_hb}) {
    const auto t = thresholds(s, kappa, rho);
    std::cout << "# " << name(s) << " R1=" << fmt(t.linear)
              << " R2=" << (t.lossless ? fmt(*t.lossless) : std::string("one-step")) << "\n";
  }
  std::cout << "R,dq-gd,nq-gd,dq-agd,dq-hb,converse-gd,converse-gm\n";
  for (int r = rmin; r <= rmax; ++r) {
    std::cout << r;
    for (Scheme s : {Scheme::dq_gd, Scheme::nq_gd, Scheme::dq_agd, Scheme::dq_hb})
      std::cout << ',' << fmt(clip_unit(achievable_rate(s, kappa, r, rho)), 10);
    std::cout << ',' << fmt(converse_curve(ConverseFamily::gradient_descent, kappa, r), 10) << ','
              << fmt(converse_curve(ConverseFamily::gradient_method, kappa, r), 10) << "\n";
  }
  return 0;
}

int run_verify(std::uint64_t seed, int scale) {
  bool ok = true;
  for (const auto& c : dqgm::verify::invariant_suite(seed, scale)) {
    std::cout << (c.pass() ? "PASS " : "FAIL ") << c.name << ": " << fmt(c.value, 4)
              << " (limit " << fmt(c.tolerance, 4) << "; " << c.detail << ")\n";
    ok = ok && c.pass();
  }
  return ok ? 0 : 1;
}

int run_waterfill(const std::vector<double>& ls, double total) {
  const auto a = dqgm::engines::waterfill(ls, total);
  std::cout << "nu = " << fmt(a.water_level, 12) << "\nrates =";
  for (std::size_t k = 0; k < a.rates.size(); ++k) std::cout << (k ? "," : " ") << fmt(a.rates[k], 12);
  std::cout << "\n";
  if (total == std::floor(total)) {
    const auto ints = dqgm::engines::waterfill_integer(ls, static_cast<int>(total));
    std::cout << "integer rates =";
    for (std::size_t k = 0; k < ints.size(); ++k) std::cout << (k ? "," : " ") << ints[k];
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially quantized gradient methods: sweeps, bounds and checks"};
  app.require_subcommand(1);

  std::string config, only, csv, svg;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "run the experiments in a config file");
  sweep->add_option("config", config, "INI config file")->required();
  sweep->add_option("--experiment", only, "run only this [section]");
  sweep->add_option("--csv", csv, "override the CSV output path");
  sweep->add_option("--svg", svg, "override the SVG output path");
  sweep->add_option("--threads", threads, "worker threads (0 = all cores)");

  double kappa = 4.0;
  long n = 1;
  int rmin = 1, rmax = 10;
  auto* bnd = app.add_subcommand("bounds", "print contraction-factor curves");
  bnd->add_option("--kappa", kappa, "condition number")->required()->check(CLI::Range(1.0, 1e300));
  bnd->add_option("--n", n, "dimension")->check(CLI::PositiveNumber);
  bnd->add_option("--rmin", rmin, "smallest rate")->check(CLI::Range(1, 52));
  bnd->add_option("--rmax", rmax, "largest rate")->check(CLI::Range(1, 52));

  std::uint64_t seed = 1;
  int scale = 1;
  auto* ver = app.add_subcommand("verify", "run the invariant checks");
  ver->add_option("--seed", seed, "random seed");
  ver->add_option("--scale", scale, "multiplier on the number of random instances")
      ->check(CLI::PositiveNumber);

  std::vector<double> ls;
  double total = 0.0;
  auto* wf = app.add_subcommand("waterfill", "rate allocation across workers");
  wf->add_option("--L", ls, "smoothness constants L_k")->required()->delimiter(',');
  wf->add_option("--R", total, "total rate")->required()->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) return run_sweep(config, only, csv, svg, threads);
    if (*bnd) {
      if (rmax < rmin) throw std::invalid_argument("--rmax must be >= --rmin");
      return print_bounds(kappa, n, rmin, rmax);
    }
    if (*ver) return run_verify(seed, scale);
    if (*wf) return run_waterfill(ls, total);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
