#include "dqgm/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dqgm/bounds.hpp"
#include "dqgm/problems.hpp"
#include "dqgm/rng.hpp"

namespace dqgm::verify {
namespace {

using engines::DqScheme;
using Vec = Eigen::VectorXd;

std::string scheme_name(DqScheme s) {
  switch (s) {
    case DqScheme::gd: return "dq-gd";
    case DqScheme::gd_varying: return "dq-gd-varying";
    case DqScheme::agd: return "dq-agd";
    case DqScheme::hb: return "dq-hb";
  }
  return "?";
}

bounds::Scheme scheme_bounds(DqScheme s) {
  switch (s) {
    case DqScheme::agd: return bounds::Scheme::dq_agd;
    case DqScheme::hb: return bounds::Scheme::dq_hb;
    default: return bounds::Scheme::dq_gd;
  }
}

}  // namespace

Check tracking(DqScheme scheme, int instances, int iterations, std::uint64_t seed) {
  double worst = 0.0;
  Rng pick(seed);
  for (int i = 0; i < instances; ++i) {
    const double kappa = pick.uniform(1.5, 50.0);
    // Rates at or above the lossless threshold, so the run converges and the
    // absolute tolerance is meaningful.
    const auto th = bounds::thresholds(scheme_bounds(scheme), kappa, 4.0);
    const int lowest = std::max(1, static_cast<int>(std::ceil(th.lossless.value_or(1.0))));
    const int rate = lowest + static_cast<int>(pick.uniform() * (13 - lowest));
    const auto f = problems::make_gaussian_ls<double>(32, 16, kappa,
                                                      derive_seed(seed, static_cast<std::uint64_t>(i)));
    auto config = engines::make_dq_config(scheme, f.smoothness, f.convexity, f.distance,
                                          quant::QuantizerSpec(16, rate), 1.0,
                                          engines::Containment::record);
    if (scheme == DqScheme::gd_varying) {
      for (int t = 0; t < iterations; ++t)
        config.stepsizes.push_back(config.hp.eta * (1.0 + 0.1 * std::sin(static_cast<double>(t))));
    }
    engines::DqSession<double, problems::Objective<double>> session(f, f.start, config);
    engines::UnquantizedState<double> twin(f.start);
    const double eta = config.hp.eta;
    const double gamma = config.hp.gamma;
    for (int t = 0; t < iterations; ++t) {
      session.step();
      if (scheme == DqScheme::gd_varying) {
        engines::step_gd(twin, f, config.stepsize(t));
      } else {
        engines::step_unquantized(engines::base_method(scheme), twin, f, config.hp);
      }
      const Vec& e1 = session.worker().error();
      const Vec& e2 = session.worker().previous_error();
      const auto& server = session.server();
      double dev = 0.0;
      switch (scheme) {
        case DqScheme::gd:
        case DqScheme::hb:
          dev = (server.iterate() - (twin.x - eta * e1)).cwiseAbs().maxCoeff();
          break;
        case DqScheme::gd_varying:
          dev = (server.iterate() - (twin.x - config.stepsize(t) * e1)).cwiseAbs().maxCoeff();
          break;
        case DqScheme::agd:
          dev = std::max((server.y_iterate() - (twin.y - eta * e1)).cwiseAbs().maxCoeff(),
                         (server.iterate() - (twin.x - eta * e1 - eta * gamma * (e1 - e2)))
                             .cwiseAbs()
                             .maxCoeff());
          break;
      }
      worst = std::max(worst, dev);
    }
  }
  return {"tracking " + scheme_name(scheme), worst, 1e-10,
          std::to_string(instances) + " instances x " + std::to_string(iterations) + " rounds"};
}

Check containment(int runs, int iterations, double hb_alpha, std::uint64_t seed) {
  Rng pick(seed);
  std::size_t violations = 0;
  const std::array<long, 3> dims{4, 16, 64};
  const std::array<DqScheme, 3> schemes{DqScheme::gd, DqScheme::agd, DqScheme::hb};
  for (int i = 0; i < runs; ++i) {
    const double kappa = pick.uniform(1.5, 50.0);
    const int rate = 1 + static_cast<int>(pick.uniform() * 12.0);
    const long n = dims[static_cast<std::size_t>(pick.uniform() * 3.0)];
    const DqScheme scheme = schemes[static_cast<std::size_t>(i % 3)];
    const auto f = problems::make_gaussian_ls<double>(2 * n, n, kappa,
                                                      derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto config = engines::make_dq_config(scheme, f.smoothness, f.convexity, f.distance,
                                                quant::QuantizerSpec(n, rate), hb_alpha,
                                                engines::Containment::record);
    engines::DqSession<double, problems::Objective<double>> session(f, f.start, config);
    const double floor = 1e-13 * std::max(1.0, f.distance);
    // Same stop rule as the harness: precision floor or divergence.
    const double ceiling = 1e12 * std::max(1.0, f.distance);
    for (int t = 0; t < iterations; ++t) {
      if (session.step().violation) ++violations;
      const double d = (session.server().iterate() - f.optimum).norm();
      if (d < floor || !(d <= ceiling)) break;
    }
  }
  return {"containment", static_cast<double>(violations), 0.0,
          std::to_string(runs) + " runs, hb alpha = " + std::to_string(hb_alpha)};
}

Check worst_case_gd(double kappa, long n, std::uint64_t seed) {
  Rng rng(seed);
  const Vec start = rng.normal_vector(n);
  const double l = 1.0, mu = 1.0 / kappa;
  const auto hp = engines::optimal_hyperparams(l, mu, engines::Method::gd);
  const auto f = problems::make_worst_case_gd<double>(start, l, mu, start.norm(), hp.eta);
  engines::UnquantizedState<double> s(f.start);
  double prev = (s.x - f.optimum).norm();
  double worst = 0.0;
  const double floor = 1e-13 * std::max(1.0, f.distance);
  for (int t = 0; t < 10000 && prev >= floor; ++t) {
    engines::step_unquantized(engines::Method::gd, s, f, hp);
    const double d = (s.x - f.optimum).norm();
    if (d < floor) break;
    worst = std::max(worst, std::abs(d / prev - hp.sigma));
    prev = d;
  }
  return {"worst-case gd kappa=" + std::to_string(kappa) + " n=" + std::to_string(n), worst, 1e-9,
          "sigma_GD = " + std::to_string(hp.sigma)};
}

std::vector<Check> invariant_suite(std::uint64_t seed, int scale) {
  std::vector<Check> out;
  for (auto s : {DqScheme::gd, DqScheme::gd_varying, DqScheme::agd, DqScheme::hb})
    out.push_back(tracking(s, 4 * scale, 200, seed));
  out.push_back(containment(30 * scale, 300, 1.0, seed));
  for (double kappa : {2.0, 4.0, 10.0})
    for (long n : {2L, 8L}) out.push_back(worst_case_gd(kappa, n, seed));
  return out;
}

}  // namespace dqgm::verify
