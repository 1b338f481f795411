#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>

#include "dqgm/bounds.hpp"
#include "dqgm/rng.hpp"

using namespace dqgm;
using namespace dqgm::bounds;

namespace {

double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double glo = g(lo);
  REQUIRE(glo * g(hi) < 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Spectral radius of the heavy-ball iteration on a quadratic with curvature lambda.
double hb_radius(double eta, double gamma, double lambda) {
  Eigen::Matrix2d m;
  m << 1.0 + gamma - eta * lambda, -gamma, 1.0, 0.0;
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

// Spectral radius of Nesterov's iteration in (y_t, y_{t-1}) coordinates.
double agd_radius(double eta, double gamma, double lambda) {
  const double c = 1.0 - eta * lambda;
  Eigen::Matrix2d m;
  m << (1.0 + gamma) * c, -gamma * c, 1.0, 0.0;
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

// Direct iteration of r_t = sigma^t C + a((1 + gamma) r_{t-1} + gamma r_{t-2}).
std::vector<double> iterate_recursion(double lead, double sigma, double gamma, double a, long T) {
  std::vector<double> r;
  double r1 = 0.0, r2 = 0.0;
  for (long t = 0; t <= T; ++t) {
    const double v = std::pow(sigma, static_cast<double>(t)) * lead + a * ((1.0 + gamma) * r1 + gamma * r2);
    r.push_back(v);
    r2 = r1;
    r1 = v;
  }
  return r;
}

}  // namespace

TEST_CASE("gradient descent factor is the worst |1 - eta lambda| over the spectrum") {
  for (double kappa : {1.0, 1.5, 5.0, 100.0, 1e4}) {
    const double L = 3.0, mu = L / kappa, eta = 2.0 / (L + mu);
    const double worst = std::max(std::abs(1.0 - eta * mu), std::abs(1.0 - eta * L));
    CHECK(sigma_gd(kappa) == doctest::Approx(worst).epsilon(1e-13));
  }
}

TEST_CASE("heavy-ball factor equals the spectral radius across the spectrum") {
  for (double kappa : {2.0, 9.0, 25.0, 400.0}) {
    const double L = 1.0, mu = 1.0 / kappa;
    const double eta = std::pow(2.0 / (std::sqrt(L) + std::sqrt(mu)), 2);
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i)
      worst = std::max(worst, hb_radius(eta, gamma_hb(kappa), mu + (L - mu) * i / 200.0));
    CHECK(worst == doctest::Approx(sigma_hb(kappa)).epsilon(1e-6));
  }
}

TEST_CASE("accelerated factor dominates the iteration's spectral radius") {
  for (double kappa : {2.0, 9.0, 25.0, 400.0}) {
    const double L = 1.0, mu = 1.0 / kappa;
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i)
      worst = std::max(worst, agd_radius(1.0 / L, gamma_agd(kappa), mu + (L - mu) * i / 200.0));
    CHECK(worst <= sigma_agd(kappa) + 1e-12);
    CHECK(sigma_agd(kappa) * sigma_agd(kappa) == doctest::Approx(1.0 - 1.0 / std::sqrt(kappa)));
  }
}

TEST_CASE("phi roots solve the characteristic polynomial") {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const double gamma = rng.uniform(0.0, 1.0);
    const double a = feedback(rng.uniform(1.0, 10.0), rng.uniform(0.0, 30.0));
    const auto r = phi_roots(gamma, a);
    for (double root : {r.plus, r.minus}) {
      const double scale = root * root + std::abs(root) * a * (1.0 + gamma) + a * gamma;
      CHECK(std::abs(char_poly(root, gamma, a)) <= 1e-12 * scale);
    }
    CHECK(r.plus + r.minus == doctest::Approx(a * (1.0 + gamma)).epsilon(1e-12));
    CHECK(r.plus * r.minus == doctest::Approx(-a * gamma).epsilon(1e-12));
    CHECK(a * phi(gamma, a) == doctest::Approx(r.plus).epsilon(1e-12));
    CHECK(r.minus <= 0.0);
  }
}

TEST_CASE("lossless threshold is where a phi meets sigma") {
  for (double kappa : {1.5, 3.0, 25.0, 200.0}) {
    for (Scheme s : {Scheme::dq_gd, Scheme::dq_agd, Scheme::dq_hb}) {
      const double rho = 4.0, sig = sigma(s, kappa), gam = momentum(s, kappa);
      const double r2 = bisect([&](double R) { return feedback(rho, R) * phi(gam, feedback(rho, R)) - sig; },
                               -10.0, 60.0);
      CHECK(*thresholds(s, kappa, rho).lossless == doctest::Approx(r2).epsilon(1e-9));
      const double r1 = bisect([&](double R) { return feedback(rho, R) * phi(gam, feedback(rho, R)) - 1.0; },
                               -10.0, 60.0);
      CHECK(thresholds(s, kappa, rho).linear == doctest::Approx(r1).epsilon(1e-9));
    }
  }
}

TEST_CASE("rates at or above R2 keep the unquantized factor") {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const double kappa = std::exp(rng.uniform(0.01, 6.0));
    const double R = rng.uniform(0.0, 20.0), rho = std::sqrt(rng.uniform(1.0, 128.0));
    for (Scheme s : {Scheme::dq_gd, Scheme::dq_agd, Scheme::dq_hb}) {
      const double r2 = *thresholds(s, kappa, rho).lossless;
      if (std::abs(R - r2) < 1e-9) continue;
      const bool lossless = achievable_rate(s, kappa, R, rho) == sigma(s, kappa);
      CHECK(lossless == (R > r2));
    }
  }
}

TEST_CASE("kappa = 1 has no lossless threshold") {
  const auto t = thresholds(Scheme::dq_gd, 1.0, 4.0);
  CHECK(t.one_step());
  CHECK(t.linear == 2.0);
  CHECK_THROWS_AS(thresholds(4.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(achievable_rate(Scheme::dq_gd, 0.5, 3.0, 4.0), std::invalid_argument);
}

TEST_CASE("accelerated methods overtake gradient descent near the stated condition numbers") {
  const double rho = 4.0;
  const double kstar = bisect(
      [&](double k) { return *thresholds(Scheme::dq_agd, k, rho).lossless - *thresholds(Scheme::dq_gd, k, rho).lossless; },
      1.01, 100.0);
  CHECK(kstar > 2.0);
  CHECK(kstar < 2.4);
}

TEST_CASE("accelerated and plain factors cross at the root of a cubic in sqrt(kappa)") {
  // With s = sqrt(kappa), sigma_AGD = sigma_GD reduces to s^3 - 3 s^2 - s - 1 = 0.
  Eigen::Matrix3d companion;
  companion << 3.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  double s = 0.0;
  for (const auto& e : companion.eigenvalues())
    if (std::abs(e.imag()) < 1e-12) s = std::max(s, e.real());
  const double crossing = bisect([](double k) { return sigma_agd(k) - sigma_gd(k); }, 1.01, 1000.0);
  CHECK(crossing == doctest::Approx(s * s).epsilon(1e-10));
  CHECK(crossing == doctest::Approx(11.4445).epsilon(1e-5));
  CHECK(sigma_agd(crossing - 0.1) > sigma_gd(crossing - 0.1));
  CHECK(sigma_agd(crossing + 0.1) < sigma_gd(crossing + 0.1));
}

TEST_CASE("heavy ball has the smallest unquantized factor") {
  for (double kappa = 1.01; kappa < 1e5; kappa *= 1.1) {
    CHECK(sigma_hb(kappa) < sigma_gd(kappa));
    CHECK(sigma_hb(kappa) < sigma_agd(kappa));
    for (double rho : {1.0, 4.0, 8.0}) {
      CHECK(*thresholds(Scheme::dq_hb, kappa, rho).lossless >= *thresholds(Scheme::dq_gd, kappa, rho).lossless);
      CHECK(*thresholds(Scheme::dq_hb, kappa, rho).lossless >= *thresholds(Scheme::dq_agd, kappa, rho).lossless);
    }
  }
}

TEST_CASE("converse bound never exceeds the achievable factor") {
  for (double kappa = 1.0; kappa < 1e4; kappa *= 1.37) {
    for (double R = 0.0; R <= 20.0; R += 0.25) {
      for (long n : {1, 4, 16, 64, 1024}) {
        const double rho = std::sqrt(static_cast<double>(n));
        for (Scheme s : {Scheme::dq_gd, Scheme::nq_gd, Scheme::dq_agd, Scheme::dq_hb}) {
          CHECK(converse_curve(converse_family(s), kappa, R) <=
                achievable_rate(s, kappa, R, rho) * (1.0 + 1e-14));
        }
      }
    }
  }
}

TEST_CASE("naive quantization is never better than differential") {
  for (double kappa : {1.0, 2.0, 5.0, 50.0})
    for (double R = 0.0; R <= 16.0; R += 0.5)
      CHECK(achievable_rate(Scheme::nq_gd, kappa, R, 4.0) >= achievable_rate(Scheme::dq_gd, kappa, R, 4.0));
}

TEST_CASE("range recursion closed form matches direct iteration") {
  Rng rng(4);
  int checked = 0;
  while (checked < 300) {
    const double kappa = std::exp(rng.uniform(0.5, 6.0));
    const Scheme s = checked % 2 ? Scheme::agd : Scheme::hb;
    const double sig = sigma(s, kappa), gam = momentum(s, kappa);
    const double a = feedback(4.0, rng.uniform(1.0, 20.0));
    // Skip near-resonant draws where the closed form is ill-conditioned.
    if (std::abs(a * phi(gam, a) - sig) < 0.05 * sig) continue;
    const double lead = rng.uniform(0.1, 10.0);
    const auto closed = solve_range_recursion(lead, sig, gam, a);
    const auto direct = iterate_recursion(lead, sig, gam, a, 200);
    for (long t = 0; t <= 200; ++t) {
      const double ref = direct[static_cast<std::size_t>(t)];
      CHECK(std::abs(closed(t) - ref) <= 1e-9 * std::max(std::abs(ref), 1e-300) + 1e-300);
    }
    const double scale = std::abs(closed.c0) + std::abs(closed.c_plus) + std::abs(closed.c_minus);
    CHECK(std::abs(closed(-1)) <= 1e-12 * scale / (a * a));
    CHECK(std::abs(closed(-2)) <= 1e-12 * scale / (a * a * a * a));
    ++checked;
  }
}

TEST_CASE("first-order range recursion without momentum") {
  const auto closed = solve_range_recursion(2.0, 0.5, 0.0, 0.25);
  const auto direct = iterate_recursion(2.0, 0.5, 0.0, 0.25, 40);
  for (long t = 0; t <= 40; ++t) CHECK(closed(t) == doctest::Approx(direct[static_cast<std::size_t>(t)]).epsilon(1e-12));
  CHECK(std::isinf(solve_range_recursion(1.0, 0.5, 0.0, 0.5)(3)));
}

TEST_CASE("b_t matches its geometric-sum definition") {
  CHECK(dq_gd_b(-1, 0.5, 0.25) == 0.0);
  CHECK(dq_gd_b(7, 0.5, 0.5) == 8.0);
  CHECK(dq_gd_b(7, 0.5, 0.5 * (1.0 + 1e-14)) == 8.0);
  CHECK(dq_gd_b(3, 0.5, 0.25) == 1.0);
  CHECK(dq_gd_b(3, 0.25, 0.5) == 2.0);
  // sum_{j=0}^{t} s^{t-j} a^{j+1} / max(s, a)^{t} <= b_t
  for (double s : {0.2, 0.5, 0.9})
    for (double a : {0.1, 0.45, 0.95}) {
      for (long t = 0; t < 50; ++t) {
        double sum = 0.0;
        for (long j = 0; j <= t; ++j) sum += std::pow(s, double(t - j)) * std::pow(a, double(j + 1));
        CHECK(sum / std::pow(std::max(s, a), double(t)) <= dq_gd_b(t, s, a) * (1 + 1e-12));
      }
    }
}

TEST_CASE("envelopes start at their initial distances") {
  CHECK(dq_gd_envelope(0, 5.0, 0.1, 2.0) == 2.0);
  CHECK(dq_agd_envelope(0, 25.0, 0.1, 2.0) == doctest::Approx(std::sqrt(26.0) * 2.0));
  CHECK(dq_hb_envelope(0, 25.0, 0.1, 2.0, 0.0) == doctest::Approx(std::sqrt(2.0) * 2.0));
  CHECK(hb_transient(0, 1.5) == hb_transient(1, 1.5));
  CHECK(nq_gd_envelope(3, 0.5, 8.0) == 1.0);
}

TEST_CASE("waterfilled naive factor equals the per-rate form at the waterfilling rates") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    std::vector<double> L(K), rates(K);
    for (auto& l : L) l = std::exp(rng.uniform(-2.0, 2.0));
    const double nu = std::exp(rng.uniform(-3.0, 2.0));
    for (std::size_t k = 0; k < K; ++k) rates[k] = std::max(0.0, std::log2(L[k] / nu));
    CHECK(nq_gd_sigma(0.3, 0.7, 4.0, L, rates) ==
          doctest::Approx(nq_gd_sigma_waterfilled(0.3, 0.7, 4.0, L, nu)).epsilon(1e-12));
  }
  const std::vector<double> L{1.0}, R{1.0, 2.0};
  CHECK_THROWS_AS(nq_gd_sigma(0.3, 0.7, 4.0, L, R), std::invalid_argument);
}

TEST_CASE("heavy-ball momentum is the squared accelerated momentum") {
  for (double kappa : {1.0, 4.0, 49.0}) {
    CHECK(gamma_hb(kappa) == doctest::Approx(gamma_agd(kappa) * gamma_agd(kappa)));
    CHECK(sigma_hb(kappa) == doctest::Approx(std::sqrt(gamma_hb(kappa))));
  }
  CHECK(lambda_agd(25.0) == doctest::Approx((1.0 + 2.0 / 3.0 + (2.0 / 3.0) / std::sqrt(0.8)) * std::sqrt(26.0)));
}
