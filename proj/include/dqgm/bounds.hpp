#pragma once

// Closed-form contraction factors, phase-transition thresholds and finite-t
// envelopes for quantized gradient methods on L-smooth, mu-strongly convex
// objectives. Throughout, `feedback` denotes rho_n 2^-R, the covering radius
// of the unit-range quantizer.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

namespace dqgm::bounds {

enum class Scheme { gd, agd, hb, dq_gd, dq_agd, dq_hb, nq_gd };

inline std::string_view name(Scheme s) {
  switch (s) {
    case Scheme::gd: return "gd";
    case Scheme::agd: return "agd";
    case Scheme::hb: return "hb";
    case Scheme::dq_gd: return "dq-gd";
    case Scheme::dq_agd: return "dq-agd";
    case Scheme::dq_hb: return "dq-hb";
    case Scheme::nq_gd: return "nq-gd";
  }
  return "?";
}

/// The unquantized method a scheme is built on.
inline Scheme base_method(Scheme s) {
  switch (s) {
    case Scheme::dq_gd:
    case Scheme::nq_gd: return Scheme::gd;
    case Scheme::dq_agd: return Scheme::agd;
    case Scheme::dq_hb: return Scheme::hb;
    default: return s;
  }
}

inline bool is_quantized(Scheme s) { return base_method(s) != s; }

inline void require_condition(double kappa) {
  if (!(kappa >= 1.0) || !std::isfinite(kappa))
    throw std::invalid_argument("condition number must be finite and >= 1");
}

inline double sigma_gd(double kappa) { return (kappa - 1.0) / (kappa + 1.0); }

inline double sigma_agd(double kappa) { return std::sqrt(1.0 - 1.0 / std::sqrt(kappa)); }

inline double sigma_hb(double kappa) {
  const double s = std::sqrt(kappa);
  return (s - 1.0) / (s + 1.0);
}

inline double gamma_agd(double kappa) {
  const double s = std::sqrt(kappa);
  return (s - 1.0) / (s + 1.0);
}

inline double gamma_hb(double kappa) {
  const double g = gamma_agd(kappa);
  return g * g;
}

/// Contraction factor of the unquantized method with its optimal parameters.
inline double sigma(Scheme method, double kappa) {
  switch (base_method(method)) {
    case Scheme::agd: return sigma_agd(kappa);
    case Scheme::hb: return sigma_hb(kappa);
    default: return sigma_gd(kappa);
  }
}

/// Momentum coefficient of the unquantized method (0 for GD).
inline double momentum(Scheme method, double kappa) {
  switch (base_method(method)) {
    case Scheme::agd: return gamma_agd(kappa);
    case Scheme::hb: return gamma_hb(kappa);
    default: return 0.0;
  }
}

/// (1 + gamma + gamma / sigma) sqrt(kappa + 1) for AGD parameters.
inline double lambda_agd(double kappa) {
  const double g = gamma_agd(kappa);
  return (1.0 + g + g / sigma_agd(kappa)) * std::sqrt(kappa + 1.0);
}

inline double feedback(double rho, double rate) { return rho * std::exp2(-rate); }

/// Characteristic polynomial r^2 - r a (1 + gamma) - a gamma of the
/// momentum dynamic-range recursion, with a = rho_n 2^-R.
inline double char_poly(double r, double gamma, double feedback) {
  return r * r - r * feedback * (1.0 + gamma) - feedback * gamma;
}

/// phi(n, R, gamma) = (1 + gamma)/2 + sqrt((1 + gamma)^2 + 4 gamma / a) / 2.
inline double phi(double gamma, double feedback) {
  if (feedback <= 0.0) return gamma > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return 0.5 * (1.0 + gamma) +
         0.5 * std::sqrt((1.0 + gamma) * (1.0 + gamma) + 4.0 * gamma / feedback);
}

inline double phi(double rate, double gamma, double rho) { return phi(gamma, feedback(rho, rate)); }

struct Roots {
  double plus;
  double minus;
};

/// Roots of char_poly: a ((1 + gamma) +- sqrt((1 + gamma)^2 + 4 gamma / a)) / 2.
inline Roots phi_roots(double gamma, double feedback) {
  const double b = feedback * (1.0 + gamma);
  const double disc = std::sqrt(b * b + 4.0 * feedback * gamma);
  // Larger root directly; the smaller via Vieta (product = -a gamma) to avoid
  // cancellation when gamma is small.
  const double plus = 0.5 * (b + disc);
  const double minus = plus > 0.0 ? -feedback * gamma / plus : 0.0;
  return {plus, minus};
}

/// Phase-transition rates for a scheme with unquantized contraction sigma and
/// momentum gamma. `linear` is R1 (linear convergence above it), `lossless`
/// is R2 (no loss in contraction factor at or above it). R2 is undefined when
/// sigma = 0 (kappa = 1: the unquantized method converges in one step).
struct Thresholds {
  double linear;
  std::optional<double> lossless;

  bool one_step() const { return !lossless.has_value(); }
};

inline Thresholds thresholds(double rho, double sigma, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("momentum must be nonnegative");
  if (!(sigma >= 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must lie in [0, 1)");
  Thresholds t{std::log2(1.0 + 2.0 * gamma) + std::log2(rho), std::nullopt};
  if (sigma > 0.0)
    t.lossless = std::log2(((1.0 + gamma) * sigma + gamma) / (sigma * sigma)) + std::log2(rho);
  return t;
}

inline Thresholds thresholds(Scheme s, double kappa, double rho) {
  return thresholds(rho, sigma(s, kappa), momentum(s, kappa));
}

/// Asymptotic contraction-factor guarantee (unclipped). For unquantized
/// schemes, rate and rho are ignored.
inline double achievable_rate(Scheme s, double kappa, double rate, double rho) {
  require_condition(kappa);
  const double a = feedback(rho, rate);
  switch (s) {
    case Scheme::gd:
    case Scheme::agd:
    case Scheme::hb: return sigma(s, kappa);
    case Scheme::dq_gd: return std::max(sigma_gd(kappa), a);
    case Scheme::nq_gd: return sigma_gd(kappa) + 2.0 * kappa / (kappa + 1.0) * a;
    case Scheme::dq_agd: return std::max(sigma_agd(kappa), a * phi(gamma_agd(kappa), a));
    case Scheme::dq_hb: return std::max(sigma_hb(kappa), a * phi(gamma_hb(kappa), a));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Display clipping: contraction factors at or above 1 mean no convergence.
inline double clip_unit(double v) { return std::min(v, 1.0); }

enum class ConverseFamily {
  gradient_descent,  ///< server may use only the last quantized input
  gradient_method,   ///< server may use the full span of past inputs
};

inline ConverseFamily converse_family(Scheme s) {
  switch (base_method(s)) {
    case Scheme::agd:
    case Scheme::hb: return ConverseFamily::gradient_method;
    default: return ConverseFamily::gradient_descent;
  }
}

/// Lower bound max{sigma, 2^-R} with sigma = sigma_GD or sigma_HB.
inline double converse_curve(ConverseFamily family, double kappa, double rate) {
  require_condition(kappa);
  const double s =
      family == ConverseFamily::gradient_descent ? sigma_gd(kappa) : sigma_hb(kappa);
  return std::max(s, std::exp2(-rate));
}

/// Relative tolerance below which sigma_GD and rho_n 2^-R count as equal.
inline constexpr double kEqualityTolerance = 1e-12;

/// b_t from the DQ-GD error bound; b_{-1} is taken as 0.
inline double dq_gd_b(long t, double sigma, double feedback) {
  if (t < 0) return 0.0;
  if (std::abs(sigma - feedback) < kEqualityTolerance * sigma || sigma == feedback)
    return static_cast<double>(t + 1);
  return feedback / std::abs(sigma - feedback);
}

/// max{sigma_GD, a}^t [1 + eta_GD L b_{t-1}] D, where eta_GD L = 2 kappa / (kappa + 1).
inline double dq_gd_envelope(long t, double kappa, double feedback, double distance) {
  const double s = sigma_gd(kappa);
  const double eta_l = 2.0 * kappa / (kappa + 1.0);
  return std::pow(std::max(s, feedback), static_cast<double>(t)) *
         (1.0 + eta_l * dq_gd_b(t - 1, s, feedback)) * distance;
}

/// Closed-form solution of the momentum range recursion
///   r_t = sigma^t C + a ((1 + gamma) r_{t-1} + gamma r_{t-2}),  r_{-1} = r_{-2} = 0,
/// as sigma^t c0 + phi_+^t c_+ + phi_-^t c_-.
struct SecondOrderSolution {
  double sigma;
  double c0;
  double c_plus;
  double c_minus;
  Roots roots;

  /// Value at t (t >= -2; exact zeros at -1 and -2 up to rounding).
  double operator()(long t) const {
    if (!std::isfinite(c0)) return std::numeric_limits<double>::infinity();
    const double td = static_cast<double>(t);
    double v = std::pow(sigma, td) * c0;
    if (c_plus != 0.0) v += std::pow(roots.plus, td) * c_plus;
    if (c_minus != 0.0) v += std::pow(roots.minus, td) * c_minus;
    return v;
  }
};

inline SecondOrderSolution solve_range_recursion(double lead, double sigma, double gamma,
                                                 double feedback) {
  SecondOrderSolution s{sigma, 0.0, 0.0, 0.0, phi_roots(gamma, feedback)};
  const double p = char_poly(sigma, gamma, feedback);
  if (p == 0.0 || sigma == 0.0) {
    // Resonant (sigma is a root) or degenerate: no bounded closed form of this shape.
    s.c0 = std::numeric_limits<double>::infinity();
    return s;
  }
  s.c0 = sigma * sigma / p * lead;
  const double plus = s.roots.plus;
  const double minus = s.roots.minus;
  if (plus != minus) {
    s.c_plus = -s.c0 * plus * plus / (sigma * sigma) * (sigma - minus) / (plus - minus);
    s.c_minus = s.c0 * minus * minus / (sigma * sigma) * (sigma - plus) / (plus - minus);
  }
  return s;
}

struct AgdEnvelopes {
  double y;  ///< sigma_AGD^t sqrt(kappa + 1) D
  double x;  ///< sigma_AGD^t lambda D
};

inline AgdEnvelopes agd_unquantized_envelopes(long t, double kappa, double distance) {
  const double st = std::pow(sigma_agd(kappa), static_cast<double>(t));
  return {st * std::sqrt(kappa + 1.0) * distance, st * lambda_agd(kappa) * distance};
}

/// Finite-t bound on ||y_hat_t - x*|| for DQ-AGD with eta = 1/L:
///   sigma^t c + eta (phi_+^{t-1} c_+ + phi_-^{t-1} c_-),  c = sqrt(kappa+1) D + eta c0 / sigma.
/// The L-dependence cancels, so the bound is expressed through kappa and D only.
inline double dq_agd_envelope(long t, double kappa, double feedback, double distance) {
  const double s = sigma_agd(kappa);
  const double base = std::pow(s, static_cast<double>(t)) * std::sqrt(kappa + 1.0) * distance;
  if (t == 0) return base;
  // eta * r_{t-1} with eta = 1/L and lead L D lambda.
  const auto scaled =
      solve_range_recursion(distance * lambda_agd(kappa), s, gamma_agd(kappa), feedback);
  return base + scaled(t - 1);
}

/// Polynomial factor max(t, 1)^alpha e^alpha sqrt(2) in the heavy-ball bound.
inline double hb_transient(long t, double alpha) {
  const double tt = static_cast<double>(std::max<long>(t, 1));
  return std::pow(tt, alpha) * std::exp(alpha) * std::sqrt(2.0);
}

/// Finite-t bound on ||x_hat_t - x*|| for DQ-HB:
///   (sigma^t c + phi_+^{t-1} c_+ + phi_-^{t-1} c_-) t^alpha,  c = e^alpha sqrt(2) D + eta c0 / sigma,
/// with t^alpha read as max(t, 1)^alpha so that the bound at t = 0 is not vacuous.
/// The constants c0, c_+ and c_- carry the factor eta_HB L.
inline double dq_hb_envelope(long t, double kappa, double feedback, double distance,
                             double alpha) {
  const double s = sigma_hb(kappa);
  const double poly = std::pow(static_cast<double>(std::max<long>(t, 1)), alpha);
  const double lead = std::exp(alpha) * std::sqrt(2.0) * distance;
  const double base = std::pow(s, static_cast<double>(t)) * lead * poly;
  if (t == 0) return base;
  const double sk = std::sqrt(kappa);
  const double eta_l = 4.0 * kappa / ((sk + 1.0) * (sk + 1.0));
  const auto scaled = solve_range_recursion(eta_l * lead, s, gamma_hb(kappa), feedback);
  return base + scaled(t - 1) * poly;
}

/// sigma_GD + (eta_GD rho / K) sum_k L_k 2^{-R_k}.
inline double nq_gd_sigma(double sigma_gd_value, double eta, double rho,
                          std::span<const double> smoothness, std::span<const double> rates) {
  if (smoothness.size() != rates.size() || smoothness.empty())
    throw std::invalid_argument("need one rate per worker");
  double sum = 0.0;
  for (std::size_t k = 0; k < smoothness.size(); ++k)
    sum += smoothness[k] * std::exp2(-rates[k]);
  return sigma_gd_value + eta * rho / static_cast<double>(smoothness.size()) * sum;
}

/// Waterfilled form sigma_GD + (eta_GD rho / K) sum_k min{nu, L_k}.
inline double nq_gd_sigma_waterfilled(double sigma_gd_value, double eta, double rho,
                                      std::span<const double> smoothness, double water_level) {
  double sum = 0.0;
  for (double l : smoothness) sum += std::min(water_level, l);
  return sigma_gd_value + eta * rho / static_cast<double>(smoothness.size()) * sum;
}

/// ||x_hat_t - x*|| <= sigma^t D for NQ-GD with sigma from nq_gd_sigma.
inline double nq_gd_envelope(long t, double sigma_nq, double distance) {
  return std::pow(sigma_nq, static_cast<double>(t)) * distance;
}

}  // namespace dqgm::bounds
