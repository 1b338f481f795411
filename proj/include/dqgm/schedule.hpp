#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "dqgm/bounds.hpp"

namespace dqgm::engines {

enum class Method { gd, agd, hb };

class InvalidConstants : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct HyperParams {
  double eta;    ///< stepsize
  double gamma;  ///< momentum coefficient, 0 for GD
  double sigma;  ///< contraction factor of the unquantized method
};

inline HyperParams optimal_hyperparams(double smoothness, double convexity, Method method) {
  if (!(convexity > 0.0) || !(smoothness >= convexity) || !std::isfinite(smoothness))
    throw InvalidConstants("need L >= mu > 0");
  const double kappa = smoothness / convexity;
  switch (method) {
    case Method::gd:
      return {2.0 / (smoothness + convexity), 0.0, bounds::sigma_gd(kappa)};
    case Method::agd:
      return {1.0 / smoothness, bounds::gamma_agd(kappa), bounds::sigma_agd(kappa)};
    case Method::hb: {
      const double s = 2.0 / (std::sqrt(smoothness) + std::sqrt(convexity));
      return {s * s, bounds::gamma_hb(kappa), bounds::sigma_hb(kappa)};
    }
  }
  throw InvalidConstants("unknown method");
}

/// Dynamic ranges r_t shared by worker and server. Every built-in scheme is
///   r_t = sigma^t max(t, 1)^alpha C + (r_{t-1} + gamma (r_{t-1} + r_{t-2})) a
/// with r_{-1} = r_{-2} = 0; a custom schedule is an arbitrary sequence.
class RangeSchedule {
 public:
  enum class Kind { dq_gd, dq_agd, dq_hb, nq_gd, custom };

  /// r_0 = LD, r_t = sigma^t LD + r_{t-1} a.
  static RangeSchedule dq_gd(double smoothness, double distance, double sigma, double feedback) {
    return {Kind::dq_gd, smoothness * distance, sigma, 0.0, feedback, 0.0};
  }

  /// Lead term sigma_AGD^t L D lambda.
  static RangeSchedule dq_agd(double smoothness, double distance, double kappa, double feedback) {
    return {Kind::dq_agd, smoothness * distance * bounds::lambda_agd(kappa),
            bounds::sigma_agd(kappa), bounds::gamma_agd(kappa), feedback, 0.0};
  }

  /// Lead term sigma_HB^t t^alpha e^alpha sqrt(2) L D, reading t^alpha as
  /// max(t, 1)^alpha.
  static RangeSchedule dq_hb(double smoothness, double distance, double kappa, double feedback,
                             double alpha = 0.0) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
    return {Kind::dq_hb, std::exp(alpha) * std::sqrt(2.0) * smoothness * distance,
            bounds::sigma_hb(kappa), bounds::gamma_hb(kappa), feedback, alpha};
  }

  /// r_{t,k} = sigma_nq^t L_k D.
  static RangeSchedule nq_gd(double worker_smoothness, double distance, double sigma_nq) {
    return {Kind::nq_gd, worker_smoothness * distance, sigma_nq, 0.0, 0.0, 0.0};
  }

  static RangeSchedule custom(std::function<double(long)> sequence) {
    RangeSchedule s{Kind::custom, 0.0, 0.0, 0.0, 0.0, 0.0};
    s.sequence_ = std::move(sequence);
    return s;
  }

  Kind kind() const { return kind_; }
  double lead() const { return lead_; }
  double sigma() const { return sigma_; }
  double gamma() const { return gamma_; }
  double feedback() const { return feedback_; }
  double alpha() const { return alpha_; }

  double leading_term(long t) const {
    const double poly = alpha_ == 0.0 ? 1.0 : std::pow(static_cast<double>(std::max(t, 1L)), alpha_);
    return std::pow(sigma_, static_cast<double>(t)) * lead_ * poly;
  }

  /// r_t from r_{t-1} and r_{t-2}.
  double next(long t, double previous, double before_previous) const {
    if (kind_ == Kind::custom) {
      const double r = sequence_(t);
      if (!(r >= 0.0)) throw std::domain_error("custom range sequence went negative at t = " +
                                               std::to_string(t));
      return r;
    }
    return leading_term(t) + (previous + gamma_ * (previous + before_previous)) * feedback_;
  }

 private:
  RangeSchedule(Kind kind, double lead, double sigma, double gamma, double feedback, double alpha)
      : kind_(kind), lead_(lead), sigma_(sigma), gamma_(gamma), feedback_(feedback), alpha_(alpha) {
    if (!(lead >= 0.0) || !(sigma >= 0.0) || !(gamma >= 0.0) || !(feedback >= 0.0))
      throw std::invalid_argument("schedule constants must be nonnegative");
  }

  Kind kind_;
  double lead_;
  double sigma_;
  double gamma_;
  double feedback_;
  double alpha_;
  std::function<double(long)> sequence_;
};

/// Walks a schedule forward, keeping r_{t-1} and r_{t-2}.
class RangeCursor {
 public:
  explicit RangeCursor(RangeSchedule schedule) : schedule_(std::move(schedule)) {}

  /// Returns r_t for the current t and moves to t + 1.
  double advance() {
    const double r = schedule_.next(t_, previous_, before_previous_);
    before_previous_ = previous_;
    previous_ = r;
    ++t_;
    return r;
  }

  long position() const { return t_; }
  double previous() const { return previous_; }
  const RangeSchedule& schedule() const { return schedule_; }

 private:
  RangeSchedule schedule_;
  long t_ = 0;
  double previous_ = 0.0;
  double before_previous_ = 0.0;
};

}  // namespace dqgm::engines
