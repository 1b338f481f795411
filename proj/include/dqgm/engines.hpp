#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dqgm/problems.hpp"
#include "dqgm/quantizer.hpp"
#include "dqgm/schedule.hpp"
#include "dqgm/transport.hpp"

namespace dqgm::engines {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Quantizer input escaped the ball of radius r_t.
class ScheduleViolation : public std::runtime_error {
 public:
  ScheduleViolation(long iteration, double norm, double range)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": ||u|| = " +
                           std::to_string(norm) + " exceeds r = " + std::to_string(range)),
        iteration_(iteration),
        norm_(norm),
        range_(range) {}

  long iteration() const { return iteration_; }
  double norm() const { return norm_; }
  double range() const { return range_; }

 private:
  long iteration_;
  double norm_;
  double range_;
};

/// What a worker does when ||u_t|| > r_t.
enum class Containment {
  enforce,  ///< throw ScheduleViolation
  record,   ///< count it and saturate the quantizer
};

/// Relative slack on ||u_t|| <= r_t.
inline constexpr double kContainmentSlack = 1e-12;

// ---------------------------------------------------------------------------
// Unquantized methods

template <typename Scalar>
struct UnquantizedState {
  Vector<Scalar> x;         ///< x_t
  Vector<Scalar> y;         ///< y_t (AGD)
  Vector<Scalar> previous;  ///< x_{t-1} (HB)
  long t = 0;

  explicit UnquantizedState(const Vector<Scalar>& start) : x(start), y(start), previous(start) {}
};

/// x_{t+1} = x_t - eta grad f(x_t), with an explicit stepsize.
template <typename Scalar, typename Oracle>
void step_gd(UnquantizedState<Scalar>& s, const Oracle& f, Scalar eta) {
  s.x = s.x - eta * f.gradient(s.x);
  ++s.t;
}

template <typename Scalar, typename Oracle>
void step_unquantized(Method method, UnquantizedState<Scalar>& s, const Oracle& f,
                      const HyperParams& hp) {
  const auto eta = static_cast<Scalar>(hp.eta);
  const auto gamma = static_cast<Scalar>(hp.gamma);
  switch (method) {
    case Method::gd:
      s.x = s.x - eta * f.gradient(s.x);
      break;
    case Method::agd: {
      Vector<Scalar> y = s.x - eta * f.gradient(s.x);
      s.x = y + gamma * (y - s.y);
      s.y = std::move(y);
      break;
    }
    case Method::hb: {
      Vector<Scalar> x = s.x - eta * f.gradient(s.x) + gamma * (s.x - s.previous);
      s.previous = std::move(s.x);
      s.x = std::move(x);
      break;
    }
  }
  ++s.t;
}

// ---------------------------------------------------------------------------
// Differentially quantized methods

enum class DqScheme { gd, gd_varying, agd, hb };

inline Method base_method(DqScheme s) {
  switch (s) {
    case DqScheme::agd: return Method::agd;
    case DqScheme::hb: return Method::hb;
    default: return Method::gd;
  }
}

/// Public constants shared by both ends of a DQ run.
struct DqConfig {
  DqScheme scheme = DqScheme::gd;
  HyperParams hp{};
  quant::QuantizerSpec quantizer{1, 1};
  RangeSchedule schedule = RangeSchedule::dq_gd(0.0, 0.0, 0.0, 0.0);
  Containment containment = Containment::enforce;
  /// eta_0, eta_1, ... for gd_varying; ignored otherwise.
  std::vector<double> stepsizes;

  double stepsize(long t) const {
    if (scheme != DqScheme::gd_varying) return hp.eta;
    if (t < 0) return 0.0;
    if (static_cast<std::size_t>(t) >= stepsizes.size())
      throw std::out_of_range("stepsize sequence exhausted at t = " + std::to_string(t));
    return stepsizes[static_cast<std::size_t>(t)];
  }
};

/// e_{t-1} + gamma (e_{t-1} - e_{t-2}): the error term that DQ-AGD and DQ-HB
/// both subtract from the gradient to form their quantizer input.
template <typename Scalar>
Vector<Scalar> momentum_correction(const Vector<Scalar>& e1, const Vector<Scalar>& e2, Scalar gamma) {
  return e1 + gamma * (e1 - e2);
}

struct WorkerReport {
  std::uint32_t iteration = 0;
  double input_norm = 0.0;  ///< ||u_t||
  double range = 0.0;       ///< r_t
  std::size_t bits = 0;
  bool violation = false;
  bool saturated = false;
};

/// Worker half: sees the broadcast iterate and its gradient oracle; keeps the
/// last two quantization errors.
template <typename Scalar, typename Oracle>
class DqWorker {
 public:
  DqWorker(const Oracle& f, DqConfig config)
      : f_(&f), config_(std::move(config)), cursor_(config_.schedule) {
    const auto n = config_.quantizer.dimension();
    if (f.dimension() != n) throw std::invalid_argument("quantizer and objective dimensions differ");
    e1_ = Vector<Scalar>::Zero(n);
    e2_ = Vector<Scalar>::Zero(n);
  }

  /// Consumes the iterate frame for round t and produces the payload frame.
  transport::Frame respond(std::span<const std::uint8_t> downlink) {
    const auto frame = transport::decode_iterate(downlink, config_.quantizer.dimension());
    if (frame.iteration != t_)
      throw transport::FramingError("worker expected iteration " + std::to_string(t_) +
                                    ", got " + std::to_string(frame.iteration));
    const Vector<Scalar> xhat = frame.values.template cast<Scalar>();
    const auto eta = static_cast<Scalar>(config_.hp.eta);
    const auto gamma = static_cast<Scalar>(config_.hp.gamma);

    Vector<Scalar>& z = query_;
    switch (config_.scheme) {
      case DqScheme::gd:
        z = xhat + eta * e1_;
        input_ = f_->gradient(z) - e1_;
        break;
      case DqScheme::gd_varying: {
        const auto before = static_cast<Scalar>(config_.stepsize(static_cast<long>(t_) - 1));
        const auto now = static_cast<Scalar>(config_.stepsize(static_cast<long>(t_)));
        const Scalar ratio = before == Scalar(0) ? Scalar(0) : before / now;
        z = xhat + before * e1_;
        input_ = f_->gradient(z) - ratio * e1_;
        break;
      }
      case DqScheme::agd: {
        const Vector<Scalar> m = momentum_correction(e1_, e2_, gamma);
        z = xhat + eta * m;
        input_ = f_->gradient(z) - m;
        break;
      }
      case DqScheme::hb: {
        const Vector<Scalar> m = momentum_correction(e1_, e2_, gamma);
        z = xhat + eta * e1_;
        input_ = f_->gradient(z) - m;
        break;
      }
    }

    report_ = {};
    report_.iteration = t_;
    report_.range = cursor_.advance();
    report_.input_norm = static_cast<double>(input_.stableNorm());
    auto overload = quant::Overload::reject;
    if (!(report_.input_norm <= report_.range * (1.0 + kContainmentSlack))) {
      report_.violation = true;
      if (config_.containment == Containment::enforce)
        throw ScheduleViolation(t_, report_.input_norm, report_.range);
      overload = quant::Overload::saturate;
    }
    const quant::ScaledQuantizer<Scalar> q(config_.quantizer, static_cast<Scalar>(report_.range));
    auto out = q.quantize(input_, t_, overload);
    report_.saturated = out.saturated;
    report_.bits = out.payload.bits.size();

    e2_ = std::move(e1_);
    e1_ = out.reconstruction - input_;
    ++t_;
    return transport::encode_payload(out.payload);
  }

  const WorkerReport& report() const { return report_; }
  const Vector<Scalar>& last_input() const { return input_; }
  /// z_t, the point where the last gradient was taken.
  const Vector<Scalar>& last_query() const { return query_; }
  /// e_{t-1} and e_{t-2} relative to the next round.
  const Vector<Scalar>& error() const { return e1_; }
  const Vector<Scalar>& previous_error() const { return e2_; }
  std::uint32_t iteration() const { return t_; }

 private:
  const Oracle* f_;
  DqConfig config_;
  RangeCursor cursor_;
  Vector<Scalar> e1_, e2_, input_, query_;
  WorkerReport report_;
  std::uint32_t t_ = 0;
};

/// Server half: owns the iterate(s), decodes payload bits with the public
/// schedule and never sees u_t, e_t or gradients.
template <typename Scalar>
class DqServer {
 public:
  DqServer(const Vector<Scalar>& start, DqConfig config)
      : config_(std::move(config)), cursor_(config_.schedule), x_(start), y_(start), previous_(start) {
    if (start.size() != config_.quantizer.dimension())
      throw std::invalid_argument("start and quantizer dimensions differ");
  }

  transport::Frame broadcast() const { return transport::encode_iterate(t_, x_); }

  void receive(std::span<const std::uint8_t> uplink) {
    const auto frame = transport::decode_payload(uplink, config_.quantizer.message_bits());
    if (frame.iteration != t_)
      throw transport::FramingError("server expected iteration " + std::to_string(t_) + ", got " +
                                    std::to_string(frame.iteration));
    const auto indices = quant::decode_payload(frame.bits, config_.quantizer.dimension(),
                                               config_.quantizer.rate());
    const quant::ScaledQuantizer<Scalar> q(config_.quantizer,
                                           static_cast<Scalar>(cursor_.advance()));
    q_ = q.reconstruct(indices);
    const auto eta = static_cast<Scalar>(config_.hp.eta);
    const auto gamma = static_cast<Scalar>(config_.hp.gamma);
    switch (config_.scheme) {
      case DqScheme::gd:
        x_ = x_ - eta * q_;
        break;
      case DqScheme::gd_varying:
        x_ = x_ - static_cast<Scalar>(config_.stepsize(static_cast<long>(t_))) * q_;
        break;
      case DqScheme::agd: {
        Vector<Scalar> y = x_ - eta * q_;
        x_ = y + gamma * (y - y_);
        y_ = std::move(y);
        break;
      }
      case DqScheme::hb: {
        Vector<Scalar> x = x_ - eta * q_ + gamma * (x_ - previous_);
        previous_ = std::move(x_);
        x_ = std::move(x);
        break;
      }
    }
    ++t_;
  }

  /// x_hat_t.
  const Vector<Scalar>& iterate() const { return x_; }
  /// y_hat_t (AGD; equals x_hat_0 before the first round).
  const Vector<Scalar>& y_iterate() const { return y_; }
  /// Last decoded q_t.
  const Vector<Scalar>& decoded() const { return q_; }
  std::uint32_t iteration() const { return t_; }
  double last_range() const { return cursor_.previous(); }

 private:
  DqConfig config_;
  RangeCursor cursor_;
  Vector<Scalar> x_, y_, previous_, q_;
  std::uint32_t t_ = 0;
};

/// One worker, one server and the channel between them.
template <typename Scalar, typename Oracle>
class DqSession {
 public:
  DqSession(const Oracle& f, const Vector<Scalar>& start, DqConfig config)
      : worker_(f, config), server_(start, std::move(config)), channel_(1) {}

  const WorkerReport& step() {
    channel_.broadcast(server_.broadcast());
    channel_.send_payload(0, worker_.respond(channel_.receive_iterate(0)));
    server_.receive(channel_.receive_payload(0));
    return worker_.report();
  }

  const DqWorker<Scalar, Oracle>& worker() const { return worker_; }
  const DqServer<Scalar>& server() const { return server_; }
  const transport::Channel& channel() const { return channel_; }

 private:
  DqWorker<Scalar, Oracle> worker_;
  DqServer<Scalar> server_;
  transport::Channel channel_;
};

/// Standard DQ configuration with optimal parameters and the matching
/// dynamic-range schedule. alpha applies to the heavy-ball schedule only.
inline DqConfig make_dq_config(DqScheme scheme, double smoothness, double convexity,
                               double distance, const quant::QuantizerSpec& quantizer,
                               double alpha = 0.0, Containment containment = Containment::enforce) {
  const double kappa = smoothness / convexity;
  const double a = quantizer.unit_covering_radius();
  DqConfig c;
  c.scheme = scheme;
  c.hp = optimal_hyperparams(smoothness, convexity, base_method(scheme));
  c.quantizer = quantizer;
  c.containment = containment;
  switch (scheme) {
    case DqScheme::gd:
    case DqScheme::gd_varying:
      c.schedule = RangeSchedule::dq_gd(smoothness, distance, c.hp.sigma, a);
      break;
    case DqScheme::agd:
      c.schedule = RangeSchedule::dq_agd(smoothness, distance, kappa, a);
      break;
    case DqScheme::hb:
      c.schedule = RangeSchedule::dq_hb(smoothness, distance, kappa, a, alpha);
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Naively quantized GD with K workers

/// Worker k: quantizes its local gradient at the broadcast iterate.
template <typename Scalar, typename Oracle>
class NqWorker {
 public:
  NqWorker(const Oracle& f, quant::QuantizerSpec quantizer, RangeSchedule schedule,
           Containment containment = Containment::enforce)
      : f_(&f), quantizer_(quantizer), cursor_(std::move(schedule)), containment_(containment) {
    if (f.dimension() != quantizer.dimension())
      throw std::invalid_argument("quantizer and objective dimensions differ");
  }

  transport::Frame respond(std::span<const std::uint8_t> downlink) {
    const auto frame = transport::decode_iterate(downlink, quantizer_.dimension());
    if (frame.iteration != t_)
      throw transport::FramingError("worker expected iteration " + std::to_string(t_) +
                                    ", got " + std::to_string(frame.iteration));
    input_ = f_->gradient(frame.values.template cast<Scalar>());
    report_ = {};
    report_.iteration = t_;
    report_.range = cursor_.advance();
    report_.input_norm = static_cast<double>(input_.stableNorm());
    auto overload = quant::Overload::reject;
    if (!(report_.input_norm <= report_.range * (1.0 + kContainmentSlack))) {
      report_.violation = true;
      if (containment_ == Containment::enforce)
        throw ScheduleViolation(t_, report_.input_norm, report_.range);
      overload = quant::Overload::saturate;
    }
    const quant::ScaledQuantizer<Scalar> q(quantizer_, static_cast<Scalar>(report_.range));
    auto out = q.quantize(input_, t_, overload);
    report_.saturated = out.saturated;
    report_.bits = out.payload.bits.size();
    ++t_;
    return transport::encode_payload(out.payload);
  }

  const WorkerReport& report() const { return report_; }
  const Vector<Scalar>& last_input() const { return input_; }

 private:
  const Oracle* f_;
  quant::QuantizerSpec quantizer_;
  RangeCursor cursor_;
  Containment containment_;
  Vector<Scalar> input_;
  WorkerReport report_;
  std::uint32_t t_ = 0;
};

/// x_hat_{t+1} = x_hat_t - (eta / K) sum_k q_{t,k}.
template <typename Scalar>
class NqServer {
 public:
  NqServer(const Vector<Scalar>& start, double eta, std::vector<quant::QuantizerSpec> quantizers,
           std::vector<RangeSchedule> schedules)
      : x_(start), eta_(eta), quantizers_(std::move(quantizers)) {
    if (quantizers_.empty() || quantizers_.size() != schedules.size())
      throw std::invalid_argument("need one quantizer and one schedule per worker");
    for (auto& s : schedules) cursors_.emplace_back(std::move(s));
  }

  transport::Frame broadcast() const { return transport::encode_iterate(t_, x_); }

  void receive(const std::vector<transport::Frame>& uplinks) {
    if (uplinks.size() != quantizers_.size()) throw std::invalid_argument("one payload per worker");
    Vector<Scalar> sum = Vector<Scalar>::Zero(x_.size());
    for (std::size_t k = 0; k < uplinks.size(); ++k) {
      const auto& spec = quantizers_[k];
      const auto frame = transport::decode_payload(uplinks[k], spec.message_bits());
      if (frame.iteration != t_) throw transport::FramingError("stale payload from worker");
      const auto indices = quant::decode_payload(frame.bits, spec.dimension(), spec.rate());
      const quant::ScaledQuantizer<Scalar> q(spec, static_cast<Scalar>(cursors_[k].advance()));
      sum += q.reconstruct(indices);
    }
    const auto k = static_cast<Scalar>(quantizers_.size());
    x_ = x_ - (static_cast<Scalar>(eta_) / k) * sum;
    ++t_;
  }

  const Vector<Scalar>& iterate() const { return x_; }
  std::uint32_t iteration() const { return t_; }

 private:
  Vector<Scalar> x_;
  double eta_;
  std::vector<quant::QuantizerSpec> quantizers_;
  std::vector<RangeCursor> cursors_;
  std::uint32_t t_ = 0;
};

/// Public constants of an NQ-GD run.
struct NqConfig {
  double eta = 0.0;
  std::vector<quant::QuantizerSpec> quantizers;
  std::vector<RangeSchedule> schedules;
  Containment containment = Containment::enforce;
};

/// Optimal GD stepsize for the average objective and per-worker ranges
/// r_{t,k} = sigma_nq^t L_k D with sigma_nq from the deployed rates.
inline NqConfig make_nq_config(const std::vector<double>& worker_smoothness, double smoothness,
                               double convexity, double distance,
                               const std::vector<quant::QuantizerSpec>& quantizers,
                               Containment containment = Containment::enforce) {
  if (worker_smoothness.size() != quantizers.size() || quantizers.empty())
    throw std::invalid_argument("need one quantizer per worker");
  const auto hp = optimal_hyperparams(smoothness, convexity, Method::gd);
  // sum_k L_k rho 2^{-R_k}, with rho 2^{-R_k} the unit covering radius of worker k.
  double sum = 0.0;
  for (std::size_t k = 0; k < quantizers.size(); ++k)
    sum += worker_smoothness[k] * quantizers[k].unit_covering_radius();
  const double sigma_nq = hp.sigma + hp.eta / static_cast<double>(quantizers.size()) * sum;
  NqConfig c;
  c.eta = hp.eta;
  c.quantizers = quantizers;
  c.containment = containment;
  for (double l : worker_smoothness) c.schedules.push_back(RangeSchedule::nq_gd(l, distance, sigma_nq));
  return c;
}

template <typename Scalar, typename Oracle>
class NqSession {
 public:
  NqSession(std::vector<const Oracle*> workers, const Vector<Scalar>& start, const NqConfig& config)
      : server_(start, config.eta, config.quantizers, config.schedules), channel_(workers.size()) {
    if (workers.size() != config.quantizers.size())
      throw std::invalid_argument("need one quantizer per worker");
    for (std::size_t k = 0; k < workers.size(); ++k)
      workers_.emplace_back(*workers[k], config.quantizers[k], config.schedules[k],
                            config.containment);
  }

  const std::vector<WorkerReport>& step() {
    channel_.broadcast(server_.broadcast());
    for (std::size_t k = 0; k < workers_.size(); ++k)
      channel_.send_payload(k, workers_[k].respond(channel_.receive_iterate(k)));
    std::vector<transport::Frame> uplinks;
    for (std::size_t k = 0; k < workers_.size(); ++k) uplinks.push_back(channel_.receive_payload(k));
    server_.receive(uplinks);
    reports_.clear();
    for (const auto& w : workers_) reports_.push_back(w.report());
    return reports_;
  }

  const NqServer<Scalar>& server() const { return server_; }
  const NqWorker<Scalar, Oracle>& worker(std::size_t k) const { return workers_.at(k); }
  const transport::Channel& channel() const { return channel_; }

 private:
  std::vector<NqWorker<Scalar, Oracle>> workers_;
  NqServer<Scalar> server_;
  transport::Channel channel_;
  std::vector<WorkerReport> reports_;
};

}  // namespace dqgm::engines
