#include "dqgm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "dqgm/rng.hpp"
#include "dqgm/waterfill.hpp"

namespace dqgm::harness {

std::string name(Algo a) { return std::string(bounds::name(scheme(a))); }

Algo parse_algo(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), '_', '-');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Algo a : {Algo::gd, Algo::agd, Algo::hb, Algo::dq_gd, Algo::dq_agd, Algo::dq_hb, Algo::nq_gd})
    if (name(a) == s) return a;
  throw std::invalid_argument("unknown algorithm '" + text + "'");
}

bounds::Scheme scheme(Algo a) {
  switch (a) {
    case Algo::gd: return bounds::Scheme::gd;
    case Algo::agd: return bounds::Scheme::agd;
    case Algo::hb: return bounds::Scheme::hb;
    case Algo::dq_gd: return bounds::Scheme::dq_gd;
    case Algo::dq_agd: return bounds::Scheme::dq_agd;
    case Algo::dq_hb: return bounds::Scheme::dq_hb;
    case Algo::nq_gd: return bounds::Scheme::nq_gd;
  }
  throw std::invalid_argument("unknown algorithm");
}

bool is_quantized(Algo a) { return bounds::is_quantized(scheme(a)); }

ContractionEstimate estimate_contraction(std::span<const double> distance, double floor,
                                         bool diverged) {
  if (diverged) return {1.0, 1.0};
  // Last index of the above-floor prefix.
  std::size_t last = 0;
  while (last + 1 < distance.size() && distance[last + 1] >= floor) ++last;
  if (distance.empty() || !(distance[0] >= floor) || static_cast<long>(last) < kMinimumSteps)
    throw InsufficientData("need at least " + std::to_string(kMinimumSteps) +
                           " iterations above the precision floor");
  const std::size_t half = last / 2;
  const double steps = static_cast<double>(last - half);
  ContractionEstimate e{};
  e.tail = std::pow(distance[last] / distance[half], 1.0 / steps);
  e.raw = std::pow(distance[last] / distance[0], 1.0 / static_cast<double>(last));
  return e;
}

ContractionEstimate estimate_contraction(const RunRecord& record) {
  return estimate_contraction(record.distance, record.floor,
                              record.termination == Termination::diverged);
}

namespace {

using engines::DqScheme;
using Vec = Eigen::VectorXd;

struct Measure {
  const Vec& optimum;
  double distance_bound;
  const StopRule& stop;
  RunRecord& record;

  // Appends ||x - x*||; returns false once the run should stop.
  bool push(const Vec& x) {
    const double d = (x - optimum).norm();
    const double scale = std::max(1.0, distance_bound);
    if (!std::isfinite(d) || d > stop.divergence * scale) {
      record.termination = Termination::diverged;
      return false;
    }
    record.distance.push_back(d);
    if (d < record.floor) {
      record.termination = Termination::converged;
      return false;
    }
    return true;
  }
};

void finish(RunRecord& record) {
  try {
    const auto e = estimate_contraction(record);
    record.estimate = e.reported();
    record.raw_estimate = e.raw;
    record.estimated = true;
  } catch (const InsufficientData&) {
    record.estimated = false;
  }
}

engines::Method method_of(Algo a) {
  switch (a) {
    case Algo::agd:
    case Algo::dq_agd: return engines::Method::agd;
    case Algo::hb:
    case Algo::dq_hb: return engines::Method::hb;
    default: return engines::Method::gd;
  }
}

DqScheme dq_scheme(Algo a) {
  switch (a) {
    case Algo::dq_agd: return DqScheme::agd;
    case Algo::dq_hb: return DqScheme::hb;
    default: return DqScheme::gd;
  }
}

quant::QuantizerSpec make_quantizer(Eigen::Index n, int rate, const RunOptions& o) {
  return o.kind == quant::QuantizerKind::lossless ? quant::QuantizerSpec::lossless(n)
                                                  : quant::QuantizerSpec(n, rate);
}

template <typename Oracle>
RunRecord run_single(Algo algo, const Oracle& f, const Vec& start, const Vec& optimum,
                     double smoothness, double convexity, double distance, int rate,
                     const RunOptions& o) {
  RunRecord rec;
  rec.floor = o.stop.floor * std::max(1.0, distance);
  Measure m{optimum, distance, o.stop, rec};
  if (!m.push(start)) {
    finish(rec);
    return rec;
  }
  const auto n = start.size();
  if (!is_quantized(algo)) {
    const auto hp = engines::optimal_hyperparams(smoothness, convexity, method_of(algo));
    engines::UnquantizedState<double> s(start);
    for (long t = 0; t < o.stop.t_max; ++t) {
      engines::step_unquantized(method_of(algo), s, f, hp);
      if (!m.push(s.x)) break;
    }
    finish(rec);
    return rec;
  }

  const auto spec = make_quantizer(n, rate, o);
  rec.rates.push_back(spec.rate());
  auto track = [&](const engines::WorkerReport& r) {
    rec.input_norm.push_back(r.input_norm);
    rec.range.push_back(r.range);
    rec.bits.push_back(r.bits);
    if (r.violation) ++rec.violations;
  };
  if (algo == Algo::nq_gd) {
    const auto config =
        engines::make_nq_config({smoothness}, smoothness, convexity, distance, {spec}, o.containment);
    engines::NqSession<double, Oracle> session({&f}, start, config);
    for (long t = 0; t < o.stop.t_max; ++t) {
      track(session.step().front());
      if (!m.push(session.server().iterate())) break;
    }
  } else {
    const auto config = engines::make_dq_config(dq_scheme(algo), smoothness, convexity, distance,
                                                spec, o.alpha, o.containment);
    engines::DqSession<double, Oracle> session(f, start, config);
    for (long t = 0; t < o.stop.t_max; ++t) {
      track(session.step());
      if (!m.push(session.server().iterate())) break;
    }
  }
  finish(rec);
  return rec;
}

}  // namespace

RunRecord run_algorithm(Algo algo, const problems::Objective<double>& f, int rate,
                        const RunOptions& options) {
  return run_single(algo, f, f.start, f.optimum, f.smoothness, f.convexity, f.distance, rate,
                    options);
}

RunRecord run_algorithm(Algo algo, const problems::MultiWorkerProblem<double>& p, int rate,
                        const RunOptions& o) {
  if (algo != Algo::nq_gd || p.size() == 1)
    return run_single(algo, p, p.start, p.optimum, p.smoothness(), p.convexity(), p.distance,
                      rate, o);

  std::vector<double> ls;
  for (const auto& w : p.workers) ls.push_back(w.smoothness);
  const std::vector<int> rates = o.allocation == RateAllocation::waterfilling
                                     ? engines::waterfill_integer(ls, rate)
                                     : engines::uniform_rates(p.size(), rate);
  std::vector<quant::QuantizerSpec> specs;
  std::vector<const problems::WorkerObjective<double>*> oracles;
  for (std::size_t k = 0; k < p.size(); ++k) {
    specs.push_back(make_quantizer(p.dimension(), rates[k], o));
    oracles.push_back(&p.workers[k]);
  }
  RunRecord rec;
  for (const auto& s : specs) rec.rates.push_back(s.rate());
  rec.floor = o.stop.floor * std::max(1.0, p.distance);
  Measure m{p.optimum, p.distance, o.stop, rec};
  if (m.push(p.start)) {
    const auto config = engines::make_nq_config(ls, p.smoothness(), p.convexity(), p.distance,
                                                specs, o.containment);
    engines::NqSession<double, problems::WorkerObjective<double>> session(oracles, p.start, config);
    for (long t = 0; t < o.stop.t_max; ++t) {
      const auto& reports = session.step();
      double norm = 0.0, range = 0.0;
      std::size_t bits = 0;
      for (const auto& r : reports) {
        norm = std::max(norm, r.input_norm);
        range = std::max(range, r.range);
        bits += r.bits;
        if (r.violation) ++rec.violations;
      }
      rec.input_norm.push_back(norm);
      rec.range.push_back(range);
      rec.bits.push_back(bits);
      if (!m.push(session.server().iterate())) break;
    }
  }
  finish(rec);
  return rec;
}

void ExperimentConfig::validate() const {
  if (algos.empty()) throw ConfigError(name + ": no algorithms");
  if (trials < 1) throw ConfigError(name + ": trials must be >= 1");
  if (rates.empty()) throw ConfigError(name + ": no rates");
  for (int r : rates)
    if (r < 1 || r > quant::kMaxScalarRate)
      throw ConfigError(name + ": rates must lie in [1, 52]");
  if (workers < 1) throw ConfigError(name + ": workers must be >= 1");
  if (run.stop.t_max < 1) throw ConfigError(name + ": t_max must be >= 1");
  if (!(run.stop.floor > 0.0)) throw ConfigError(name + ": floor must be positive");
  switch (source) {
    case Source::gaussian:
      if (n < 1 || m < n) throw ConfigError(name + ": need m >= n >= 1");
      if (!(kappa >= 1.0)) throw ConfigError(name + ": kappa must be >= 1");
      break;
    case Source::mtx:
      if (mtx_path.empty()) throw ConfigError(name + ": mtx source needs a path");
      break;
    case Source::interpolation:
      if (n < 1 || m < n) throw ConfigError(name + ": need m >= n >= 1");
      if (worker_kappas.size() != workers)
        throw ConfigError(name + ": need one kappa per worker");
      if (!worker_smoothness.empty() && worker_smoothness.size() != workers)
        throw ConfigError(name + ": need one smoothness constant per worker");
      break;
  }
}

const SweepRow* SweepTable::find(Algo algo, int rate) const {
  for (const auto& r : rows)
    if (r.algo == algo && r.rate == rate) return &r;
  return nullptr;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

namespace {

struct TrialResult {
  // [algo][rate index]
  std::vector<std::vector<double>> estimate;
  std::vector<std::vector<std::size_t>> violations;
};

// Instance constants that determine the bound columns.
struct Constants {
  double smoothness;
  double convexity;
  Eigen::Index n;
  std::vector<double> worker_smoothness;
};

struct Instance {
  std::optional<problems::Objective<double>> single;
  std::optional<problems::MultiWorkerProblem<double>> multi;

  Constants constants() const {
    if (single) return {single->smoothness, single->convexity, single->dimension(), {single->smoothness}};
    std::vector<double> ls;
    for (const auto& w : multi->workers) ls.push_back(w.smoothness);
    return {multi->smoothness(), multi->convexity(), multi->dimension(), ls};
  }
};

Instance make_instance(const ExperimentConfig& c, const Eigen::MatrixXd* matrix, int trial) {
  const auto seed = derive_seed(c.seed, static_cast<std::uint64_t>(trial));
  Instance inst;
  switch (c.source) {
    case ExperimentConfig::Source::gaussian:
      inst.single = problems::make_gaussian_ls<double>(c.m, c.n, c.kappa, seed);
      break;
    case ExperimentConfig::Source::mtx:
      inst.single = problems::make_objective<double>(*matrix, seed);
      break;
    case ExperimentConfig::Source::interpolation: {
      problems::InterpolationOptions opt{c.worker_smoothness, c.shared_basis};
      inst.multi = problems::make_interpolation_problem<double>(c.workers, c.n, c.m,
                                                                c.worker_kappas, seed, opt);
      break;
    }
  }
  return inst;
}

RunRecord run_on(const Instance& inst, Algo algo, int rate, const RunOptions& o) {
  return inst.single ? run_algorithm(algo, *inst.single, rate, o)
                     : run_algorithm(algo, *inst.multi, rate, o);
}

double bound_for(Algo algo, const Constants& k, int rate, const ExperimentConfig& c) {
  const double kappa = k.smoothness / k.convexity;
  const double rho = std::sqrt(static_cast<double>(k.n));
  if (algo == Algo::nq_gd) {
    std::vector<int> rates;
    if (k.worker_smoothness.size() == 1) {
      rates = {rate};
    } else {
      rates = c.run.allocation == RateAllocation::waterfilling
                  ? engines::waterfill_integer(k.worker_smoothness, rate)
                  : engines::uniform_rates(k.worker_smoothness.size(), rate);
    }
    const std::vector<double> r(rates.begin(), rates.end());
    const auto hp = engines::optimal_hyperparams(k.smoothness, k.convexity, engines::Method::gd);
    return bounds::clip_unit(bounds::nq_gd_sigma(hp.sigma, hp.eta, rho, k.worker_smoothness, r));
  }
  return bounds::clip_unit(bounds::achievable_rate(scheme(algo), kappa, rate, rho));
}

}  // namespace

SweepTable run_sweep(const ExperimentConfig& config) {
  config.validate();
  std::optional<Eigen::MatrixXd> matrix;
  if (config.source == ExperimentConfig::Source::mtx)
    matrix = problems::load_matrix_market(config.mtx_path);

  const std::size_t algos = config.algos.size();
  const std::size_t rates = config.rates.size();
  std::vector<TrialResult> results(static_cast<std::size_t>(config.trials));
  std::vector<Constants> constants(static_cast<std::size_t>(config.trials));

  std::atomic<int> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  int failed_trial = -1;
  auto work = [&] {
    for (int trial = next++; trial < config.trials; trial = next++) {
      try {
        const Instance inst = make_instance(config, matrix ? &*matrix : nullptr, trial);
        TrialResult tr;
        tr.estimate.assign(algos, std::vector<double>(rates, 1.0));
        tr.violations.assign(algos, std::vector<std::size_t>(rates, 0));
        for (std::size_t a = 0; a < algos; ++a) {
          const Algo algo = config.algos[a];
          std::optional<RunRecord> shared;
          for (std::size_t r = 0; r < rates; ++r) {
            // Unquantized methods do not depend on R: run once.
            if (!is_quantized(algo) && shared) {
              tr.estimate[a][r] = shared->estimate;
              continue;
            }
            RunRecord rec = run_on(inst, algo, config.rates[r], config.run);
            if (!rec.estimated)
              throw InsufficientData(name(algo) + " at R = " + std::to_string(config.rates[r]) +
                                     " stopped after " + std::to_string(rec.iterations()) +
                                     " iterations");
            tr.estimate[a][r] = rec.estimate;
            tr.violations[a][r] = rec.violations;
            if (!is_quantized(algo)) shared = std::move(rec);
          }
        }
        constants[static_cast<std::size_t>(trial)] = inst.constants();
        results[static_cast<std::size_t>(trial)] = std::move(tr);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure || trial < failed_trial) {
          failure = std::current_exception();
          failed_trial = trial;
        }
      }
    }
  };
  unsigned threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp(threads, 1U, static_cast<unsigned>(config.trials));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw std::runtime_error(config.name + ": trial " + std::to_string(failed_trial) + ": " +
                               e.what());
    }
  }

  // Bound columns come from the first trial's constants; for the gaussian and
  // interpolation sources these are fixed by construction.
  const Constants& k = constants.front();
  const double kappa = k.smoothness / k.convexity;
  SweepTable table{config.name, {}};
  for (std::size_t a = 0; a < algos; ++a) {
    const Algo algo = config.algos[a];
    for (std::size_t r = 0; r < rates; ++r) {
      std::vector<double> sample;
      std::size_t violations = 0;
      for (const auto& tr : results) {
        sample.push_back(tr.estimate[a][r]);
        violations += tr.violations[a][r];
      }
      double mean = 0.0;
      for (double v : sample) mean += v;
      mean /= static_cast<double>(sample.size());
      const int rate = config.rates[r];
      table.rows.push_back({algo, rate, mean, percentile(sample, 5.0), percentile(sample, 95.0),
                            bound_for(algo, k, rate, config),
                            bounds::sigma(scheme(algo), kappa),
                            bounds::converse_curve(bounds::converse_family(scheme(algo)), kappa, rate),
                            violations});
    }
  }
  return table;
}

}  // namespace dqgm::harness
