#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dqgm/bounds.hpp"
#include "dqgm/engines.hpp"
#include "dqgm/problems.hpp"

namespace dqgm::harness {

enum class Algo { gd, agd, hb, dq_gd, dq_agd, dq_hb, nq_gd };

std::string name(Algo a);
Algo parse_algo(const std::string& text);
bounds::Scheme scheme(Algo a);
bool is_quantized(Algo a);

enum class RateAllocation { uniform, waterfilling };

struct StopRule {
  long t_max = 10000;
  double floor = 1e-13;       ///< stop once ||x_hat_t - x*|| < floor max(1, D)
  double divergence = 1e12;   ///< give up once the distance exceeds divergence max(1, D)
};

struct RunOptions {
  StopRule stop;
  double alpha = 0.0;  ///< heavy-ball schedule exponent
  engines::Containment containment = engines::Containment::enforce;
  quant::QuantizerKind kind = quant::QuantizerKind::scalar_uniform;
  RateAllocation allocation = RateAllocation::uniform;
};

enum class Termination { converged, budget, diverged };

struct RunRecord {
  std::vector<double> distance;    ///< ||x_hat_t - x*||, t = 0..T
  std::vector<double> input_norm;  ///< max_k ||u_{t,k}|| per round (empty when unquantized)
  std::vector<double> range;       ///< max_k r_{t,k} per round
  std::vector<std::size_t> bits;   ///< uplink bits per round, summed over workers
  std::vector<int> rates;          ///< per-worker rates used
  std::size_t violations = 0;
  Termination termination = Termination::budget;
  double floor = 0.0;  ///< absolute precision floor used for this run
  double estimate = 1.0;      ///< tail estimate, clipped at 1
  double raw_estimate = 1.0;  ///< (d_T / d_0)^{1/T}
  bool estimated = false;

  long iterations() const { return static_cast<long>(distance.size()) - 1; }
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ContractionEstimate {
  double tail;  ///< geometric mean of per-step ratios over the last half of above-floor steps
  double raw;   ///< (d_T / d_0)^{1/T} over above-floor steps

  double reported() const { return bounds::clip_unit(tail); }
};

inline constexpr long kMinimumSteps = 10;

/// Estimates the contraction factor of a distance sequence. Requires at
/// least kMinimumSteps steps above `floor`. A diverged run reports 1.
ContractionEstimate estimate_contraction(std::span<const double> distance, double floor,
                                         bool diverged = false);
ContractionEstimate estimate_contraction(const RunRecord& record);

/// Runs one algorithm on a single-worker objective. `rate` is ignored for
/// unquantized methods and for the lossless quantizer kind.
RunRecord run_algorithm(Algo algo, const problems::Objective<double>& f, int rate,
                        const RunOptions& options = {});

/// Runs on a K-worker problem. NQ-GD uses all K workers with `rate` split per
/// options.allocation; the other algorithms see the average objective through
/// one worker at rate `rate`.
RunRecord run_algorithm(Algo algo, const problems::MultiWorkerProblem<double>& p, int rate,
                        const RunOptions& options = {});

struct ExperimentConfig {
  enum class Source { gaussian, mtx, interpolation };

  std::string name = "experiment";
  std::vector<Algo> algos{Algo::gd, Algo::dq_gd, Algo::nq_gd};
  Source source = Source::gaussian;
  long m = 32;
  long n = 16;
  double kappa = 5.0;
  std::filesystem::path mtx_path;
  std::vector<double> worker_kappas;      ///< interpolation: one per worker
  std::vector<double> worker_smoothness;  ///< interpolation: L_k (defaults to 1)
  bool shared_basis = false;
  int trials = 50;
  std::vector<int> rates{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  RunOptions run;
  unsigned threads = 0;  ///< 0 means hardware concurrency
  std::filesystem::path csv_path;
  std::filesystem::path svg_path;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads every [section] of an INI-style file as one experiment.
std::vector<ExperimentConfig> load_config(const std::filesystem::path& path);
std::vector<ExperimentConfig> parse_config(std::istream& in);

struct SweepRow {
  Algo algo;
  int rate;
  double emp_mean;
  double emp_p05;
  double emp_p95;
  double bound;              ///< achievable contraction factor, clipped at 1
  double unquantized_sigma;  ///< contraction factor of the base method
  double converse;           ///< lower bound for the method's family
  std::size_t violations;    ///< containment violations summed over trials
};

struct SweepTable {
  std::string name;
  std::vector<SweepRow> rows;

  const SweepRow* find(Algo algo, int rate) const;
};

/// Sweeps rates x algorithms over `trials` instances. Each trial draws its
/// instance from derive_seed(seed, trial) and reuses it for every (algo, R).
SweepTable run_sweep(const ExperimentConfig& config);

/// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

void emit_csv(const SweepTable& table, const std::filesystem::path& path);
void emit_csv(const SweepTable& table, std::ostream& out);
void emit_svg(const SweepTable& table, const std::filesystem::path& path);
void emit_svg(const SweepTable& table, std::ostream& out);

}  // namespace dqgm::harness
