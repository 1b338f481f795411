#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dqgm/engines.hpp"

namespace dqgm::verify {

struct Check {
  std::string name;
  double value;      ///< measured quantity (deviation or violation count)
  double tolerance;  ///< pass iff value <= tolerance
  std::string detail;

  bool pass() const { return value <= tolerance; }
};

/// Largest |x_hat_t - (x_t - eta e_{t-1})| (and the AGD analogues) between a
/// DQ run and its unquantized twin over `instances` random least-squares
/// problems of `iterations` rounds each.
Check tracking(engines::DqScheme scheme, int instances, int iterations, std::uint64_t seed);

/// Number of rounds with ||u_t|| > r_t over `runs` random DQ runs. The
/// heavy-ball schedule uses exponent `hb_alpha`.
Check containment(int runs, int iterations, double hb_alpha, std::uint64_t seed);

/// Largest |d_{t+1} / d_t - sigma_GD| of GD on the worst-case instance.
Check worst_case_gd(double kappa, long n, std::uint64_t seed);

/// Tracking for all DQ schemes, containment and worst-case equality.
std::vector<Check> invariant_suite(std::uint64_t seed, int scale = 1);

}  // namespace dqgm::verify
