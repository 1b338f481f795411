#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace dqgm::engines {

struct Allocation {
  double water_level;         ///< nu
  std::vector<double> rates;  ///< R_k = |log2(L_k / nu)|_+
};

/// Rate allocation minimizing sum_k L_k 2^{-R_k} subject to sum_k R_k = total.
/// Solved in closed form over the active set of the largest L_k.
inline Allocation waterfill(std::span<const double> smoothness, double total) {
  if (smoothness.empty()) throw std::invalid_argument("need at least one worker");
  for (double l : smoothness)
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("L_k must be positive");
  if (!(total >= 0.0)) throw std::invalid_argument("total rate must be nonnegative");

  std::vector<double> sorted(smoothness.begin(), smoothness.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double nu = sorted.front();
  if (total > 0.0) {
    double log_sum = 0.0;
    for (std::size_t j = 1; j <= sorted.size(); ++j) {
      log_sum += std::log2(sorted[j - 1]);
      const double log_nu = (log_sum - total) / static_cast<double>(j);
      const double next = j < sorted.size() ? std::log2(sorted[j]) : -INFINITY;
      if (log_nu >= next) {
        nu = std::exp2(log_nu);
        break;
      }
    }
  }
  Allocation a{nu, {}};
  a.rates.reserve(smoothness.size());
  for (double l : smoothness) a.rates.push_back(std::max(0.0, std::log2(l / nu)));
  return a;
}

/// Integer rates: each of the `total` bits goes to the worker with the
/// largest L_k 2^{-R_k} (lowest index on ties). Coincides with waterfill
/// whenever the continuous solution is integral.
inline std::vector<int> waterfill_integer(std::span<const double> smoothness, int total) {
  if (smoothness.empty()) throw std::invalid_argument("need at least one worker");
  if (total < 0) throw std::invalid_argument("total rate must be nonnegative");
  std::vector<int> rates(smoothness.size(), 0);
  for (int b = 0; b < total; ++b) {
    std::size_t best = 0;
    double best_value = -1.0;
    for (std::size_t k = 0; k < smoothness.size(); ++k) {
      const double v = std::ldexp(smoothness[k], -rates[k]);
      if (v > best_value) {
        best_value = v;
        best = k;
      }
    }
    ++rates[best];
  }
  return rates;
}

/// Equal split of `total` bits; the first total mod K workers get one extra.
inline std::vector<int> uniform_rates(std::size_t workers, int total) {
  if (workers < 1) throw std::invalid_argument("need at least one worker");
  if (total < 0) throw std::invalid_argument("total rate must be nonnegative");
  const int k = static_cast<int>(workers);
  std::vector<int> rates(workers, total / k);
  for (int i = 0; i < total % k; ++i) ++rates[static_cast<std::size_t>(i)];
  return rates;
}

}  // namespace dqgm::engines
