#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dqgm/rng.hpp"

namespace dqgm::problems {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class InvalidShape : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateInstance : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anything that maps a point to a gradient of the same dimension.
template <typename O, typename Scalar>
concept GradientOracle = requires(const O& o, const Vector<Scalar>& x) {
  { o.gradient(x) } -> std::convertible_to<Vector<Scalar>>;
  { o.dimension() } -> std::convertible_to<Eigen::Index>;
};

/// f(x) = 1/2 ||A x - y||^2.
template <typename Scalar>
class LeastSquares {
 public:
  LeastSquares(Matrix<Scalar> a, Vector<Scalar> y) : a_(std::move(a)), y_(std::move(y)) {
    if (a_.rows() != y_.size()) throw InvalidShape("A and y have different row counts");
    if (a_.cols() < 1) throw InvalidShape("A must have at least one column");
  }

  const Matrix<Scalar>& matrix() const { return a_; }
  const Vector<Scalar>& target() const { return y_; }
  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index dimension() const { return a_.cols(); }

  Scalar value(const Eigen::Ref<const Vector<Scalar>>& x) const {
    return Scalar(0.5) * (a_ * x - y_).squaredNorm();
  }

  Vector<Scalar> gradient(const Eigen::Ref<const Vector<Scalar>>& x) const {
    return a_.transpose() * (a_ * x - y_);
  }

 private:
  Matrix<Scalar> a_;
  Vector<Scalar> y_;
};

/// A least-squares objective with its constants and a starting point.
template <typename Scalar>
struct Objective {
  LeastSquares<Scalar> f;
  Scalar smoothness;  ///< L
  Scalar convexity;   ///< mu
  Vector<Scalar> optimum;
  Vector<Scalar> start;
  Scalar distance;  ///< D >= ||x* - x_hat_0||

  Eigen::Index dimension() const { return f.dimension(); }
  Scalar condition() const { return smoothness / convexity; }
  Vector<Scalar> gradient(const Eigen::Ref<const Vector<Scalar>>& x) const {
    return f.gradient(x);
  }
};

/// Squared extreme singular values and the least-squares solution of A x = y.
template <typename Scalar>
struct Spectrum {
  Scalar smoothness;
  Scalar convexity;
  Vector<Scalar> solution;
};

template <typename Scalar>
Spectrum<Scalar> analyze(const Matrix<Scalar>& a, const Vector<Scalar>& y) {
  if (a.rows() < a.cols()) throw InvalidShape("need m >= n");
  Eigen::JacobiSVD<Matrix<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Scalar smin = s(s.size() - 1);
  // Numerical rank test relative to the largest singular value.
  const Scalar tol = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(a.rows()) * s(0);
  if (!(smin > tol)) throw DegenerateInstance("A does not have full column rank");
  Vector<Scalar> x = svd.matrixV() *
                     (svd.matrixU().transpose() * y).cwiseQuotient(s);
  return {s(0) * s(0), smin * smin, std::move(x)};
}

template <typename Scalar>
Objective<Scalar> make_objective(Matrix<Scalar> a, Vector<Scalar> y, Vector<Scalar> start) {
  if (start.size() != a.cols()) throw InvalidShape("starting point has wrong dimension");
  auto sp = analyze(a, y);
  const Scalar d = (sp.solution - start).norm();
  return {LeastSquares<Scalar>(std::move(a), std::move(y)), sp.smoothness, sp.convexity,
          std::move(sp.solution), std::move(start), d};
}

/// Objective for a fixed matrix with y and x_hat_0 drawn i.i.d. standard normal.
template <typename Scalar>
Objective<Scalar> make_objective(Matrix<Scalar> a, std::uint64_t seed) {
  Rng rng(seed);
  Vector<Scalar> y = rng.normal_vector<Scalar>(a.rows());
  Vector<Scalar> start = rng.normal_vector<Scalar>(a.cols());
  return make_objective(std::move(a), std::move(y), std::move(start));
}

/// Gaussian least squares with the singular values of A mapped affinely onto
/// [1/sqrt(kappa), 1], so L = 1 and mu = 1/kappa. Draw order: A (row-major),
/// then y, then x_hat_0.
template <typename Scalar = double>
Objective<Scalar> make_gaussian_ls(Eigen::Index m, Eigen::Index n, double kappa,
                                   std::uint64_t seed) {
  if (n < 1 || m < n) throw InvalidShape("need m >= n >= 1");
  if (!(kappa >= 1.0) || !std::isfinite(kappa))
    throw std::invalid_argument("condition number must be finite and >= 1");
  Rng rng(seed);
  Matrix<Scalar> a = rng.normal_matrix<Scalar>(m, n);
  Vector<Scalar> y = rng.normal_vector<Scalar>(m);
  Vector<Scalar> start = rng.normal_vector<Scalar>(n);

  Eigen::JacobiSVD<Matrix<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector<Scalar> s = svd.singularValues();
  const Scalar lo = Scalar(1) / std::sqrt(static_cast<Scalar>(kappa));
  const Scalar smax = s(0);
  const Scalar smin = s(n - 1);
  Vector<Scalar> t(n);
  if (smax == smin) {
    if (kappa != 1.0) throw DegenerateInstance("all singular values coincide; cannot reach kappa");
    t.setOnes();
  } else {
    for (Eigen::Index i = 0; i < n; ++i) t(i) = lo + (s(i) - smin) * (Scalar(1) - lo) / (smax - smin);
    t(0) = Scalar(1);
    t(n - 1) = lo;
  }
  const auto& u = svd.matrixU();
  const auto& v = svd.matrixV();
  Matrix<Scalar> remapped = u * t.asDiagonal() * v.transpose();
  Vector<Scalar> optimum = v * (u.transpose() * y).cwiseQuotient(t);
  const Scalar d = (optimum - start).norm();
  return {LeastSquares<Scalar>(std::move(remapped), std::move(y)), t(0) * t(0),
          t(n - 1) * t(n - 1), std::move(optimum), std::move(start), d};
}

/// Square instance on which GD with stepsize eta contracts by exactly
/// max{|1 - eta mu|, |1 - eta L|} per step from x_hat_0. The direction
/// x_hat_0 - x* is a right singular vector for whichever extreme eigenvalue
/// attains that maximum; x* sits at distance exactly D.
template <typename Scalar = double>
Objective<Scalar> make_worst_case_gd(const Vector<Scalar>& start, Scalar smoothness,
                                     Scalar convexity, Scalar distance, Scalar eta) {
  if (!(convexity > Scalar(0)) || !(smoothness >= convexity))
    throw std::invalid_argument("need L >= mu > 0");
  if (!(eta > Scalar(0))) throw std::invalid_argument("stepsize must be positive");
  if (!(distance > Scalar(0))) throw DegenerateInstance("D = 0 leaves no direction to x*");
  const Eigen::Index n = start.size();
  if (n < 1) throw InvalidShape("dimension must be >= 1");
  if (n < 2 && smoothness != convexity)
    throw InvalidShape("need n >= 2 to realize both L and mu");

  Vector<Scalar> v1 = Vector<Scalar>::Zero(n);
  const Scalar norm = start.norm();
  if (norm > Scalar(0)) {
    v1 = start / norm;
  } else {
    v1(0) = Scalar(1);
  }
  Eigen::HouseholderQR<Matrix<Scalar>> qr(v1);
  Matrix<Scalar> basis = qr.householderQ() * Matrix<Scalar>::Identity(n, n);
  basis.col(0) = v1;

  const Scalar hi = std::sqrt(smoothness);
  const Scalar lo = std::sqrt(convexity);
  const bool top = std::abs(Scalar(1) - eta * smoothness) >= std::abs(Scalar(1) - eta * convexity);
  Vector<Scalar> s(n);
  s(0) = top ? hi : lo;
  if (n > 1) s(1) = top ? lo : hi;
  for (Eigen::Index i = 2; i < n; ++i)
    s(i) = lo + (hi - lo) * static_cast<Scalar>(i - 1) / static_cast<Scalar>(n - 1);

  Matrix<Scalar> a = s.asDiagonal() * basis.transpose();
  Vector<Scalar> optimum = start - distance * v1;
  Vector<Scalar> y = a * optimum;
  return {LeastSquares<Scalar>(std::move(a), std::move(y)), smoothness, convexity,
          std::move(optimum), start, distance};
}

/// f_k(x) = 1/2 ||A_k (x - x*)||^2: every local objective is minimized at x*.
template <typename Scalar>
struct WorkerObjective {
  Matrix<Scalar> a;
  Vector<Scalar> optimum;
  Scalar smoothness;
  Scalar convexity;

  Eigen::Index dimension() const { return a.cols(); }
  Vector<Scalar> gradient(const Eigen::Ref<const Vector<Scalar>>& x) const {
    return a.transpose() * (a * (x - optimum));
  }
};

template <typename Scalar>
struct MultiWorkerProblem {
  std::vector<WorkerObjective<Scalar>> workers;
  Vector<Scalar> optimum;
  Vector<Scalar> start;
  Scalar distance;

  Eigen::Index dimension() const { return optimum.size(); }
  std::size_t size() const { return workers.size(); }

  /// (1/K) sum_k L_k.
  Scalar smoothness() const {
    Scalar s(0);
    for (const auto& w : workers) s += w.smoothness;
    return s / static_cast<Scalar>(workers.size());
  }

  /// (1/K) sum_k mu_k.
  Scalar convexity() const {
    Scalar s(0);
    for (const auto& w : workers) s += w.convexity;
    return s / static_cast<Scalar>(workers.size());
  }

  /// Gradient of the average objective.
  Vector<Scalar> gradient(const Eigen::Ref<const Vector<Scalar>>& x) const {
    Vector<Scalar> g = Vector<Scalar>::Zero(x.size());
    for (const auto& w : workers) g += w.gradient(x);
    return g / static_cast<Scalar>(workers.size());
  }
};

struct InterpolationOptions {
  std::vector<double> smoothness;  ///< L_k; empty means all ones
  bool shared_basis = false;       ///< all A_k share right singular vectors
};

/// K workers with A_k of size m_k x n; worker k has spectrum mapped onto
/// [sqrt(L_k / kappa_k), sqrt(L_k)]. With a shared basis the largest singular
/// values of all workers align, so L and mu of the average are the averages.
template <typename Scalar = double>
MultiWorkerProblem<Scalar> make_interpolation_problem(std::size_t workers, Eigen::Index n,
                                                      Eigen::Index rows,
                                                      const std::vector<double>& kappas,
                                                      std::uint64_t seed,
                                                      const InterpolationOptions& options = {}) {
  if (workers < 1) throw InvalidShape("need at least one worker");
  if (n < 1 || rows < n) throw InvalidShape("need m_k >= n >= 1");
  if (kappas.size() != workers) throw InvalidShape("need one condition number per worker");
  if (!options.smoothness.empty() && options.smoothness.size() != workers)
    throw InvalidShape("need one smoothness constant per worker");
  Rng rng(seed);
  MultiWorkerProblem<Scalar> p;
  p.optimum = rng.normal_vector<Scalar>(n);
  p.start = rng.normal_vector<Scalar>(n);
  p.distance = (p.optimum - p.start).norm();

  Matrix<Scalar> shared;
  if (options.shared_basis) {
    Eigen::HouseholderQR<Matrix<Scalar>> qr(rng.normal_matrix<Scalar>(n, n));
    shared = qr.householderQ() * Matrix<Scalar>::Identity(n, n);
  }
  for (std::size_t k = 0; k < workers; ++k) {
    const double kappa = kappas[k];
    if (!(kappa >= 1.0)) throw std::invalid_argument("condition numbers must be >= 1");
    const Scalar l = options.smoothness.empty() ? Scalar(1)
                                                : static_cast<Scalar>(options.smoothness[k]);
    if (!(l > Scalar(0))) throw std::invalid_argument("smoothness constants must be positive");
    const Scalar hi = std::sqrt(l);
    const Scalar lo = hi / std::sqrt(static_cast<Scalar>(kappa));

    Matrix<Scalar> g = rng.normal_matrix<Scalar>(rows, n);
    Eigen::JacobiSVD<Matrix<Scalar>> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector<Scalar> t(n);
    if (n == 1) {
      t(0) = hi;
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        t(i) = hi - (hi - lo) * static_cast<Scalar>(i) / static_cast<Scalar>(n - 1);
    }
    const Matrix<Scalar> right = options.shared_basis ? shared : Matrix<Scalar>(svd.matrixV());
    Matrix<Scalar> a = svd.matrixU() * t.asDiagonal() * right.transpose();
    p.workers.push_back({std::move(a), p.optimum, t(0) * t(0), t(n - 1) * t(n - 1)});
  }
  return p;
}

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedField : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a MatrixMarket file (coordinate or array, real/integer/pattern field,
/// general or symmetric) into a dense matrix.
Eigen::MatrixXd load_matrix_market(const std::filesystem::path& path);
Eigen::MatrixXd parse_matrix_market(std::istream& in);

}  // namespace dqgm::problems
