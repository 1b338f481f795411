#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "dqgm/problems.hpp"
#include "dqgm/rng.hpp"

using namespace dqgm;
using namespace dqgm::problems;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Extreme eigenvalues of A^T A by a dense symmetric eigensolver.
std::pair<double, double> gram_extremes(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.transpose() * a);
  return {es.eigenvalues().maxCoeff(), es.eigenvalues().minCoeff()};
}

// Largest eigenvalue of a symmetric PSD operator by power iteration.
template <typename Apply>
double power_iteration(Apply apply, Eigen::Index n, int iters = 3000) {
  Rng rng(77);
  VectorXd v = rng.normal_vector(n);
  v.normalize();
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    VectorXd w = apply(v);
    lambda = v.dot(w);
    v = w.normalized();
  }
  return lambda;
}

}  // namespace

TEST_CASE("gaussian instance hits the requested condition number") {
  for (double kappa : {1.5, 5.0, 25.0, 1000.0}) {
    const auto obj = make_gaussian_ls(32, 16, kappa, 123);
    const auto [hi, lo] = gram_extremes(obj.f.matrix());
    CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lo == doctest::Approx(1.0 / kappa).epsilon(1e-10));
    CHECK(obj.smoothness == doctest::Approx(hi).epsilon(1e-12));
    CHECK(obj.convexity == doctest::Approx(lo).epsilon(1e-10));
    CHECK(obj.condition() == doctest::Approx(kappa).epsilon(1e-10));
  }
}

TEST_CASE("gaussian instance optimum solves the normal equations") {
  const auto obj = make_gaussian_ls(40, 12, 10.0, 9);
  const MatrixXd& a = obj.f.matrix();
  const VectorXd normal = (a.transpose() * a).ldlt().solve(a.transpose() * obj.f.target());
  CHECK((normal - obj.optimum).norm() <= 1e-10 * normal.norm());
  CHECK(obj.f.gradient(obj.optimum).norm() <= 1e-10);
  CHECK(obj.distance == doctest::Approx((obj.optimum - obj.start).norm()).epsilon(1e-15));
}

TEST_CASE("instances are a pure function of the seed") {
  const auto a = make_gaussian_ls(20, 8, 5.0, 42);
  const auto b = make_gaussian_ls(20, 8, 5.0, 42);
  const auto c = make_gaussian_ls(20, 8, 5.0, 43);
  CHECK(a.f.matrix() == b.f.matrix());
  CHECK(a.start == b.start);
  CHECK(a.f.target() == b.f.target());
  CHECK(a.f.matrix() != c.f.matrix());
}

TEST_CASE("kappa = 1 gives an orthogonal-column instance") {
  const auto obj = make_gaussian_ls(10, 4, 1.0, 1);
  const auto [hi, lo] = gram_extremes(obj.f.matrix());
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lo == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("least-squares gradient agrees with central differences") {
  Rng rng(2);
  const auto obj = make_gaussian_ls(15, 6, 8.0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd x = rng.normal_vector(6);
    const VectorXd g = obj.f.gradient(x);
    for (Eigen::Index i = 0; i < 6; ++i) {
      const double h = 1e-5;
      VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double fd = (obj.f.value(xp) - obj.f.value(xm)) / (2 * h);
      CHECK(fd == doctest::Approx(g(i)).epsilon(1e-6));
    }
  }
}

TEST_CASE("worst-case instance for gradient descent") {
  Rng rng(31);
  for (double kappa : {2.0, 4.0, 10.0}) {
    for (Eigen::Index n : {2, 8}) {
      const double L = 2.0, mu = L / kappa, eta = 2.0 / (L + mu);
      const VectorXd start = rng.normal_vector(n);
      const auto obj = make_worst_case_gd<double>(start, L, mu, 1.5, eta);
      const auto [hi, lo] = gram_extremes(obj.f.matrix());
      CHECK(hi == doctest::Approx(L).epsilon(1e-12));
      CHECK(lo == doctest::Approx(mu).epsilon(1e-12));
      CHECK((obj.optimum - start).norm() == doctest::Approx(1.5).epsilon(1e-14));
      // x_hat_0 - x* is an eigenvector of A^T A.
      const VectorXd e = start - obj.optimum;
      const VectorXd h = obj.f.matrix().transpose() * (obj.f.matrix() * e);
      const double ray = e.dot(h) / e.squaredNorm();
      CHECK((h - ray * e).norm() <= 1e-12 * h.norm());
      const VectorXd next = start - eta * obj.f.gradient(start);
      CHECK((next - obj.optimum).norm() / 1.5 ==
            doctest::Approx((kappa - 1) / (kappa + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("worst-case instance validates its arguments") {
  const VectorXd start = VectorXd::Ones(3);
  CHECK_THROWS_AS(make_worst_case_gd<double>(start, 1.0, 2.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(make_worst_case_gd<double>(start, 2.0, 1.0, 0.0, 0.5), DegenerateInstance);
  CHECK_THROWS_AS(make_worst_case_gd<double>(VectorXd::Ones(1), 2.0, 1.0, 1.0, 0.5), InvalidShape);
  CHECK_NOTHROW(make_worst_case_gd<double>(VectorXd::Zero(3), 2.0, 1.0, 1.0, 0.5));
}

TEST_CASE("generator argument validation") {
  CHECK_THROWS_AS(make_gaussian_ls(3, 4, 2.0, 1), InvalidShape);
  CHECK_THROWS_AS(make_gaussian_ls(4, 0, 2.0, 1), InvalidShape);
  CHECK_THROWS_AS(make_gaussian_ls(4, 2, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(LeastSquares<double>(MatrixXd::Ones(3, 2), VectorXd::Ones(2)), InvalidShape);
  CHECK_THROWS_AS(make_objective(MatrixXd(MatrixXd::Ones(3, 2)), 1), DegenerateInstance);
}

TEST_CASE("interpolation workers share the global minimizer") {
  const std::vector<double> kappas{2.0, 5.0, 9.0};
  InterpolationOptions opts;
  opts.smoothness = {4.0, 1.0, 2.0};
  const auto p = make_interpolation_problem(3, 6, 10, kappas, 17, opts);
  REQUIRE(p.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& w = p.workers[k];
    CHECK(w.gradient(p.optimum).norm() == 0.0);
    const auto [hi, lo] = gram_extremes(w.a);
    CHECK(hi == doctest::Approx(opts.smoothness[k]).epsilon(1e-12));
    CHECK(hi / lo == doctest::Approx(kappas[k]).epsilon(1e-10));
  }
  CHECK(p.gradient(p.optimum).norm() == 0.0);
}

TEST_CASE("average smoothness bounds the smoothness of the average objective") {
  for (bool shared : {false, true}) {
    InterpolationOptions opts;
    opts.smoothness = {4.0, 1.0};
    opts.shared_basis = shared;
    const auto p = make_interpolation_problem(2, 8, 12, {3.0, 3.0}, 5, opts);
    const double l_avg = power_iteration(
        [&](const VectorXd& v) { return VectorXd(p.gradient(p.optimum + v)); }, 8);
    CHECK(l_avg <= p.smoothness() * (1 + 1e-9));
    if (shared) CHECK(l_avg == doctest::Approx(p.smoothness()).epsilon(1e-6));
  }
}

TEST_CASE("matrix market coordinate general") {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real general\n"
      "% a comment\n"
      "3 2 3\n"
      "1 1 1.5\n"
      "3 2 -2e0\n"
      "2 1 4\n");
  const MatrixXd m = parse_matrix_market(in);
  MatrixXd expect(3, 2);
  expect << 1.5, 0, 4, 0, 0, -2;
  CHECK(m == expect);
}

TEST_CASE("matrix market symmetric, pattern and array variants") {
  std::istringstream sym(
      "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 3\n2 1 5\n");
  MatrixXd s(2, 2);
  s << 3, 5, 5, 0;
  CHECK(parse_matrix_market(sym) == s);

  std::istringstream pat("%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n");
  MatrixXd p(2, 3);
  p << 0, 0, 1, 1, 0, 0;
  CHECK(parse_matrix_market(pat) == p);

  std::istringstream arr("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  MatrixXd a(2, 2);
  a << 1, 3, 2, 4;  // column-major
  CHECK(parse_matrix_market(arr) == a);

  std::istringstream integer("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n");
  CHECK(parse_matrix_market(integer)(0, 0) == 7.0);
}

TEST_CASE("matrix market errors carry line numbers") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_matrix_market(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n") == 3);
  CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n") > 0);
  CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n") == 3);
  CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 x 1\n") == 2);
  CHECK(line_of("not a header\n") == 1);
  CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 2\n") == 4);
  std::istringstream complex("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n");
  CHECK_THROWS_AS(parse_matrix_market(complex), UnsupportedField);
  CHECK_THROWS(load_matrix_market("/nonexistent/file.mtx"));
}

TEST_CASE("matrix market file feeds an objective") {
  Rng rng(3);
  const MatrixXd a = rng.normal_matrix(20, 5);
  std::ostringstream out;
  out << "%%MatrixMarket matrix coordinate real general\n20 5 100\n";
  out.precision(17);
  for (Eigen::Index j = 0; j < 5; ++j)
    for (Eigen::Index i = 0; i < 20; ++i) out << i + 1 << ' ' << j + 1 << ' ' << a(i, j) << '\n';
  std::istringstream in(out.str());
  const MatrixXd loaded = parse_matrix_market(in);
  CHECK(loaded == a);
  const auto obj = make_objective(loaded, 11);
  const auto [hi, lo] = gram_extremes(a);
  CHECK(obj.smoothness == doctest::Approx(hi).epsilon(1e-12));
  CHECK(obj.convexity == doctest::Approx(lo).epsilon(1e-10));
}

TEST_CASE("single precision instance") {
  const auto obj = make_gaussian_ls<float>(16, 4, 4.0, 3);
  CHECK(obj.condition() == doctest::Approx(4.0).epsilon(1e-4));
  CHECK(obj.f.gradient(obj.optimum).norm() <= 1e-4f);
}
