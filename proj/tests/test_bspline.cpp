#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bsqr/bspline.hpp"
#include "bsqr/error.hpp"

using bsqr::BasisConfig;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> clamped_knots(int m, int p) {
  std::vector<double> t;
  for (int i = 0; i < m; ++i) t.push_back(0.0);
  for (int i = 0; i <= p; ++i) t.push_back(static_cast<double>(i) / p);
  for (int i = 0; i < m; ++i) t.push_back(1.0);
  return t;
}

// Textbook recursion with 0/0 := 0; the right end belongs to the last span.
double naive_basis(const std::vector<double>& t, int j, int m, double u) {
  if (m == 0) {
    if (t[j] <= u && u < t[j + 1]) return 1.0;
    const bool last_span = u == t.back() && t[j] < t[j + 1] && t[j + 1] == t.back();
    return last_span ? 1.0 : 0.0;
  }
  double left = 0.0;
  double right = 0.0;
  if (t[j + m] > t[j]) left = (u - t[j]) / (t[j + m] - t[j]) * naive_basis(t, j, m - 1, u);
  if (t[j + m + 1] > t[j + 1]) right = (t[j + m + 1] - u) / (t[j + m + 1] - t[j + 1]) * naive_basis(t, j + 1, m - 1, u);
  return left + right;
}

std::vector<double> increasing_coefs(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gap(0.05, 1.0);
  std::vector<double> c(n, 0.0);
  for (std::size_t j = 1; j < n; ++j) c[j] = c[j - 1] + gap(rng);
  for (double& v : c) v /= c.back();
  return c;
}

double bisect(const BasisConfig& b, const std::vector<double>& c, double y) {
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (bsqr::spline_value(b, c, mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

bool near_knot(double u, int p, double h) {
  const double s = u * p;
  return std::abs(s - std::round(s)) < 2.0 * h * p;
}

}  // namespace

TEST_CASE("basis values at documented points") {
  const auto at_zero = bsqr::basis_eval(BasisConfig(2, 3), 0.0);
  REQUIRE(at_zero.size() == 5);
  const double expected0[] = {1, 0, 0, 0, 0};
  for (std::size_t j = 0; j < 5; ++j) CHECK_THAT(at_zero[j], WithinAbs(expected0[j], 1e-15));

  const auto linear = bsqr::basis_eval(BasisConfig(1, 2), 0.25);
  REQUIRE(linear.size() == 3);
  CHECK_THAT(linear[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(linear[1], WithinAbs(0.5, 1e-15));
  CHECK_THAT(linear[2], WithinAbs(0.0, 1e-15));

  const auto at_one = bsqr::basis_eval(BasisConfig(3, 4), 1.0);
  CHECK_THAT(at_one.back(), WithinAbs(1.0, 1e-15));
}

TEST_CASE("basis matches the naive recursion and sums to one") {
  for (int m = 0; m <= 3; ++m) {
    for (int p = 1; p <= 10; ++p) {
      const BasisConfig b(m, p);
      const auto t = clamped_knots(m, p);
      for (int i = 0; i <= 400; ++i) {
        const double u = i / 400.0;
        const auto v = bsqr::basis_eval(b, u);
        REQUIRE(v.size() == static_cast<std::size_t>(p + m));
        double sum = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
          CHECK(v[j] >= 0.0);
          CHECK_THAT(v[j], WithinAbs(naive_basis(t, static_cast<int>(j), m, u), 1e-13));
          sum += v[j];
        }
        CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
      }
    }
  }
}

TEST_CASE("Greville coefficients reproduce the identity") {
  for (int m = 1; m <= 3; ++m) {
    for (int p = 3; p <= 10; ++p) {
      const BasisConfig b(m, p);
      const auto g = b.greville();
      CHECK(g.front() == 0.0);
      CHECK(g.back() == 1.0);
      for (int i = 0; i <= 97; ++i) {
        const double u = i / 97.0;
        CHECK_THAT(bsqr::spline_value(b, g, u), WithinAbs(u, 1e-13));
        CHECK_THAT(bsqr::spline_derivative(b, g, u), WithinAbs(1.0, 1e-11));
      }
    }
  }
}

TEST_CASE("derivative agrees with central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const double h = 1e-5;
  for (int m = 1; m <= 3; ++m) {
    for (int p = 3; p <= 10; ++p) {
      const BasisConfig b(m, p);
      std::vector<double> c(b.size());
      for (double& v : c) v = coef(rng);
      for (int i = 1; i < 300; ++i) {
        const double u = i / 300.0;
        if (near_knot(u, p, h)) continue;
        const double fd = (bsqr::spline_value(b, c, u + h) - bsqr::spline_value(b, c, u - h)) / (2 * h);
        CHECK_THAT(bsqr::spline_derivative(b, c, u), WithinAbs(fd, 1e-6));
      }
      // The lowered-degree curve is the same derivative.
      const bsqr::SplineCurve curve(b, c);
      const auto deriv = bsqr::derivative_curve(curve);
      CHECK(deriv.basis.degree() == m - 1);
      for (int i = 0; i <= 50; ++i) {
        const double u = (i + 0.37) / 51.0;
        CHECK_THAT(bsqr::curve_eval(deriv, u), WithinAbs(bsqr::spline_derivative(b, c, u), 1e-11));
      }
    }
  }
}

TEST_CASE("inversion agrees with bisection") {
  std::mt19937_64 rng(5);
  for (int m = 1; m <= 3; ++m) {
    for (int p = 3; p <= 10; ++p) {
      const BasisConfig b(m, p);
      const auto c = increasing_coefs(b.size(), rng);
      for (int i = 0; i <= 200; ++i) {
        const double y = i / 200.0;
        CHECK_THAT(bsqr::spline_inverse(b, c, y), WithinAbs(bisect(b, c, y), 1e-10));
      }
    }
  }
}

TEST_CASE("inversion round trip on a dense grid") {
  std::mt19937_64 rng(6);
  const BasisConfig b(2, 7);
  const bsqr::SplineCurve curve(b, increasing_coefs(b.size(), rng));
  for (int i = 0; i < 1000; ++i) {
    const double u = i / 999.0;
    CHECK_THAT(bsqr::invert_monotone(curve, bsqr::curve_eval(curve, u)), WithinAbs(u, 1e-10));
  }
}

TEST_CASE("inversion returns the leftmost point of a flat stretch") {
  const BasisConfig b(1, 4);
  const std::vector<double> c = {0.0, 0.5, 0.5, 0.5, 1.0};
  CHECK_THAT(bsqr::spline_inverse(b, c, 0.5), WithinAbs(0.25, 1e-10));
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(BasisConfig(2, 0), bsqr::DomainError);
  CHECK_THROWS_AS(BasisConfig(-1, 3), bsqr::DomainError);
  CHECK_THROWS_AS(BasisConfig(BasisConfig::kMaxDegree + 1, 3), bsqr::DomainError);
  const BasisConfig b(2, 3);
  CHECK_THROWS_AS(bsqr::basis_eval(b, -0.01), bsqr::DomainError);
  CHECK_THROWS_AS(bsqr::basis_eval(b, 1.01), bsqr::DomainError);
  CHECK_THROWS_AS(bsqr::spline_value(b, std::vector<double>(4, 0.0), 0.5), bsqr::ShapeError);
  const std::vector<double> decreasing = {1.0, 0.8, 0.5, 0.2, 0.0};
  CHECK_THROWS_AS(bsqr::spline_inverse(b, decreasing, 0.5), bsqr::ContractError);
  const std::vector<double> ok = {0.0, 0.2, 0.5, 0.8, 1.0};
  CHECK_THROWS_AS(bsqr::spline_inverse(b, ok, 1.5), bsqr::DomainError);
}
