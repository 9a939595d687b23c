#include "bsqr/bspline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bsqr/error.hpp"

namespace bsqr {

namespace {

void check_unit(double u, const char* what) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError(std::string(what) + ": argument " + std::to_string(u) + " outside [0,1]");
  }
}

void check_length(const BasisConfig& basis, std::span<const double> coefs) {
  if (coefs.size() != basis.size()) {
    throw ShapeError("spline has " + std::to_string(coefs.size()) + " coefficients, basis has " +
                     std::to_string(basis.size()));
  }
}

// Coefficients must run monotonically from 0 to 1.
void check_monotone_unit(std::span<const double> coefs) {
  constexpr double tol = 1e-10;
  if (std::abs(coefs.front()) > tol || std::abs(coefs.back() - 1.0) > tol) {
    throw ContractError("monotone spline must have first coefficient 0 and last 1");
  }
  for (std::size_t j = 1; j < coefs.size(); ++j) {
    if (coefs[j] < coefs[j - 1]) {
      throw ContractError("spline coefficients are not non-decreasing at index " +
                          std::to_string(j));
    }
  }
}

}  // namespace

BasisConfig::BasisConfig(int degree, int segments) : degree_(degree), segments_(segments) {
  if (degree < 0 || degree > kMaxDegree) {
    throw DomainError("B-spline degree must lie in [0, " + std::to_string(kMaxDegree) + "]");
  }
  if (segments < 1) throw DomainError("B-spline needs at least one segment");

  knots_.reserve(static_cast<std::size_t>(segments + 2 * degree + 1));
  for (int i = 0; i <= degree; ++i) knots_.push_back(0.0);
  for (int i = 1; i < segments; ++i) knots_.push_back(static_cast<double>(i) / segments);
  for (int i = 0; i <= degree; ++i) knots_.push_back(1.0);

  if (degree > 0) {
    const std::size_t n = size();
    derivative_scale_.resize(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
      derivative_scale_[j] = degree / (knots_[j + degree + 1] - knots_[j + 1]);
    }
  }
}

std::size_t BasisConfig::find_span(double u) const {
  const auto m = static_cast<std::size_t>(degree_);
  const std::size_t n = size();
  if (u >= 1.0) return n - 1;
  // First knot strictly greater than u, searched among the breakpoints.
  auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(m),
                             knots_.begin() + static_cast<std::ptrdiff_t>(n) + 1, u);
  return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

// Cox-de Boor recursion in triangular form.
std::size_t BasisConfig::nonzero_basis(double u, std::span<double> out) const {
  const auto m = static_cast<std::size_t>(degree_);
  const std::size_t span = find_span(u);
  std::array<double, kMaxDegree + 1> left{};
  std::array<double, kMaxDegree + 1> right{};
  out[0] = 1.0;
  for (std::size_t j = 1; j <= m; ++j) {
    left[j] = u - knots_[span + 1 - j];
    right[j] = knots_[span + j] - u;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
  return span - m;
}

std::vector<double> BasisConfig::greville() const {
  std::vector<double> g(size(), 0.0);
  if (degree_ == 0) {
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = 0.5 * (knots_[j] + knots_[j + 1]);
    return g;
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    double s = 0.0;
    for (int k = 1; k <= degree_; ++k) s += knots_[j + static_cast<std::size_t>(k)];
    g[j] = s / degree_;
  }
  return g;
}

BasisConfig BasisConfig::lowered() const {
  if (degree_ == 0) throw DomainError("cannot lower a degree-0 basis");
  return BasisConfig(degree_ - 1, segments_);
}

std::vector<double> basis_eval(const BasisConfig& basis, double u) {
  check_unit(u, "basis_eval");
  std::vector<double> values(basis.size(), 0.0);
  std::array<double, BasisConfig::kMaxDegree + 1> local{};
  const std::size_t first = basis.nonzero_basis(u, local);
  for (int j = 0; j <= basis.degree(); ++j) values[first + static_cast<std::size_t>(j)] = local[j];
  return values;
}

double spline_value(const BasisConfig& basis, std::span<const double> coefs, double u) {
  check_length(basis, coefs);
  std::array<double, BasisConfig::kMaxDegree + 1> local{};
  const std::size_t first = basis.nonzero_basis(u, local);
  double s = 0.0;
  for (int j = 0; j <= basis.degree(); ++j) s += coefs[first + static_cast<std::size_t>(j)] * local[j];
  return s;
}

double spline_derivative(const BasisConfig& basis, std::span<const double> coefs, double u) {
  const int m = basis.degree();
  if (m == 0) throw DomainError("derivative of a degree-0 spline is not supported");
  check_length(basis, coefs);
  // Degree m-1 functions on the interior of the same knot vector, evaluated in place.
  const std::span<const double> knots = basis.knots();
  const std::span<const double> scale = basis.derivative_scale();
  const std::size_t span = basis.find_span(u);
  std::array<double, BasisConfig::kMaxDegree + 1> local{};
  std::array<double, BasisConfig::kMaxDegree + 1> left{};
  std::array<double, BasisConfig::kMaxDegree + 1> right{};
  local[0] = 1.0;
  const auto lower = static_cast<std::size_t>(m - 1);
  for (std::size_t j = 1; j <= lower; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double tmp = local[r] / (right[r + 1] + left[j - r]);
      local[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    local[j] = saved;
  }
  // local[r] multiplies B_{span-m+1+r, m-1} on the full knot vector, which pairs
  // with the coefficient difference c_{i+1} - c_i for i = span - m + r.
  const std::size_t first = span - static_cast<std::size_t>(m);
  double s = 0.0;
  for (std::size_t r = 0; r <= lower; ++r) {
    const std::size_t i = first + r;
    s += local[r] * scale[i] * (coefs[i + 1] - coefs[i]);
  }
  return s;
}

double spline_inverse(const BasisConfig& basis, std::span<const double> coefs, double y) {
  check_length(basis, coefs);
  check_unit(y, "invert_monotone");
  check_monotone_unit(coefs);

  if (y <= coefs.front()) return 0.0;
  if (y >= coefs.back()) return 1.0;

  const int p = basis.segments();
  if (basis.degree() != 2) {
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      if (spline_value(basis, coefs, mid) < y) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return hi;
  }

  // Leftmost breakpoint interval [k/p, (k+1)/p] whose right end reaches y.
  int lo = 0;
  int hi = p - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    const double right_value = spline_value(basis, coefs, static_cast<double>(mid + 1) / p);
    if (right_value >= y) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const double a0 = static_cast<double>(lo) / p;
  const double h = 1.0 / p;
  const double v0 = spline_value(basis, coefs, a0);
  const double vh = spline_value(basis, coefs, a0 + 0.5 * h);
  const double v1 = (lo == p - 1) ? coefs.back() : spline_value(basis, coefs, a0 + h);

  // Piece on this interval is v0 + b s + a s^2 for s in [0,1].
  const double a = 2.0 * (v0 - 2.0 * vh + v1);
  const double b = v1 - v0 - a;
  const double target = y - v0;
  double s = 0.0;
  if (std::abs(a) < 1e-14) {
    s = b > 0.0 ? target / b : 0.0;
  } else {
    const double disc = std::max(0.0, b * b + 4.0 * a * target);
    const double root = std::sqrt(disc);
    // Increasing branch: the root where the slope 2as + b is non-negative.
    if (b >= 0.0) {
      s = (b + root) > 0.0 ? 2.0 * target / (b + root) : 0.0;
    } else {
      s = (root - b) / (2.0 * a);
    }
  }
  s = std::clamp(s, 0.0, 1.0);
  return std::min(1.0, a0 + s * h);
}

SplineCurve::SplineCurve(BasisConfig b, std::vector<double> c)
    : basis(std::move(b)), coefficients(std::move(c)) {
  check_length(basis, coefficients);
}

double curve_eval(const SplineCurve& curve, double u) {
  check_length(curve.basis, curve.coefficients);
  check_unit(u, "curve_eval");
  return spline_value(curve.basis, curve.coefficients, u);
}

SplineCurve derivative_curve(const SplineCurve& curve) {
  const BasisConfig& basis = curve.basis;
  if (basis.degree() == 0) throw DomainError("derivative of a degree-0 spline is not supported");
  const auto scale = basis.derivative_scale();
  std::vector<double> d(basis.size() - 1);
  for (std::size_t j = 0; j < d.size(); ++j) {
    d[j] = scale[j] * (curve.coefficients[j + 1] - curve.coefficients[j]);
  }
  return SplineCurve(basis.lowered(), std::move(d));
}

double invert_monotone(const SplineCurve& curve, double y) {
  return spline_inverse(curve.basis, curve.coefficients, y);
}

}  // namespace bsqr
