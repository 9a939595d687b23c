#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsqr {

/// Clamped B-spline basis on [0,1] with equidistant interior knots.
///
/// A basis of degree m with p segments has p + m functions. The knot vector
/// repeats 0 and 1 (m + 1) times each and places interior knots at i/p.
class BasisConfig {
 public:
  static constexpr int kMaxDegree = 7;

  BasisConfig(int degree, int segments);

  int degree() const { return degree_; }
  int segments() const { return segments_; }
  std::size_t size() const { return static_cast<std::size_t>(segments_ + degree_); }
  std::span<const double> knots() const { return knots_; }

  /// Knot span index s with t_s <= u < t_{s+1}; u == 1 maps to the last non-empty span.
  std::size_t find_span(double u) const;

  /// Writes the degree + 1 basis values that can be nonzero at u into `out`
  /// and returns the index of the first of them.
  std::size_t nonzero_basis(double u, std::span<double> out) const;

  /// Knot averages; a curve with these coefficients is the identity map.
  std::vector<double> greville() const;

  /// Factors m / (t_{j+m+1} - t_{j+1}) mapping coefficient differences to the
  /// coefficients of the derivative curve. Empty for degree 0.
  std::span<const double> derivative_scale() const { return derivative_scale_; }

  /// Basis of degree m - 1 on the same breakpoints.
  BasisConfig lowered() const;

  friend bool operator==(const BasisConfig& a, const BasisConfig& b) {
    return a.degree_ == b.degree_ && a.segments_ == b.segments_;
  }

 private:
  int degree_;
  int segments_;
  std::vector<double> knots_;
  std::vector<double> derivative_scale_;
};

/// All p + m basis values at u in [0,1].
std::vector<double> basis_eval(const BasisConfig& basis, double u);

/// Evaluates sum_j coefs[j] B_j(u) using only the nonzero basis functions.
double spline_value(const BasisConfig& basis, std::span<const double> coefs, double u);

/// Derivative of the spline at u, computed from coefficient differences.
double spline_derivative(const BasisConfig& basis, std::span<const double> coefs, double u);

/// Inverse of a monotone spline running from 0 to 1. Quadratic splines are
/// solved in closed form on the bracketing knot interval; other degrees use
/// bisection. Returns the leftmost solution if the curve is flat at y.
double spline_inverse(const BasisConfig& basis, std::span<const double> coefs, double y);

struct SplineCurve {
  BasisConfig basis;
  std::vector<double> coefficients;

  SplineCurve(BasisConfig b, std::vector<double> c);
};

double curve_eval(const SplineCurve& curve, double u);

/// Exact derivative as a spline of one degree lower.
SplineCurve derivative_curve(const SplineCurve& curve);

double invert_monotone(const SplineCurve& curve, double y);

}  // namespace bsqr
