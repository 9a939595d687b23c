#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsqr/error.hpp"
#include "bsqr/likelihood.hpp"

namespace bsqr {

/// Monotone map of one variable onto [0,1].
class Transform {
 public:
  enum class Kind { linear, loglinear, power_pareto };

  static Transform linear(double lo, double hi);
  /// (log v - log_lo) / (log_hi - log_lo)
  static Transform loglinear(double log_lo, double log_hi);
  /// 1 - (1 + (v / sigma)^k)^(-a)
  static Transform power_pareto(double a, double sigma, double k);

  Kind kind() const { return kind_; }
  const std::vector<double>& parameters() const { return params_; }

  double forward(double v) const;
  double inverse(double u) const;

  /// "linear 0 5", "loglinear 7.47 12.55", "power_pareto 0.45 52 4.9"
  std::string describe() const;
  static Transform parse(const std::string& text);

  friend bool operator==(const Transform&, const Transform&) = default;

 private:
  Transform(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  Kind kind_;
  std::vector<double> params_;
};

/// Per-predictor transforms, the response transform, and (for weighted grid
/// data) the shared quantile levels.
struct TransformSet {
  std::vector<Transform> x;
  Transform y = Transform::linear(0.0, 1.0);
  std::vector<double> rho;

  std::size_t dim() const { return x.size(); }
  std::vector<double> x_to_unit(std::span<const double> row) const;

  friend bool operator==(const TransformSet&, const TransformSet&) = default;
};

/// Observations on the original scale.
struct RawData {
  PredictorMatrix x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  void validate() const;
};

struct RawGrid {
  PredictorMatrix x;
  std::vector<int> bin;      // 1..c
  std::vector<double> rho;   // c + 1 levels
  std::vector<double> cuts;  // c - 1 values, original scale

  std::size_t size() const { return bin.size(); }
  void validate() const;
};

struct RawWeightedGrid {
  PredictorMatrix x;
  std::vector<double> weight;
  std::vector<std::vector<double>> cuts;  // per row, original scale

  std::size_t size() const { return weight.size(); }
  void validate(std::size_t levels) const;
};

/// Linear transforms spanning the observed ranges; the response range is
/// widened by `y_padding` of its width on each side.
TransformSet derive_transforms(const RawData& data, double y_padding = 0.01);

Dataset to_unit(const RawData& data, const TransformSet& t);
GridDataset to_unit(const RawGrid& data, const TransformSet& t);
WeightedGridDataset to_unit(const RawWeightedGrid& data, const TransformSet& t);

enum class SkewNormalForm {
  direct,    // location 0, scale 1, shape 4
  centered,  // shape 4, rescaled to mean 0 and sd 1
};

inline constexpr double kSkewShape = 4.0;

/// Skew-normal noise draw with shape 4 in the requested form.
double skew_normal_noise(Rng& rng, SkewNormalForm form);

/// y = x + sin(2x) + 3 eps with x ~ U(0,5) and skew-normal eps.
RawData simulate_study1(std::size_t n, std::uint64_t seed, SkewNormalForm form = SkewNormalForm::direct);
/// y = -x^3/1e5 + (sin(pi x/100) + 4) U eps, x ~ U(-100,100), U = +-1, eps ~ Gamma(5, 1).
RawData simulate_study2(std::size_t n, std::uint64_t seed);

/// True conditional median of the two simulation designs.
double study1_median(double x, SkewNormalForm form = SkewNormalForm::direct);
double study2_median(double x);

/// Known predictor supports of the simulation designs.
TransformSet study1_transforms(const RawData& sample, double y_padding = 0.01);
TransformSet study2_transforms(const RawData& sample, double y_padding = 0.01);

/// Synthetic household-income table: one row per year from 1967, lognormal
/// incomes whose median and spread drift with the year, cut at the given
/// quantile levels.
RawWeightedGrid simulate_income(std::size_t rows, std::span<const double> rho, std::uint64_t seed);
/// Loglinear response transform with the census constants and a linear axis
/// over the table's year range.
TransformSet income_transforms(const RawWeightedGrid& table, std::span<const double> rho);

/// Linear-interpolation sample quantile (order statistics at (n-1)p).
double sample_quantile(std::vector<double> sorted, double p);

/// Replaces responses by the inter-quantile bin they fall in. Cuts are the
/// empirical quantiles at gap/100, 2 gap/100, ...
RawGrid coarsen_to_grid(const RawData& data, int percentile_gap);

}  // namespace bsqr
