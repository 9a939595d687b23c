#include "bsqr/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "text.hpp"

namespace bsqr {

namespace {

// Values this close outside a linear range are treated as rounding noise.
constexpr double kEdgeSlack = 1e-12;

double clamp_unit(double u, const Transform& t, double v) {
  if (u < -kEdgeSlack || u > 1.0 + kEdgeSlack || std::isnan(u)) {
    throw DomainError("transform " + t.describe() + ": value " + text::format(v) + " outside its domain");
  }
  return std::clamp(u, 0.0, 1.0);
}

}  // namespace

Transform Transform::linear(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw DomainError("linear transform needs finite lo < hi");
  }
  return Transform(Kind::linear, {lo, hi});
}

Transform Transform::loglinear(double log_lo, double log_hi) {
  if (!(std::isfinite(log_lo) && std::isfinite(log_hi) && log_lo < log_hi)) {
    throw DomainError("loglinear transform needs finite L < U");
  }
  return Transform(Kind::loglinear, {log_lo, log_hi});
}

Transform Transform::power_pareto(double a, double sigma, double k) {
  if (!(a > 0.0 && sigma > 0.0 && k > 0.0) || !std::isfinite(a * sigma * k)) {
    throw DomainError("power_pareto transform needs positive a, sigma and k");
  }
  return Transform(Kind::power_pareto, {a, sigma, k});
}

double Transform::forward(double v) const {
  const auto& p = params_;
  switch (kind_) {
    case Kind::linear:
      return clamp_unit((v - p[0]) / (p[1] - p[0]), *this, v);
    case Kind::loglinear:
      if (!(v > 0.0)) throw DomainError("transform " + describe() + ": value " + text::format(v) + " is not positive");
      return clamp_unit((std::log(v) - p[0]) / (p[1] - p[0]), *this, v);
    case Kind::power_pareto:
      if (!(v >= 0.0) || std::isinf(v)) {
        throw DomainError("transform " + describe() + ": value " + text::format(v) + " is not a finite non-negative number");
      }
      return -std::expm1(-p[0] * std::log1p(std::pow(v / p[1], p[2])));
  }
  return 0.0;
}

double Transform::inverse(double u) const {
  if (!(u >= -kEdgeSlack && u <= 1.0 + kEdgeSlack)) {
    throw DomainError("transform " + describe() + ": inverse needs a value in [0,1], got " + text::format(u));
  }
  u = std::clamp(u, 0.0, 1.0);
  const auto& p = params_;
  switch (kind_) {
    case Kind::linear:
      return p[0] + u * (p[1] - p[0]);
    case Kind::loglinear:
      return std::exp(p[0] + u * (p[1] - p[0]));
    case Kind::power_pareto:
      if (u == 1.0) return std::numeric_limits<double>::infinity();
      return p[1] * std::pow(std::expm1(-std::log1p(-u) / p[0]), 1.0 / p[2]);
  }
  return 0.0;
}

std::string Transform::describe() const {
  std::string out;
  switch (kind_) {
    case Kind::linear: out = "linear"; break;
    case Kind::loglinear: out = "loglinear"; break;
    case Kind::power_pareto: out = "power_pareto"; break;
  }
  for (double v : params_) out += " " + text::format(v);
  return out;
}

Transform Transform::parse(const std::string& line) {
  std::istringstream is(line);
  std::string kind;
  is >> kind;
  std::vector<double> v;
  for (std::string tok; is >> tok;) v.push_back(text::to_double(tok));
  auto need = [&](std::size_t n) {
    if (v.size() != n) {
      throw FormatError("transform '" + kind + "' takes " + std::to_string(n) + " parameters, got " +
                        std::to_string(v.size()));
    }
  };
  if (kind == "linear") {
    need(2);
    return linear(v[0], v[1]);
  }
  if (kind == "loglinear") {
    need(2);
    return loglinear(v[0], v[1]);
  }
  if (kind == "power_pareto") {
    need(3);
    return power_pareto(v[0], v[1], v[2]);
  }
  throw FormatError("unknown transform kind '" + kind + "'");
}

std::vector<double> TransformSet::x_to_unit(std::span<const double> row) const {
  if (row.size() != x.size()) throw ShapeError("predictor row has the wrong dimension for the transforms");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = x[j].forward(row[j]);
  return out;
}

namespace {

void check_matrix(const PredictorMatrix& x, std::size_t rows) {
  if (x.dim == 0) throw ShapeError("predictor dimension must be positive");
  if (x.values.size() != rows * x.dim) throw ShapeError("predictor matrix does not match the number of rows");
  for (double v : x.values) {
    if (!std::isfinite(v)) throw DomainError("predictor values must be finite");
  }
}

PredictorMatrix x_to_unit(const PredictorMatrix& x, const TransformSet& t) {
  if (x.dim != t.dim()) throw ShapeError("data and transforms disagree on the predictor dimension");
  PredictorMatrix out{x.dim, std::vector<double>(x.values.size())};
  for (std::size_t i = 0; i < x.values.size(); ++i) out.values[i] = t.x[i % x.dim].forward(x.values[i]);
  return out;
}

void check_increasing(std::span<const double> v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) throw DomainError(std::string(what) + " must be strictly increasing");
  }
}

}  // namespace

void RawData::validate() const {
  if (y.empty()) throw ShapeError("dataset has no observations");
  check_matrix(x, y.size());
  for (double v : y) {
    if (!std::isfinite(v)) throw DomainError("responses must be finite");
  }
}

void RawGrid::validate() const {
  if (bin.empty()) throw ShapeError("grid dataset has no observations");
  check_matrix(x, bin.size());
  if (rho.size() < 3 || rho.front() != 0.0 || rho.back() != 1.0) {
    throw DomainError("quantile levels must run from 0 to 1 with at least one interior level");
  }
  check_increasing(rho, "quantile levels");
  if (cuts.size() + 2 != rho.size()) throw ShapeError("grid needs one cut per interior quantile level");
  check_increasing(cuts, "cuts");
  const auto c = static_cast<int>(rho.size() - 1);
  for (int b : bin) {
    if (b < 1 || b > c) throw DomainError("bin index " + std::to_string(b) + " outside 1.." + std::to_string(c));
  }
}

void RawWeightedGrid::validate(std::size_t levels) const {
  if (weight.empty()) throw ShapeError("weighted grid has no rows");
  check_matrix(x, weight.size());
  if (cuts.size() != weight.size()) throw ShapeError("one cut row per weight required");
  for (const auto& row : cuts) {
    if (row.size() + 2 != levels) throw ShapeError("cut row length does not match the quantile levels");
    check_increasing(row, "cuts");
  }
}

TransformSet derive_transforms(const RawData& data, double y_padding) {
  data.validate();
  if (!(y_padding >= 0.0)) throw DomainError("response padding must be non-negative");
  TransformSet t;
  for (std::size_t j = 0; j < data.x.dim; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < data.size(); ++i) {
      lo = std::min(lo, data.x.row(i)[j]);
      hi = std::max(hi, data.x.row(i)[j]);
    }
    if (!(hi > lo)) throw DomainError("predictor " + std::to_string(j + 1) + " is constant");
    t.x.push_back(Transform::linear(lo, hi));
  }
  const auto [ylo, yhi] = std::minmax_element(data.y.begin(), data.y.end());
  const double width = *yhi - *ylo;
  if (!(width > 0.0)) throw DomainError("response is constant");
  t.y = Transform::linear(*ylo - y_padding * width, *yhi + y_padding * width);
  return t;
}

Dataset to_unit(const RawData& data, const TransformSet& t) {
  data.validate();
  Dataset out{x_to_unit(data.x, t), std::vector<double>(data.size())};
  for (std::size_t i = 0; i < data.size(); ++i) out.y[i] = t.y.forward(data.y[i]);
  out.validate();
  return out;
}

GridDataset to_unit(const RawGrid& data, const TransformSet& t) {
  data.validate();
  GridDataset out{x_to_unit(data.x, t), data.bin, data.rho, std::vector<double>(data.cuts.size())};
  for (std::size_t l = 0; l < data.cuts.size(); ++l) out.cuts[l] = t.y.forward(data.cuts[l]);
  out.validate();
  return out;
}

WeightedGridDataset to_unit(const RawWeightedGrid& data, const TransformSet& t) {
  data.validate(t.rho.size());
  WeightedGridDataset out{x_to_unit(data.x, t), data.weight, {}, t.rho};
  out.cuts.reserve(data.cuts.size());
  for (const auto& row : data.cuts) {
    std::vector<double> u(row.size());
    for (std::size_t l = 0; l < row.size(); ++l) u[l] = t.y.forward(row[l]);
    out.cuts.push_back(std::move(u));
  }
  out.validate();
  return out;
}

namespace {

double skew_delta() { return kSkewShape / std::sqrt(1.0 + kSkewShape * kSkewShape); }
double skew_mean() { return skew_delta() * std::sqrt(2.0 / std::numbers::pi); }
double skew_sd() { return std::sqrt(1.0 - skew_mean() * skew_mean()); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Median of the direct skew-normal with shape 4, by Simpson integration of
// its density and bisection.
double skew_median() {
  static const double median = [] {
    auto density = [](double z) {
      return 2.0 * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) * normal_cdf(kSkewShape * z);
    };
    auto cdf = [&](double z) {
      const double a = -10.0;
      const int panels = 4000;
      const double h = (z - a) / panels;
      double s = density(a) + density(z);
      for (int i = 1; i < panels; ++i) s += density(a + i * h) * (i % 2 ? 4.0 : 2.0);
      return s * h / 3.0;
    };
    double lo = 0.0;
    double hi = 2.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }();
  return median;
}

}  // namespace

double skew_normal_noise(Rng& rng, SkewNormalForm form) {
  std::normal_distribution<double> normal;
  const double delta = skew_delta();
  const double z0 = normal(rng);
  const double z1 = normal(rng);
  const double e = delta * std::abs(z0) + std::sqrt(1.0 - delta * delta) * z1;
  return form == SkewNormalForm::direct ? e : (e - skew_mean()) / skew_sd();
}

RawData simulate_study1(std::size_t n, std::uint64_t seed, SkewNormalForm form) {
  if (n == 0) throw DomainError("sample size must be at least 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 5.0);
  RawData out{{1, std::vector<double>(n)}, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    out.x.values[i] = x;
    out.y[i] = x + std::sin(2.0 * x) + 3.0 * skew_normal_noise(rng, form);
  }
  return out;
}

RawData simulate_study2(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample size must be at least 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(-100.0, 100.0);
  std::gamma_distribution<double> gamma(5.0, 1.0);
  RawData out{{1, std::vector<double>(n)}, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    const double sign = (rng() >> 63) ? 1.0 : -1.0;
    const double eps = gamma(rng);
    out.x.values[i] = x;
    out.y[i] = -x * x * x / 100000.0 + (std::sin(std::numbers::pi * x / 100.0) + 4.0) * sign * eps;
  }
  return out;
}

double study1_median(double x, SkewNormalForm form) {
  const double m = form == SkewNormalForm::direct ? skew_median() : (skew_median() - skew_mean()) / skew_sd();
  return x + std::sin(2.0 * x) + 3.0 * m;
}

double study2_median(double x) { return -x * x * x / 100000.0; }

namespace {

TransformSet with_y_range(const RawData& sample, Transform x, double y_padding) {
  TransformSet t = derive_transforms(sample, y_padding);
  t.x = {std::move(x)};
  return t;
}

}  // namespace

TransformSet study1_transforms(const RawData& sample, double y_padding) {
  return with_y_range(sample, Transform::linear(0.0, 5.0), y_padding);
}

TransformSet study2_transforms(const RawData& sample, double y_padding) {
  return with_y_range(sample, Transform::linear(-100.0, 100.0), y_padding);
}

RawWeightedGrid simulate_income(std::size_t rows, std::span<const double> rho, std::uint64_t seed) {
  if (rows < 2) throw DomainError("income table needs at least two rows");
  if (rho.size() < 3) throw DomainError("income table needs at least one interior quantile level");
  Rng rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.02);
  std::uniform_real_distribution<double> population(0.97, 1.03);
  RawWeightedGrid out;
  out.x = {1, std::vector<double>(rows)};
  for (std::size_t i = 0; i < rows; ++i) {
    const double year = 1967.0 + static_cast<double>(i);
    const double s = static_cast<double>(i) / static_cast<double>(rows - 1);
    const double mu = 10.5 + 0.2 * s + jitter(rng);
    const double sigma = 0.65 + 0.05 * s;
    std::vector<double> cuts;
    for (std::size_t l = 1; l + 1 < rho.size(); ++l) cuts.push_back(std::exp(mu + sigma * normal_quantile(rho[l])));
    out.x.values[i] = year;
    out.weight.push_back(std::round((60000.0 + 65000.0 * s) * population(rng)));
    out.cuts.push_back(std::move(cuts));
  }
  return out;
}

TransformSet income_transforms(const RawWeightedGrid& table, std::span<const double> rho) {
  if (table.x.dim != 1 || table.x.values.empty()) throw ShapeError("income table needs a single year column");
  const auto [lo, hi] = std::minmax_element(table.x.values.begin(), table.x.values.end());
  TransformSet t;
  t.x = {Transform::linear(*lo, *hi)};
  t.y = Transform::loglinear(7.47, 12.55);
  t.rho.assign(rho.begin(), rho.end());
  return t;
}

double sample_quantile(std::vector<double> sorted, double p) {
  if (sorted.empty()) throw ShapeError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
  if (!std::is_sorted(sorted.begin(), sorted.end())) std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

RawGrid coarsen_to_grid(const RawData& data, int percentile_gap) {
  data.validate();
  if (percentile_gap <= 0 || percentile_gap >= 100 || 100 % percentile_gap != 0) {
    throw DomainError("percentile gap must divide 100 (e.g. 5, 10 or 20)");
  }
  const int c = 100 / percentile_gap;
  std::vector<double> sorted = data.y;
  std::sort(sorted.begin(), sorted.end());
  RawGrid out;
  out.x = data.x;
  out.rho.push_back(0.0);
  for (int l = 1; l < c; ++l) {
    const double level = static_cast<double>(l * percentile_gap) / 100.0;
    out.rho.push_back(level);
    out.cuts.push_back(sample_quantile(sorted, level));
  }
  out.rho.push_back(1.0);
  for (std::size_t l = 1; l < out.cuts.size(); ++l) {
    if (!(out.cuts[l] > out.cuts[l - 1])) {
      throw DomainError("tied responses give repeated quantile cuts at a " + std::to_string(percentile_gap) +
                        " percentile gap; use a coarser grid");
    }
  }
  out.bin.reserve(data.size());
  for (double y : data.y) {
    const auto it = std::lower_bound(out.cuts.begin(), out.cuts.end(), y);
    out.bin.push_back(static_cast<int>(it - out.cuts.begin()) + 1);
  }
  return out;
}

}  // namespace bsqr
