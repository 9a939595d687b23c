#include "bsqr/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsqr/error.hpp"

namespace bsqr {

namespace {

constexpr double kMinDensity = 1e-300;

void check_unit_values(std::span<const double> v, const char* what) {
  for (double a : v) {
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError(std::string(what) + " value outside [0,1]");
  }
}

void check_predictors(const PredictorMatrix& x, std::size_t n) {
  if (x.dim == 0) throw ShapeError("predictor dimension is zero");
  if (x.values.size() != n * x.dim) throw ShapeError("predictor matrix does not match observation count");
  check_unit_values(x.values, "predictor");
}

void check_strictly_increasing(std::span<const double> v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) throw DomainError(std::string(what) + " must be strictly increasing");
  }
}

void check_rho(std::span<const double> rho) {
  if (rho.size() < 2 || rho.front() != 0.0 || rho.back() != 1.0) {
    throw DomainError("quantile grid must start at 0 and end at 1");
  }
  check_strictly_increasing(rho, "quantile grid");
}

void check_method(const CoefficientTensor& tensor, Method method) {
  if (tensor.spec().method != method) {
    throw ContractError("likelihood for " + to_string(method) + " called with a " +
                        to_string(tensor.spec().method) + " tensor");
  }
}

std::span<const double> predictor_row(const AnyDataset& data, std::size_t i) {
  return std::visit([i](const auto& d) { return d.x.row(i); }, data);
}

std::size_t observation_count(const AnyDataset& data) {
  return std::visit([](const auto& d) { return d.size(); }, data);
}

double log_mass(double mass) { return mass > 0.0 ? std::log(mass) : kLogZero; }

double grid_term(Method method, const BasisConfig& inner, std::span<const double> coefs,
                 std::span<const double> cuts, int bin) {
  const auto c = static_cast<int>(cuts.size()) + 1;
  const double lo = bin == 1 ? 0.0 : conditional_cdf(method, inner, coefs, cuts[static_cast<std::size_t>(bin - 2)]);
  const double hi = bin == c ? 1.0 : conditional_cdf(method, inner, coefs, cuts[static_cast<std::size_t>(bin - 1)]);
  return log_mass(hi - lo);
}

double weighted_term(Method method, const BasisConfig& inner, std::span<const double> coefs,
                     std::span<const double> cuts, std::span<const double> rho, double weight) {
  const std::vector<double> mass = bin_masses(method, inner, coefs, cuts);
  double s = 0.0;
  for (std::size_t l = 0; l < mass.size(); ++l) {
    if (!(mass[l] > 0.0)) return kLogZero;
    s += (rho[l + 1] - rho[l]) * weight * std::log(mass[l]);
  }
  return s;
}

double observation_term(const Dataset& d, Method method, const BasisConfig& inner, std::size_t i,
                        std::span<const double> coefs) {
  return complete_log_density(method, inner, coefs, d.y[i]);
}

double observation_term(const GridDataset& g, Method method, const BasisConfig& inner, std::size_t i,
                        std::span<const double> coefs) {
  return grid_term(method, inner, coefs, g.cuts, g.bin[i]);
}

double observation_term(const WeightedGridDataset& w, Method method, const BasisConfig& inner,
                        std::size_t i, std::span<const double> coefs) {
  return weighted_term(method, inner, coefs, w.cuts[i], w.rho, w.weight[i]);
}

void validate_any(const AnyDataset& data) {
  std::visit([](const auto& d) { d.validate(); }, data);
}

template <class Data>
double direct_loglik(const CoefficientTensor& tensor, const Data& data) {
  data.validate();
  const ModelSpec& spec = tensor.spec();
  if (data.x.dim != static_cast<std::size_t>(spec.d)) throw ShapeError("dataset dimension differs from model");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> coefs = tensor.coeff_at(data.x.row(i));
    total += observation_term(data, spec.method, tensor.layout().inner, i, coefs);
  }
  return total;
}

}  // namespace

void Dataset::validate() const {
  if (y.empty()) throw ShapeError("dataset has no observations");
  check_predictors(x, y.size());
  check_unit_values(y, "response");
}

void GridDataset::validate() const {
  if (bin.empty()) throw ShapeError("grid dataset has no observations");
  check_predictors(x, bin.size());
  check_rho(rho);
  if (cuts.size() + 2 != rho.size()) throw ShapeError("grid needs one cut per interior quantile level");
  check_unit_values(cuts, "cut");
  check_strictly_increasing(cuts, "cuts");
  const auto c = static_cast<int>(bins());
  for (int b : bin) {
    if (b < 1 || b > c) throw DomainError("bin index " + std::to_string(b) + " outside 1.." + std::to_string(c));
  }
}

void WeightedGridDataset::validate() const {
  if (weight.empty()) throw ShapeError("weighted grid dataset has no rows");
  check_predictors(x, weight.size());
  check_rho(rho);
  if (cuts.size() != weight.size()) throw ShapeError("one cut row per weight required");
  for (const auto& row : cuts) {
    if (row.size() + 2 != rho.size()) throw ShapeError("cut row length does not match the quantile grid");
    check_unit_values(row, "cut");
    check_strictly_increasing(row, "cuts");
  }
  for (double v : weight) {
    if (!(v > 0.0)) throw DomainError("population weights must be positive");
  }
}

double conditional_cdf(Method method, const BasisConfig& inner, std::span<const double> coefs, double v) {
  return method == Method::npsqr ? spline_inverse(inner, coefs, v) : spline_value(inner, coefs, v);
}

double complete_log_density(Method method, const BasisConfig& inner, std::span<const double> coefs,
                            double y) {
  if (method == Method::npsqr) {
    const double tau = spline_inverse(inner, coefs, y);
    const double slope = spline_derivative(inner, coefs, tau);
    return slope > kMinDensity ? -std::log(slope) : kLogZero;
  }
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("response outside [0,1]");
  const double density = spline_derivative(inner, coefs, y);
  return density > kMinDensity ? std::log(density) : kLogZero;
}

std::vector<double> bin_masses(Method method, const BasisConfig& inner, std::span<const double> coefs,
                               std::span<const double> cuts) {
  std::vector<double> mass(cuts.size() + 1);
  double prev = 0.0;
  for (std::size_t l = 0; l < cuts.size(); ++l) {
    const double f = conditional_cdf(method, inner, coefs, cuts[l]);
    mass[l] = f - prev;
    prev = f;
  }
  mass.back() = 1.0 - prev;
  return mass;
}

double loglik_npsqr_complete(const CoefficientTensor& tensor, const Dataset& data) {
  check_method(tensor, Method::npsqr);
  return direct_loglik(tensor, data);
}

double loglik_npdfsqr_complete(const CoefficientTensor& tensor, const Dataset& data) {
  check_method(tensor, Method::npdfsqr);
  return direct_loglik(tensor, data);
}

double loglik_npsqr_grid(const CoefficientTensor& tensor, const GridDataset& data) {
  check_method(tensor, Method::npsqr);
  return direct_loglik(tensor, data);
}

double loglik_npdfsqr_grid(const CoefficientTensor& tensor, const GridDataset& data) {
  check_method(tensor, Method::npdfsqr);
  return direct_loglik(tensor, data);
}

double loglik_weighted_grid(const CoefficientTensor& tensor, const WeightedGridDataset& data) {
  return direct_loglik(tensor, data);
}

double loglik(const CoefficientTensor& tensor, const AnyDataset& data) {
  return std::visit([&tensor](const auto& d) { return direct_loglik(tensor, d); }, data);
}

FunctionObjective::FunctionObjective(Function f, CoefficientTensor start)
    : f_(std::move(f)), state_(std::move(start)), value_(f_(state_)) {}

void FunctionObjective::reset(const CoefficientTensor& state) {
  state_ = state;
  value_ = f_(state_);
}

double FunctionObjective::trial(std::size_t index, std::span<const double> increments) {
  CoefficientTensor candidate = state_;
  candidate.set_block(index, increments);
  return f_(candidate);
}

void FunctionObjective::accept(std::size_t index, std::span<const double> increments) {
  state_.set_block(index, increments);
  value_ = f_(state_);
}

CachedLoglik::CachedLoglik(std::shared_ptr<const AnyDataset> data, const CoefficientTensor& start)
    : data_(std::move(data)), state_(start) {
  validate_any(*data_);
  if (std::visit([](const auto& d) { return d.x.dim; }, *data_) != static_cast<std::size_t>(start.spec().d)) {
    throw ShapeError("dataset dimension differs from model");
  }
  reset(start);
}

void CachedLoglik::reset(const CoefficientTensor& state) {
  state_ = state;
  const ModelSpec& spec = state_.spec();
  const std::size_t n = observation_count(*data_);
  const std::size_t n_coef = spec.increments_per_block() + 1;

  mix_.clear();
  mix_.reserve(n);
  block_obs_.assign(state_.block_count(), {});
  for (std::size_t i = 0; i < n; ++i) {
    mix_.push_back(mixture_weights(state_.layout(), predictor_row(*data_, i)));
    const MixtureWeights& m = mix_.back();
    for (std::size_t t = 0; t < m.blocks.size(); ++t) {
      if (m.weights[t] != 0.0) block_obs_[m.blocks[t]].push_back(i);
    }
  }

  alpha_.assign(state_.block_count() * n_coef, 0.0);
  for (std::size_t b = 0; b < state_.block_count(); ++b) {
    const std::vector<double> a = reconstruct_block(state_.block(b));
    std::copy(a.begin(), a.end(), alpha_.begin() + static_cast<std::ptrdiff_t>(b * n_coef));
  }

  scratch_coefs_.assign(n_coef, 0.0);
  terms_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    coefficients_for(i, state_.block_count(), {}, scratch_coefs_);
    terms_[i] = term(i, scratch_coefs_);
  }
  value_ = sum_terms(terms_);
}

void CachedLoglik::coefficients_for(std::size_t obs, std::size_t replaced, std::span<const double> alpha,
                                    std::span<double> out) const {
  const std::size_t n_coef = out.size();
  std::fill(out.begin(), out.end(), 0.0);
  const MixtureWeights& m = mix_[obs];
  for (std::size_t t = 0; t < m.blocks.size(); ++t) {
    const double w = m.weights[t];
    if (w == 0.0) continue;
    const std::size_t b = m.blocks[t];
    const double* a = b == replaced ? alpha.data() : alpha_.data() + b * n_coef;
    for (std::size_t j = 1; j < n_coef; ++j) out[j] += w * a[j];
  }
}

double CachedLoglik::term(std::size_t obs, std::span<const double> coefs) const {
  return std::visit(
      [&](const auto& d) { return observation_term(d, state_.spec().method, state_.layout().inner, obs, coefs); },
      *data_);
}

double CachedLoglik::sum_terms(std::span<const double> terms) const {
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

double CachedLoglik::trial(std::size_t index, std::span<const double> increments) {
  if (index >= state_.block_count()) throw ShapeError("block index out of range");
  if (increments.size() != state_.increments_per_block()) throw ShapeError("block length mismatch");
  SimplexBlock::validate(increments);
  const std::vector<double> alpha = reconstruct_block(increments);
  scratch_terms_ = terms_;
  for (std::size_t obs : block_obs_[index]) {
    coefficients_for(obs, index, alpha, scratch_coefs_);
    scratch_terms_[obs] = term(obs, scratch_coefs_);
  }
  return sum_terms(scratch_terms_);
}

void CachedLoglik::accept(std::size_t index, std::span<const double> increments) {
  const double v = trial(index, increments);
  state_.set_block(index, increments);
  const std::vector<double> alpha = reconstruct_block(increments);
  const std::size_t n_coef = alpha.size();
  std::copy(alpha.begin(), alpha.end(), alpha_.begin() + static_cast<std::ptrdiff_t>(index * n_coef));
  terms_.swap(scratch_terms_);
  value_ = v;
}

}  // namespace bsqr
