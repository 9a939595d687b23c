#include "bsqr/inference.hpp"

#include <algorithm>
#include <cmath>

namespace bsqr {

std::size_t free_parameters(const ModelSpec& spec) {
  spec.validate();
  return static_cast<std::size_t>(spec.p1 + spec.m1 - 2) * spec.block_count();
}

double aic(double loglik_at_mle, const ModelSpec& spec) {
  if (!std::isfinite(loglik_at_mle)) throw DomainError("AIC needs a finite log-likelihood");
  return 2.0 * static_cast<double>(free_parameters(spec)) - 2.0 * loglik_at_mle;
}

namespace {

Rng optimizer_rng(std::uint64_t seed) { return Rng(seed ^ 0x9E3779B97F4A7C15ULL); }

}  // namespace

CandidateReport evaluate_candidate(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& spec,
                                   const OptimizerTuning& tuning, std::uint64_t seed, CoefficientTensor* optimum) {
  spec.validate();
  CandidateReport report;
  report.spec = spec;
  try {
    CachedLoglik objective(data, CoefficientTensor(spec));
    Rng rng = optimizer_rng(seed);
    CoefficientTensor best = optimize(objective, tuning, rng, &report.optimizer);
    report.loglik = report.optimizer.final_value;
    if (!std::isfinite(report.loglik)) throw ContractError("log-likelihood at the optimum is not finite");
    report.aic = aic(report.loglik, spec);
    report.ok = true;
    if (optimum) *optimum = std::move(best);
  } catch (const ShapeError&) {
    throw;
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  return report;
}

std::size_t pick_min_aic(std::span<const CandidateReport> candidates) {
  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].ok) continue;
    if (best == candidates.size() || candidates[i].aic < candidates[best].aic) best = i;
  }
  if (best == candidates.size()) {
    std::string message = "model selection failed for every candidate:";
    for (const auto& c : candidates) {
      message += "\n  p1=" + std::to_string(c.spec.p1) + " p2=" + std::to_string(c.spec.p2) + ": " + c.error;
    }
    throw ContractError(message);
  }
  return best;
}

FitResult prepare_fit(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& spec,
                      const FitOptions& options) {
  spec.validate();
  options.mcmc.validate();
  if (!options.warm_start) {
    CoefficientTensor start(spec);
    const double ll = loglik(start, *data);
    if (!std::isfinite(ll)) throw ContractError("log-likelihood is -inf at the centroid; enable the warm start");
    return FitResult{spec, std::move(start), {}, options.mcmc, aic(ll, spec), ll, {}};
  }
  CoefficientTensor optimum(spec);
  CandidateReport report = evaluate_candidate(data, spec, options.tuning, options.mcmc.seed, &optimum);
  if (!report.ok) throw ContractError("warm start failed: " + report.error);
  FitResult fit{spec, std::move(optimum), {}, options.mcmc, report.aic, report.loglik, {}};
  fit.candidates.push_back(std::move(report));
  return fit;
}

FitResult prepare_selection(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& base, int p_lo,
                            int p_hi, const FitOptions& options) {
  if (p_lo > p_hi) throw DomainError("empty knot-count range");
  if (!options.warm_start) throw ContractError("AIC selection needs the warm-start optimum");
  options.mcmc.validate();
  std::vector<CandidateReport> candidates;
  std::vector<CoefficientTensor> optima;
  for (int p = p_lo; p <= p_hi; ++p) {
    ModelSpec spec = base;
    spec.p1 = spec.p2 = p;
    CoefficientTensor optimum(spec);
    candidates.push_back(evaluate_candidate(data, spec, options.tuning, options.mcmc.seed, &optimum));
    optima.push_back(std::move(optimum));
  }
  const std::size_t best = pick_min_aic(candidates);
  FitResult fit{candidates[best].spec, std::move(optima[best]), {}, options.mcmc, candidates[best].aic,
                candidates[best].loglik, {}};
  fit.candidates = std::move(candidates);
  return fit;
}

void sample_posterior(FitResult& fit, const std::shared_ptr<const AnyDataset>& data, const ChainHooks& hooks) {
  fit.chain = run_chain(data, fit.mle, fit.mcmc, hooks);
}

FitResult fit_spec(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& spec, const FitOptions& options) {
  FitResult fit = prepare_fit(data, spec, options);
  sample_posterior(fit, data, options.hooks);
  return fit;
}

FitResult select_model(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& base, int p_lo, int p_hi,
                       const FitOptions& options) {
  FitResult fit = prepare_selection(data, base, p_lo, p_hi, options);
  sample_posterior(fit, data, options.hooks);
  return fit;
}

std::pair<int, int> default_p_range(Method method) {
  return method == Method::npsqr ? std::pair{3, 10} : std::pair{5, 10};
}

double curve_quantile(Method method, const BasisConfig& inner, std::span<const double> coefs, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
  if (method == Method::npsqr) return spline_value(inner, coefs, tau);

  const double pitch = 1.0 / static_cast<double>(kInversionGrid - 1);
  auto cdf_at = [&](std::size_t k) { return spline_value(inner, coefs, static_cast<double>(k) * pitch); };
  if (tau <= cdf_at(0)) return 0.0;
  // Smallest grid index with F >= tau; F(1) = 1 bounds the search.
  std::size_t lo = 0;
  std::size_t hi = kInversionGrid - 1;
  double f_lo = cdf_at(lo);
  double f_hi = cdf_at(hi);
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const double f = cdf_at(mid);
    if (f < tau) {
      lo = mid;
      f_lo = f;
    } else {
      hi = mid;
      f_hi = f;
    }
  }
  if (!(f_hi > f_lo)) return static_cast<double>(hi) * pitch;
  return (static_cast<double>(lo) + (tau - f_lo) / (f_hi - f_lo)) * pitch;
}

PointEstimate parse_point_estimate(const std::string& text) {
  if (text == "posterior-mean") return PointEstimate::posterior_mean;
  if (text == "mle") return PointEstimate::mle;
  throw FormatError("point estimate must be 'posterior-mean' or 'mle', got '" + text + "'");
}

std::string to_string(PointEstimate estimate) {
  return estimate == PointEstimate::mle ? "mle" : "posterior-mean";
}

std::vector<double> predict_quantiles(const FitResult& fit, std::span<const double> taus, std::span<const double> x,
                                      PointEstimate estimate) {
  for (double tau : taus) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
  }
  const Method method = fit.spec.method;
  const BasisConfig& inner = fit.mle.layout().inner;
  std::vector<double> out(taus.size(), 0.0);
  if (estimate == PointEstimate::mle) {
    const std::vector<double> coefs = fit.mle.coeff_at(x);
    for (std::size_t t = 0; t < taus.size(); ++t) out[t] = curve_quantile(method, inner, coefs, taus[t]);
    return out;
  }
  const auto& samples = fit.chain.samples;
  if (samples.empty()) throw ContractError("posterior-mean prediction needs retained samples");
  for (const auto& sample : samples) {
    const std::vector<double> coefs = sample.coeff_at(x);
    for (std::size_t t = 0; t < taus.size(); ++t) out[t] += curve_quantile(method, inner, coefs, taus[t]);
  }
  for (double& q : out) q /= static_cast<double>(samples.size());
  return out;
}

double predict_quantile(const FitResult& fit, double tau, std::span<const double> x, PointEstimate estimate) {
  const double taus[] = {tau};
  return predict_quantiles(fit, taus, x, estimate)[0];
}

double pmse(const FitResult& fit, const RawData& test, const TransformSet& transforms, PointEstimate estimate) {
  test.validate();
  if (test.x.dim != transforms.dim()) throw ShapeError("test data and transforms disagree on the predictor dimension");
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::vector<double> u = transforms.x_to_unit(test.x.row(i));
    const double q = transforms.y.inverse(predict_quantile(fit, 0.5, u, estimate));
    total += (test.y[i] - q) * (test.y[i] - q);
  }
  return total / static_cast<double>(test.size());
}

std::vector<CurveRow> export_curves(const FitResult& fit, const TransformSet& transforms,
                                    const PredictorMatrix& x_grid, std::span<const double> taus,
                                    PointEstimate estimate) {
  if (x_grid.dim != transforms.dim()) throw ShapeError("curve grid and transforms disagree on the predictor dimension");
  std::vector<CurveRow> rows;
  rows.reserve(x_grid.rows() * taus.size());
  for (std::size_t i = 0; i < x_grid.rows(); ++i) {
    const auto x = x_grid.row(i);
    const std::vector<double> q = predict_quantiles(fit, taus, transforms.x_to_unit(x), estimate);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      rows.push_back({std::vector<double>(x.begin(), x.end()), taus[t], transforms.y.inverse(q[t])});
    }
  }
  return rows;
}

PredictorMatrix predictor_grid(const TransformSet& transforms, std::size_t points) {
  if (points < 2) throw DomainError("a predictor grid needs at least two points per axis");
  const std::size_t d = transforms.dim();
  if (d == 0) throw ShapeError("no predictor transforms");
  std::size_t rows = 1;
  for (std::size_t j = 0; j < d; ++j) rows *= points;
  PredictorMatrix grid{d, {}};
  grid.values.reserve(rows * d);
  std::vector<std::size_t> index(d, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      grid.values.push_back(transforms.x[j].inverse(static_cast<double>(index[j]) / static_cast<double>(points - 1)));
    }
    for (std::size_t j = d; j-- > 0;) {
      if (++index[j] < points) break;
      index[j] = 0;
    }
  }
  return grid;
}

std::vector<double> level_sequence(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw DomainError("level sequence needs lo <= hi and a positive step");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12;
  return out;
}

}  // namespace bsqr
