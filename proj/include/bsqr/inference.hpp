#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bsqr/coeff_model.hpp"
#include "bsqr/datakit.hpp"
#include "bsqr/likelihood.hpp"
#include "bsqr/sampler.hpp"
#include "bsqr/warmstart.hpp"

namespace bsqr {

/// Free parameters of a spec: (p1 + m1 - 2) per block times (p2 + m2)^d blocks.
std::size_t free_parameters(const ModelSpec& spec);

/// 2k - 2 loglik.
double aic(double loglik_at_mle, const ModelSpec& spec);

/// Outcome of the optimizer for one candidate spec.
struct CandidateReport {
  ModelSpec spec;
  bool ok = false;
  double loglik = 0.0;
  double aic = 0.0;
  std::string error;
  OptimizerReport optimizer;
};

struct FitResult {
  ModelSpec spec;
  CoefficientTensor mle{ModelSpec{}};
  ChainOutput chain;
  McmcConfig mcmc;
  double aic = 0.0;
  double loglik_at_mle = 0.0;
  std::vector<CandidateReport> candidates;
};

struct FitOptions {
  McmcConfig mcmc;
  OptimizerTuning tuning;
  bool warm_start = true;  // without it the chain starts at the centroid
  ChainHooks hooks;
};

/// Warm-start optimisation of one spec. Never throws for optimizer failures;
/// those are recorded in the report.
CandidateReport evaluate_candidate(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& spec,
                                   const OptimizerTuning& tuning, std::uint64_t seed,
                                   CoefficientTensor* optimum = nullptr);

/// Index of the minimum-AIC successful candidate; ties go to the earlier one.
/// Throws ContractError listing every candidate's diagnostic if none succeeded.
std::size_t pick_min_aic(std::span<const CandidateReport> candidates);

/// Warm start for a fixed spec (or the centroid when disabled); the chain is left empty.
FitResult prepare_fit(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& spec, const FitOptions& options);

/// AIC selection over p1 = p2 = p in [p_lo, p_hi]; the chain is left empty.
FitResult prepare_selection(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& base, int p_lo, int p_hi,
                            const FitOptions& options);

/// Runs the chain from the fit's starting tensor with its MCMC settings.
void sample_posterior(FitResult& fit, const std::shared_ptr<const AnyDataset>& data, const ChainHooks& hooks = {});

/// Optimises (unless disabled) and runs the chain for a fixed spec.
FitResult fit_spec(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& spec, const FitOptions& options);

/// Fits p1 = p2 = p for every p in [p_lo, p_hi], keeps the minimum-AIC spec
/// and runs the chain for it. `base` supplies method, d, m1 and m2.
FitResult select_model(const std::shared_ptr<const AnyDataset>& data, const ModelSpec& base, int p_lo, int p_hi,
                       const FitOptions& options);

/// Default search range for AIC selection: 3..10 for NPSQR, 5..10 for NPDFSQR.
std::pair<int, int> default_p_range(Method method);

inline constexpr std::size_t kInversionGrid = 1000;

/// Quantile of one inner curve. NPSQR evaluates the quantile spline; NPDFSQR
/// inverts the CDF by linear interpolation on a 1000-point equidistant grid.
double curve_quantile(Method method, const BasisConfig& inner, std::span<const double> coefs, double tau);

enum class PointEstimate { posterior_mean, mle };

PointEstimate parse_point_estimate(const std::string& text);
std::string to_string(PointEstimate estimate);

/// Quantile at (tau, x) on the unit scale: the average over retained samples,
/// or the optimum's value.
double predict_quantile(const FitResult& fit, double tau, std::span<const double> x,
                        PointEstimate estimate = PointEstimate::posterior_mean);

/// Same for several levels at one predictor point.
std::vector<double> predict_quantiles(const FitResult& fit, std::span<const double> taus, std::span<const double> x,
                                      PointEstimate estimate = PointEstimate::posterior_mean);

/// Mean squared error of the predicted median on original-scale test data.
double pmse(const FitResult& fit, const RawData& test, const TransformSet& transforms,
            PointEstimate estimate = PointEstimate::posterior_mean);

struct CurveRow {
  std::vector<double> x;  // original scale
  double tau = 0.0;
  double q_hat = 0.0;     // original scale
};

/// Quantile curves on a grid of original-scale predictor points.
std::vector<CurveRow> export_curves(const FitResult& fit, const TransformSet& transforms,
                                    const PredictorMatrix& x_grid, std::span<const double> taus,
                                    PointEstimate estimate = PointEstimate::posterior_mean);

/// Equidistant original-scale grid with `points` values per predictor axis
/// (tensor product for d > 1).
PredictorMatrix predictor_grid(const TransformSet& transforms, std::size_t points);

/// lo, lo + step, ..., up to hi inclusive (with rounding slack).
std::vector<double> level_sequence(double lo, double hi, double step);

}  // namespace bsqr
