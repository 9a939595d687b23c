#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "bsqr/coeff_model.hpp"

namespace bsqr {

/// Row-major n x d predictor matrix on the unit cube.
struct PredictorMatrix {
  std::size_t dim = 1;
  std::vector<double> values;

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
};

/// Complete observations, all on [0,1].
struct Dataset {
  PredictorMatrix x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  void validate() const;
};

/// Observations known only up to the inter-quantile bin containing them.
struct GridDataset {
  PredictorMatrix x;
  std::vector<int> bin;      // 1..c
  std::vector<double> rho;   // 0 = rho_0 < ... < rho_c = 1
  std::vector<double> cuts;  // q_Y(rho_1) .. q_Y(rho_{c-1}) on [0,1]

  std::size_t size() const { return bin.size(); }
  std::size_t bins() const { return cuts.size() + 1; }
  void validate() const;
};

/// Per-row quantile cuts with a population weight (census-table layout).
struct WeightedGridDataset {
  PredictorMatrix x;
  std::vector<double> weight;             // V_i > 0
  std::vector<std::vector<double>> cuts;  // per row, c - 1 values on [0,1]
  std::vector<double> rho;                // shared, c + 1 values

  std::size_t size() const { return weight.size(); }
  std::size_t bins() const { return rho.size() - 1; }
  void validate() const;
};

using AnyDataset = std::variant<Dataset, GridDataset, WeightedGridDataset>;

/// Conditional CDF F(v|x) from the inner-spline coefficients at x: the
/// inverse of the quantile curve for NPSQR, direct evaluation for NPDFSQR.
double conditional_cdf(Method method, const BasisConfig& inner, std::span<const double> coefs, double v);

/// Log-density of a complete observation y given the inner coefficients at its x.
/// Returns kLogZero where the density vanishes (NPDFSQR) or the quantile curve is flat (NPSQR).
double complete_log_density(Method method, const BasisConfig& inner, std::span<const double> coefs,
                            double y);

/// Bin probabilities F(cut_l) - F(cut_{l-1}) for l = 1..c.
std::vector<double> bin_masses(Method method, const BasisConfig& inner, std::span<const double> coefs,
                               std::span<const double> cuts);

double loglik_npsqr_complete(const CoefficientTensor& tensor, const Dataset& data);
double loglik_npdfsqr_complete(const CoefficientTensor& tensor, const Dataset& data);
double loglik_npsqr_grid(const CoefficientTensor& tensor, const GridDataset& data);
double loglik_npdfsqr_grid(const CoefficientTensor& tensor, const GridDataset& data);
/// sum_i sum_l (rho_l - rho_{l-1}) V_i log(F_{i,l} - F_{i,l-1}), either method.
double loglik_weighted_grid(const CoefficientTensor& tensor, const WeightedGridDataset& data);

/// Dispatches on the tensor's method and the dataset kind.
double loglik(const CoefficientTensor& tensor, const AnyDataset& data);

/// Objective over a collection of simplex blocks that supports cheap
/// single-block trial evaluations. Owns the current parameter state.
class BlockObjective {
 public:
  virtual ~BlockObjective() = default;

  virtual void reset(const CoefficientTensor& state) = 0;
  virtual const CoefficientTensor& state() const = 0;
  virtual double value() const = 0;

  /// Objective with block `index` replaced by `increments`; state unchanged.
  virtual double trial(std::size_t index, std::span<const double> increments) = 0;
  /// Replaces block `index` in the state.
  virtual void accept(std::size_t index, std::span<const double> increments) = 0;
};

/// Wraps any function of the full tensor; every trial re-evaluates it.
class FunctionObjective final : public BlockObjective {
 public:
  using Function = std::function<double(const CoefficientTensor&)>;

  FunctionObjective(Function f, CoefficientTensor start);

  void reset(const CoefficientTensor& state) override;
  const CoefficientTensor& state() const override { return state_; }
  double value() const override { return value_; }
  double trial(std::size_t index, std::span<const double> increments) override;
  void accept(std::size_t index, std::span<const double> increments) override;

 private:
  Function f_;
  CoefficientTensor state_;
  double value_;
};

/// Log-likelihood with per-observation caching. A block only touches the
/// observations inside its outer-basis support, so trials recompute those
/// terms and re-sum all terms in index order.
class CachedLoglik final : public BlockObjective {
 public:
  CachedLoglik(std::shared_ptr<const AnyDataset> data, const CoefficientTensor& start);

  void reset(const CoefficientTensor& state) override;
  const CoefficientTensor& state() const override { return state_; }
  double value() const override { return value_; }
  double trial(std::size_t index, std::span<const double> increments) override;
  void accept(std::size_t index, std::span<const double> increments) override;

 private:
  double term(std::size_t obs, std::span<const double> coefs) const;
  void coefficients_for(std::size_t obs, std::size_t replaced, std::span<const double> alpha,
                        std::span<double> out) const;
  double sum_terms(std::span<const double> terms) const;

  std::shared_ptr<const AnyDataset> data_;
  CoefficientTensor state_;
  std::vector<MixtureWeights> mix_;                     // per observation
  std::vector<std::vector<std::size_t>> block_obs_;     // per block, affected observations
  std::vector<double> alpha_;                           // reconstructed coefficients per block
  std::vector<double> terms_;
  std::vector<double> scratch_terms_;
  mutable std::vector<double> scratch_coefs_;
  double value_ = 0.0;
};

}  // namespace bsqr
