#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bsqr/bspline.hpp"

namespace bsqr {

/// NPSQR models the conditional quantile function; NPDFSQR the conditional CDF.
enum class Method { npsqr, npdfsqr };

std::string to_string(Method method);
Method parse_method(const std::string& text);

struct ModelSpec {
  Method method = Method::npsqr;
  int d = 1;   // predictor dimension
  int m1 = 2;  // degree in tau (NPSQR) or y (NPDFSQR)
  int m2 = 2;  // degree in each predictor
  int p1 = 3;  // segments of the inner basis
  int p2 = 3;  // segments of each outer basis

  void validate() const;

  std::size_t increments_per_block() const { return static_cast<std::size_t>(p1 + m1 - 1); }
  std::size_t blocks_per_axis() const { return static_cast<std::size_t>(p2 + m2); }
  std::size_t block_count() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Nonnegative increments summing to one.
class SimplexBlock {
 public:
  explicit SimplexBlock(std::vector<double> increments);

  std::span<const double> increments() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }

  static void validate(std::span<const double> increments);

 private:
  std::vector<double> values_;
};

/// Cumulative sums prefixed with zero: (0, g1, g1+g2, ..., 1).
std::vector<double> reconstruct_block(std::span<const double> increments);

/// Spec together with its bases; shared by all tensors of one model.
struct ModelLayout {
  explicit ModelLayout(const ModelSpec& s);

  ModelSpec spec;
  BasisConfig inner;
  BasisConfig outer;
};

/// Outer-basis tensor-product weights of one predictor point, restricted to
/// the (m2+1)^d blocks whose weights can be nonzero.
struct MixtureWeights {
  std::vector<std::size_t> blocks;
  std::vector<double> weights;
};

MixtureWeights mixture_weights(const ModelLayout& layout, std::span<const double> x);

/// Full parameter state: (p2+m2)^d simplex blocks stored in lexicographic
/// order of the multi-index (k1, ..., kd), k1 most significant.
class CoefficientTensor {
 public:
  /// Every block at the simplex centroid.
  explicit CoefficientTensor(const ModelSpec& spec);
  CoefficientTensor(std::shared_ptr<const ModelLayout> layout, std::vector<double> flat);

  /// Every block holds the Greville increments, so Q(tau|x) = tau (or F(y|x) = y).
  static CoefficientTensor identity(const ModelSpec& spec);

  const ModelSpec& spec() const { return layout_->spec; }
  const ModelLayout& layout() const { return *layout_; }
  const std::shared_ptr<const ModelLayout>& layout_ptr() const { return layout_; }

  std::size_t block_count() const { return block_count_; }
  std::size_t increments_per_block() const { return n_inc_; }

  std::span<const double> block(std::size_t index) const;
  void set_block(std::size_t index, std::span<const double> increments);

  /// Monotone coefficients of block `index`, length p1 + m1.
  std::vector<double> block_coefficients(std::size_t index) const;

  /// theta(x) or phi(x): coefficients of the inner spline at predictor x.
  std::vector<double> coeff_at(std::span<const double> x) const;

  const std::vector<double>& flatten() const { return flat_; }

 private:
  std::shared_ptr<const ModelLayout> layout_;
  std::size_t block_count_;
  std::size_t n_inc_;
  std::vector<double> flat_;
};

CoefficientTensor unflatten(const ModelSpec& spec, std::vector<double> flat);

/// Plain-text form: a header "method,d,m1,m2,p1,p2" followed by one line of
/// comma-separated increments per block.
void write_tensor(std::ostream& out, const CoefficientTensor& tensor);
CoefficientTensor read_tensor(std::istream& in);
/// Reads blocks for an already known layout (the header line is still checked).
CoefficientTensor read_tensor(std::istream& in, const std::shared_ptr<const ModelLayout>& layout);

}  // namespace bsqr
