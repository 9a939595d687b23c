#include "bsqr/coeff_model.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include "bsqr/error.hpp"
#include "text.hpp"

namespace bsqr {

std::string to_string(Method method) { return method == Method::npsqr ? "npsqr" : "npdfsqr"; }

Method parse_method(const std::string& text) {
  if (text == "npsqr" || text == "NPSQR") return Method::npsqr;
  if (text == "npdfsqr" || text == "NPDFSQR") return Method::npdfsqr;
  throw FormatError("unknown method '" + text + "' (expected npsqr or npdfsqr)");
}

void ModelSpec::validate() const {
  if (d < 1) throw DomainError("predictor dimension must be at least 1");
  if (m1 < 1 || m2 < 1) throw DomainError("spline degrees must be at least 1");
  if (p1 < 1 || p2 < 1) throw DomainError("segment counts must be at least 1");
  if (m1 > BasisConfig::kMaxDegree || m2 > BasisConfig::kMaxDegree) {
    throw DomainError("spline degree too large");
  }
}

std::size_t ModelSpec::block_count() const {
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) n *= blocks_per_axis();
  return n;
}

void SimplexBlock::validate(std::span<const double> increments) {
  if (increments.empty()) throw ShapeError("simplex block is empty");
  double sum = 0.0;
  for (double g : increments) {
    if (!(g >= 0.0)) throw ContractError("simplex increment is negative or NaN");
    sum += g;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ContractError("simplex increments sum to " + text::format(sum) + ", not 1");
  }
}

SimplexBlock::SimplexBlock(std::vector<double> increments) : values_(std::move(increments)) {
  validate(values_);
}

std::vector<double> reconstruct_block(std::span<const double> increments) {
  for (double g : increments) {
    if (!(g >= 0.0)) throw ContractError("negative increment in simplex block");
  }
  std::vector<double> alpha(increments.size() + 1, 0.0);
  // Clamp and pin the endpoint so rounding in the running sum never leaves
  // [0,1] or overshoots the final coefficient.
  for (std::size_t j = 0; j < increments.size(); ++j) alpha[j + 1] = std::min(alpha[j] + increments[j], 1.0);
  alpha.back() = 1.0;
  return alpha;
}

ModelLayout::ModelLayout(const ModelSpec& s)
    : spec((s.validate(), s)), inner(s.m1, s.p1), outer(s.m2, s.p2) {}

MixtureWeights mixture_weights(const ModelLayout& layout, std::span<const double> x) {
  const ModelSpec& spec = layout.spec;
  if (x.size() != static_cast<std::size_t>(spec.d)) {
    throw ShapeError("predictor has " + std::to_string(x.size()) + " coordinates, model expects " +
                     std::to_string(spec.d));
  }
  const std::size_t local = static_cast<std::size_t>(spec.m2 + 1);
  const std::size_t axis = spec.blocks_per_axis();

  std::vector<std::size_t> first(x.size());
  std::vector<std::array<double, BasisConfig::kMaxDegree + 1>> values(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
      throw DomainError("predictor coordinate " + text::format(x[i]) + " outside [0,1]");
    }
    first[i] = layout.outer.nonzero_basis(x[i], values[i]);
  }

  std::size_t total = 1;
  for (std::size_t i = 0; i < x.size(); ++i) total *= local;
  MixtureWeights out;
  out.blocks.reserve(total);
  out.weights.reserve(total);
  // Odometer over local offsets, last coordinate fastest, so blocks come out in lexicographic order.
  std::vector<std::size_t> offset(x.size(), 0);
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t index = 0;
    double w = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      index = index * axis + first[i] + offset[i];
      w *= values[i][offset[i]];
    }
    out.blocks.push_back(index);
    out.weights.push_back(w);
    for (std::size_t i = x.size(); i-- > 0;) {
      if (++offset[i] < local) break;
      offset[i] = 0;
    }
  }
  return out;
}

CoefficientTensor::CoefficientTensor(const ModelSpec& spec)
    : layout_(std::make_shared<const ModelLayout>(spec)),
      block_count_(spec.block_count()),
      n_inc_(spec.increments_per_block()),
      flat_(block_count_ * n_inc_, 1.0 / static_cast<double>(spec.increments_per_block())) {}

CoefficientTensor::CoefficientTensor(std::shared_ptr<const ModelLayout> layout, std::vector<double> flat)
    : layout_(std::move(layout)),
      block_count_(layout_->spec.block_count()),
      n_inc_(layout_->spec.increments_per_block()),
      flat_(std::move(flat)) {
  if (flat_.size() != block_count_ * n_inc_) {
    throw ShapeError("coefficient vector has length " + std::to_string(flat_.size()) + ", expected " +
                     std::to_string(block_count_ * n_inc_));
  }
  for (std::size_t b = 0; b < block_count_; ++b) SimplexBlock::validate(block(b));
}

CoefficientTensor CoefficientTensor::identity(const ModelSpec& spec) {
  CoefficientTensor t(spec);
  const std::vector<double> g = t.layout().inner.greville();
  std::vector<double> inc(g.size() - 1);
  for (std::size_t j = 0; j < inc.size(); ++j) inc[j] = g[j + 1] - g[j];
  for (std::size_t b = 0; b < t.block_count(); ++b) t.set_block(b, inc);
  return t;
}

std::span<const double> CoefficientTensor::block(std::size_t index) const {
  if (index >= block_count_) throw ShapeError("block index out of range");
  return std::span<const double>(flat_).subspan(index * n_inc_, n_inc_);
}

void CoefficientTensor::set_block(std::size_t index, std::span<const double> increments) {
  if (index >= block_count_) throw ShapeError("block index out of range");
  if (increments.size() != n_inc_) {
    throw ShapeError("block has " + std::to_string(increments.size()) + " increments, expected " +
                     std::to_string(n_inc_));
  }
  SimplexBlock::validate(increments);
  std::copy(increments.begin(), increments.end(), flat_.begin() + static_cast<std::ptrdiff_t>(index * n_inc_));
}

std::vector<double> CoefficientTensor::block_coefficients(std::size_t index) const {
  return reconstruct_block(block(index));
}

std::vector<double> CoefficientTensor::coeff_at(std::span<const double> x) const {
  const MixtureWeights mix = mixture_weights(*layout_, x);
  std::vector<double> theta(n_inc_ + 1, 0.0);
  for (std::size_t t = 0; t < mix.blocks.size(); ++t) {
    const double w = mix.weights[t];
    if (w == 0.0) continue;
    const std::vector<double> alpha = reconstruct_block(block(mix.blocks[t]));
    for (std::size_t j = 1; j < alpha.size(); ++j) theta[j] += w * alpha[j];
  }
  return theta;
}

CoefficientTensor unflatten(const ModelSpec& spec, std::vector<double> flat) {
  return CoefficientTensor(std::make_shared<const ModelLayout>(spec), std::move(flat));
}

namespace {

ModelSpec parse_header(const std::string& line) {
  const auto fields = text::split(line, ',');
  if (fields.size() != 6) throw FormatError("tensor header must be method,d,m1,m2,p1,p2");
  ModelSpec spec;
  spec.method = parse_method(std::string(fields[0]));
  spec.d = static_cast<int>(text::to_int(fields[1]));
  spec.m1 = static_cast<int>(text::to_int(fields[2]));
  spec.m2 = static_cast<int>(text::to_int(fields[3]));
  spec.p1 = static_cast<int>(text::to_int(fields[4]));
  spec.p2 = static_cast<int>(text::to_int(fields[5]));
  spec.validate();
  return spec;
}

std::string next_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) return line;
  }
  throw FormatError("unexpected end of tensor data");
}

CoefficientTensor read_blocks(std::istream& in, std::shared_ptr<const ModelLayout> layout) {
  const ModelSpec& spec = layout->spec;
  std::vector<double> flat;
  flat.reserve(spec.block_count() * spec.increments_per_block());
  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const std::vector<double> row = text::to_doubles(next_line(in));
    if (row.size() != spec.increments_per_block()) {
      throw FormatError("tensor block " + std::to_string(b) + " has " + std::to_string(row.size()) +
                        " increments, expected " + std::to_string(spec.increments_per_block()));
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return CoefficientTensor(std::move(layout), std::move(flat));
}

}  // namespace

void write_tensor(std::ostream& out, const CoefficientTensor& tensor) {
  const ModelSpec& s = tensor.spec();
  out << to_string(s.method) << ',' << s.d << ',' << s.m1 << ',' << s.m2 << ',' << s.p1 << ',' << s.p2
      << '\n';
  for (std::size_t b = 0; b < tensor.block_count(); ++b) {
    const auto inc = tensor.block(b);
    for (std::size_t j = 0; j < inc.size(); ++j) {
      if (j) out << ',';
      out << text::format(inc[j]);
    }
    out << '\n';
  }
}

CoefficientTensor read_tensor(std::istream& in) {
  const ModelSpec spec = parse_header(next_line(in));
  return read_blocks(in, std::make_shared<const ModelLayout>(spec));
}

CoefficientTensor read_tensor(std::istream& in, const std::shared_ptr<const ModelLayout>& layout) {
  const ModelSpec spec = parse_header(next_line(in));
  if (!(spec == layout->spec)) throw FormatError("tensor header does not match the expected model");
  return read_blocks(in, layout);
}

}  // namespace bsqr
