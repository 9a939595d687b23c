#pragma once

#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace bsqr {

/// Argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Vector or matrix dimensions disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition on a value was violated (e.g. non-monotone coefficients).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file or command line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Log-probability of an impossible configuration.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

using Rng = std::mt19937_64;

/// Uniform draw on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace bsqr
