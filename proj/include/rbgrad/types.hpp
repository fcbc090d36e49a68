#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rbgrad {

/// Flat real parameter vector. Distributions and integrands own disjoint
/// coordinate slices of it.
using ParamVector = Eigen::VectorXd;

/// One support point of a discrete distribution.
struct Atom {
  std::uint64_t index = 0;

  friend auto operator<=>(const Atom&, const Atom&) = default;
};

/// All randomness flows through an explicitly owned generator of this type.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer applied to (seed, stream). Used to derive independent
/// generator streams: trial t of master seed s runs on derive_seed(s, t), so
/// adding trials never perturbs earlier ones.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of one generator output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Selects the OpenMP kernel or its serial reference.
enum class Execution { Serial, Parallel };

/// Parameters outside the function's domain, out-of-support atoms, k > K.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Conditional sampling from a set of zero probability.
class DegenerateTailError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Non-finite values, exhausted scan caps.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an API precondition (e.g. missing auxiliary draw).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace rbgrad
