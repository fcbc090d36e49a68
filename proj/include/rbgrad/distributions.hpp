#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rbgrad/types.hpp"

namespace rbgrad {

/// The k highest-pmf atoms of a distribution (C_k) and the masses on both
/// sides of the split. Atoms are ordered by descending pmf, ties by index.
struct TopKSet {
  std::vector<Atom> atoms;
  double included_mass = 0.0;
  double tail_mass = 1.0;

  std::size_t size() const { return atoms.size(); }
  bool contains(Atom z) const;
};

struct WeightedAtom {
  Atom atom;
  double pmf;
};

/// Discrete distribution q_η(z) over a finite or countably infinite support.
///
/// A distribution lives inside a parameter vector of dimension param_dim()
/// and owns the coordinates [param_offset(), param_offset() + owned_dim()).
/// Scores are reported in the full vector with zeros elsewhere. Instances are
/// immutable once constructed.
class DiscreteDistribution {
 public:
  virtual ~DiscreteDistribution() = default;

  /// Number of atoms, or nullopt for a countably infinite support.
  virtual std::optional<std::uint64_t> support_size() const = 0;
  virtual bool in_support(Atom z) const = 0;

  virtual double log_pmf(Atom z) const = 0;
  double pmf(Atom z) const;

  /// out += scale * ∇_η log q_η(z).
  virtual void accumulate_score(Atom z, double scale, ParamVector& out) const = 0;
  ParamVector score(Atom z) const;

  virtual TopKSet top_k(std::size_t k) const = 0;

  /// Draw from q restricted to the complement of `topk`.
  /// Throws DegenerateTailError when the complement has zero mass.
  virtual Atom sample_conditional_complement(const TopKSet& topk, Rng& rng) const = 0;

  /// Draw from q restricted to `topk`.
  Atom sample_conditional_topk(const TopKSet& topk, Rng& rng) const;

  /// Unconditional draw. Consumes the generator exactly as
  /// sample_conditional_complement(top_k(0), rng) does.
  Atom sample(Rng& rng) const;

  /// Finite support: every atom. Infinite support: atoms in ascending order
  /// until the cumulative pmf reaches mass_cutoff.
  virtual std::vector<WeightedAtom> enumerate_support(double mass_cutoff = 1.0 - 1e-12) const = 0;

  std::size_t param_dim() const { return param_dim_; }
  std::size_t param_offset() const { return param_offset_; }

 protected:
  DiscreteDistribution(std::size_t param_dim, std::size_t param_offset)
      : param_dim_(param_dim), param_offset_(param_offset) {}

 private:
  std::size_t param_dim_;
  std::size_t param_offset_;
};

/// Shared machinery for distributions with a small finite support whose
/// log-pmf table is computed once at construction.
class FiniteDistribution : public DiscreteDistribution {
 public:
  std::optional<std::uint64_t> support_size() const override { return log_probs_.size(); }
  bool in_support(Atom z) const override { return z.index < log_probs_.size(); }
  double log_pmf(Atom z) const override;
  TopKSet top_k(std::size_t k) const override;
  Atom sample_conditional_complement(const TopKSet& topk, Rng& rng) const override;
  std::vector<WeightedAtom> enumerate_support(double mass_cutoff = 1.0 - 1e-12) const override;

  std::size_t size() const { return log_probs_.size(); }
  std::span<const double> probs() const { return probs_; }

 protected:
  FiniteDistribution(std::size_t param_dim, std::size_t param_offset)
      : DiscreteDistribution(param_dim, param_offset) {}

  void set_log_probs(std::vector<double> log_probs);
  void check_atom(Atom z) const;

 private:
  std::vector<double> log_probs_;
  std::vector<double> probs_;
};

/// Categorical over K atoms with pmf softmax(logits).
class SoftmaxCategorical final : public FiniteDistribution {
 public:
  /// The logits occupy [param_offset, param_offset + K) of a vector of
  /// dimension param_dim. Defaults place them at the start of a K-vector.
  explicit SoftmaxCategorical(std::span<const double> logits,
                              std::optional<std::size_t> param_dim = std::nullopt,
                              std::size_t param_offset = 0);
  explicit SoftmaxCategorical(const ParamVector& logits)
      : SoftmaxCategorical(std::span<const double>(logits.data(), logits.size())) {}

  void accumulate_score(Atom z, double scale, ParamVector& out) const override;
};

/// d iid Bernoulli(σ(η)) coordinates, encoded as one categorical variable
/// over 2^d atoms; bit i of the atom index is b_i.
class IndependentBernoulliProduct final : public FiniteDistribution {
 public:
  IndependentBernoulliProduct(double eta, unsigned d, std::size_t param_dim = 1,
                              std::size_t param_offset = 0);

  void accumulate_score(Atom z, double scale, ParamVector& out) const override;

  double eta() const { return eta_; }
  unsigned bits() const { return d_; }

 private:
  double eta_;
  unsigned d_;
};

/// Negative binomial shifted to start at `shift`:
///   q(N) = Γ(m+r) / (Γ(r) m!) · (1−p)^r · p^m,  m = N − shift ≥ 0,
/// parameterized by (log r, logit p) at [offset, offset+2).
class ShiftedNegativeBinomial final : public DiscreteDistribution {
 public:
  static constexpr std::uint64_t kScanCap = 1'000'000;

  ShiftedNegativeBinomial(double log_r, double logit_p, std::uint64_t shift,
                          std::size_t param_dim = 2, std::size_t param_offset = 0);

  std::optional<std::uint64_t> support_size() const override { return std::nullopt; }
  bool in_support(Atom z) const override { return z.index >= shift_; }

  /// −∞ below the shift.
  double log_pmf(Atom z) const override;
  void accumulate_score(Atom z, double scale, ParamVector& out) const override;
  TopKSet top_k(std::size_t k) const override;
  Atom sample_conditional_complement(const TopKSet& topk, Rng& rng) const override;
  std::vector<WeightedAtom> enumerate_support(double mass_cutoff = 1.0 - 1e-12) const override;

  double r() const { return r_; }
  double p() const { return p_; }
  std::uint64_t shift() const { return shift_; }
  /// Lowest atom attaining the maximum pmf.
  Atom mode() const { return Atom{shift_ + mode_offset_}; }
  double mean() const { return static_cast<double>(shift_) + r_ * p_ / (1.0 - p_); }

 private:
  double log_pmf_offset(std::uint64_t m) const;

  double log_r_;
  double logit_p_;
  double r_;
  double p_;
  double log_p_;
  double log_1mp_;
  double lgamma_r_;
  std::uint64_t shift_;
  std::uint64_t mode_offset_;
};

}  // namespace rbgrad
