#pragma once

#include <cstddef>
#include <optional>

#include "rbgrad/distributions.hpp"
#include "rbgrad/types.hpp"

namespace rbgrad {

/// f_η(z) and ∇_η f_η(z) over the same parameter vector as the paired
/// distribution.
struct Evaluation {
  double value = 0.0;
  ParamVector grad;
};

/// The integrand of E_{q_η}[f_η(z)], bound to a fixed η. Must be
/// deterministic in z and safe to call concurrently.
class IntegrandOracle {
 public:
  virtual ~IntegrandOracle() = default;
  virtual Evaluation eval(Atom z) const = 0;
  /// f_η(z) alone; override when the gradient is expensive.
  virtual double value(Atom z) const { return eval(z).value; }
  virtual std::size_t param_dim() const = 0;
};

/// A gradient estimate and the number of base-estimator evaluations it cost.
struct GradEstimate {
  ParamVector grad;
  std::size_t base_evals = 0;
};

enum class BaseEstimator {
  Reinforce,      ///< f(z)·score(z) + ∇f(z)
  ReinforcePlus,  ///< [f(z) − f(z′)]·score(z) + ∇f(z), z′ ∼ q independent
};

/// Auxiliary randomness of a base estimator, fixed before the main draw.
struct AuxDraws {
  std::optional<Atom> control_variate_atom;
};

/// Σ_z q(z)[f(z)·score(z) + ∇f(z)]. Infinite supports are enumerated up to
/// `mass_cutoff`. base_evals = number of atoms visited.
GradEstimate exact_gradient(const DiscreteDistribution& dist, const IntegrandOracle& f,
                            double mass_cutoff = 1.0 - 1e-12);

/// Exact objective E_q[f] by the same enumeration.
double exact_expectation(const DiscreteDistribution& dist, const IntegrandOracle& f,
                         double mass_cutoff = 1.0 - 1e-12);

ParamVector reinforce_at(const DiscreteDistribution& dist, const IntegrandOracle& f, Atom z);

/// Throws ContractError when aux carries no control-variate atom.
ParamVector reinforce_plus_at(const DiscreteDistribution& dist, const IntegrandOracle& f, Atom z,
                              const AuxDraws& aux);

/// The base estimator's value at a given atom with its auxiliary randomness fixed.
ParamVector eval_at(BaseEstimator base, const DiscreteDistribution& dist,
                    const IntegrandOracle& f, Atom z, const AuxDraws& aux);

/// Draw the auxiliary randomness a base estimator needs (z′ for REINFORCE+).
AuxDraws draw_aux(BaseEstimator base, const DiscreteDistribution& dist, Rng& rng);

/// One draw of the base estimator: aux first, then z ∼ q.
GradEstimate estimate(BaseEstimator base, const DiscreteDistribution& dist,
                      const IntegrandOracle& f, Rng& rng);

/// Σ_{z∈C_k} q(z)·g(z) + q(C̄_k)·g(v), v ∼ q|C̄_k, with one aux draw shared by
/// every evaluation. The sampled term is skipped when q(C̄_k) = 0.
/// base_evals = k + 1, or k when the tail is empty.
GradEstimate rao_blackwellize(BaseEstimator base, const DiscreteDistribution& dist,
                              const IntegrandOracle& f, std::size_t k, Rng& rng);

/// Mean of n independent estimate() draws. base_evals = n.
GradEstimate minibatch(BaseEstimator base, const DiscreteDistribution& dist,
                       const IntegrandOracle& f, std::size_t n, Rng& rng);

/// Budget of n evaluations split into k summed atoms and n − k conditional
/// tail draws (one shared aux). k = n is allowed only with an empty tail.
GradEstimate rb_budgeted(BaseEstimator base, const DiscreteDistribution& dist,
                         const IntegrandOracle& f, std::size_t n, std::size_t k, Rng& rng);

/// argmin over k ∈ {0..n} of q(C̄_k)/(n − k); k = n only when q(C̄_n) = 0.
/// Ties go to the smaller k.
std::size_t select_k(const DiscreteDistribution& dist, std::size_t n);

/// T(u, v, b) = u if b = 0, v if b = 1.
constexpr Atom compose_triplet(Atom u, Atom v, bool b) { return b ? v : u; }

enum class EstimatorKind { Exact, Reinforce, ReinforcePlus };

/// Which gradient estimator an experiment steps with.
///   kind = Exact                 → exact_gradient
///   budgeted                     → rb_budgeted(minibatch_n, rb_k or select_k when auto_k)
///   rb_k > 0                     → rao_blackwellize(rb_k)
///   minibatch_n > 1              → minibatch(minibatch_n)
///   otherwise                    → estimate
struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::ReinforcePlus;
  std::size_t rb_k = 0;
  std::size_t minibatch_n = 1;
  bool budgeted = false;
  bool auto_k = false;

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

/// Base evaluations one call of `config` costs on a support of `support` atoms
/// (nullopt = infinite), assuming a non-degenerate tail.
std::size_t nominal_base_evals(const EstimatorConfig& config,
                               std::optional<std::uint64_t> support);

GradEstimate estimate_with(const EstimatorConfig& config, const DiscreteDistribution& dist,
                           const IntegrandOracle& f, Rng& rng);

}  // namespace rbgrad
