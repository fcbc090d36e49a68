#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbgrad/distributions.hpp"
#include "rbgrad/estimators.hpp"
#include "rbgrad/types.hpp"

namespace rbgrad {

struct MomentsReport {
  ParamVector mean;
  ParamVector variance;           // per coordinate, (M−1) denominator; exact when samples = 0
  ParamVector std_error;          // √(variance / M)
  ParamVector variance_std_error; // √((m4 − var²) / M), zero for exact reports
  double total_variance = 0.0;    // Σ_i variance_i
  std::size_t samples = 0;        // M; 0 marks an exact (enumerated) report
  std::size_t non_finite = 0;     // draws dropped for containing NaN/inf
};

/// Streaming central moments up to order four, per coordinate. Single
/// samples and whole accumulators merge with the same pairwise update.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Eigen::Index dim = 0);

  void add(const ParamVector& x);
  void merge(const MomentAccumulator& other);

  std::size_t count() const { return n_; }
  MomentsReport report(std::size_t non_finite = 0) const;

 private:
  std::size_t n_ = 0;
  Eigen::ArrayXd mean_, m2_, m3_, m4_;
};

/// One estimator draw given a generator.
using EstimatorCall = std::function<ParamVector(Rng&)>;

/// Draws are split into fixed chunks of kMomentChunk; chunk c runs on
/// Rng(derive_seed(seed, c)), so the parallel kernel and the serial
/// reference see the same samples regardless of thread count.
inline constexpr std::size_t kMomentChunk = 4096;

MomentsReport empirical_moments(const EstimatorCall& call, std::size_t draws, std::uint64_t seed,
                                Execution execution = Execution::Parallel);

// --- Exact enumeration -------------------------------------------------------

/// Estimator shape for enumeration and sampling.
struct EstimatorSpec {
  enum class Kind { Single, RaoBlackwell, Minibatch, Budgeted };
  Kind kind = Kind::Single;
  BaseEstimator base = BaseEstimator::Reinforce;
  std::size_t k = 0;  // RaoBlackwell, Budgeted
  std::size_t n = 1;  // Minibatch, Budgeted

  std::string label() const;
};

GradEstimate run_spec(const EstimatorSpec& spec, const DiscreteDistribution& dist,
                      const IntegrandOracle& f, Rng& rng);

inline constexpr std::size_t kMaxEnumeration = 4096;

/// Exact mean and variance of an estimator by enumerating the control-variate
/// atom and the main/conditional atom, weighted by their probabilities.
/// Averages of iid draws use V/n (minibatch) or the conditional-on-aux
/// variance ε²·V[g(v)|z′]/(n−k) (budgeted). Finite supports only.
MomentsReport exact_moments(const EstimatorSpec& spec, const DiscreteDistribution& dist,
                            const IntegrandOracle& f);

/// max_z |P(T(u,v,b) = z) − q(z)| by explicit summation over (u, v, b).
double check_triplet_law(const FiniteDistribution& dist, std::size_t k);

/// Per-coordinate |V[g(z)] − V[ĝ(v)] − E[V[g(T(u,v,b)) | v]]| with the
/// auxiliary draw held fixed.
ParamVector variance_decomposition_residual(const FiniteDistribution& dist,
                                            const IntegrandOracle& f, std::size_t k,
                                            BaseEstimator base, const AuxDraws& aux);

/// max over v and coordinates of |Σ_{u,b} P(u)P(b)·g(T(u,v,b)) − ĝ(v)|.
double rao_blackwell_identity_residual(const FiniteDistribution& dist, const IntegrandOracle& f,
                                       std::size_t k, BaseEstimator base, const AuxDraws& aux);

// --- Finite differences ------------------------------------------------------

using ScalarFunction = std::function<double(const ParamVector&)>;

/// Central differences per coordinate. Throws NumericError on non-finite values.
ParamVector finite_diff_grad(const ScalarFunction& fn, const ParamVector& at, double h = 1e-5);

/// |a − b| / max(1, |a|, |b|): relative error with a unit floor.
double relative_error(double a, double b);

// --- Variance sweep ----------------------------------------------------------

struct SweepRow {
  std::size_t k = 0;
  double tail_mass = 0.0;
  MomentsReport moments;
};

std::vector<SweepRow> variance_vs_k_sweep(const DiscreteDistribution& dist,
                                          const IntegrandOracle& f, BaseEstimator base,
                                          const std::vector<std::size_t>& k_list,
                                          std::size_t draws, std::uint64_t seed,
                                          Execution execution = Execution::Parallel);

/// Columns: k,tail_mass,total_variance,var_0,...,var_{d-1}
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

// --- Random instances --------------------------------------------------------

/// f_η(z) = a_z + b_z·η over the logits η of a softmax categorical.
class TableIntegrand final : public IntegrandOracle {
 public:
  TableIntegrand(std::vector<double> offsets, Eigen::MatrixXd slopes, ParamVector eta);

  Evaluation eval(Atom z) const override;
  double value(Atom z) const override;
  std::size_t param_dim() const override { return static_cast<std::size_t>(eta_.size()); }

 private:
  std::vector<double> offsets_;
  Eigen::MatrixXd slopes_;  // K × dim
  ParamVector eta_;
};

struct RandomInstance {
  SoftmaxCategorical dist;
  TableIntegrand integrand;
};

/// K ∈ {k_min..k_max}; logits ∼ N(0, 2²); offsets and slopes ∼ N(0, 1).
RandomInstance random_instance(Rng& rng, std::size_t k_min = 3, std::size_t k_max = 10);

// --- Property suites ---------------------------------------------------------

struct SuiteOptions {
  std::size_t cases = 100;
  std::uint64_t seed = 1;
  std::size_t draws = 100'000;  // Monte-Carlo draws for empirical suites
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // suite-specific statistic (max residual, max ratio, ...)
  std::string detail;
};

/// Known names: unbiased, triplet, decomposition, prop1, prop1-empirical,
/// prop2, gradcheck, budget, concentration.
std::vector<std::string> suite_names();
SuiteResult run_suite(const std::string& name, const SuiteOptions& options);

}  // namespace rbgrad
