#pragma once

#include <array>

#include "rbgrad/distributions.hpp"
#include "rbgrad/estimators.hpp"
#include "rbgrad/model.hpp"

namespace rbgrad {

inline constexpr std::array<double, 3> kBernoulliTargets{0.6, 0.51, 0.48};

/// f(b) = Σ_i (b_i − p_i)², independent of η.
class SquaredErrorIntegrand final : public IntegrandOracle {
 public:
  explicit SquaredErrorIntegrand(std::array<double, 3> targets = kBernoulliTargets,
                                 std::size_t param_dim = 1)
      : targets_(targets), param_dim_(param_dim) {}

  Evaluation eval(Atom z) const override;
  double value(Atom z) const override;
  std::size_t param_dim() const override { return param_dim_; }

 private:
  std::array<double, 3> targets_;
  std::size_t param_dim_;
};

struct BernoulliProblem {
  IndependentBernoulliProduct dist;
  SquaredErrorIntegrand integrand;
};

/// q = three iid Bernoulli(σ(η)) bits as one 8-atom categorical.
BernoulliProblem bernoulli_integrand(double eta);

/// Σ_i [σ(η)(1−p_i)² + (1−σ(η))p_i²].
double bernoulli_exact_loss(double eta);

class BernoulliToyModel final : public Model {
 public:
  explicit BernoulliToyModel(double eta0 = -4.0) : eta0_(eta0) {}

  std::string name() const override { return "bernoulli"; }
  ParamVector initial_params() const override;
  double loss(const ParamVector& params) const override;
  GradEstimate loss_gradient(const ParamVector& params, const EstimatorConfig& config,
                             Rng& rng) const override;
  std::optional<std::uint64_t> latent_support_size() const override { return 8; }

 private:
  double eta0_;
};

}  // namespace rbgrad
