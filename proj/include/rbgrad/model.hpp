#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rbgrad/estimators.hpp"
#include "rbgrad/types.hpp"

namespace rbgrad {

/// An experiment objective over a flat parameter vector: an exact reporting
/// loss plus a stochastic gradient of that loss from a configurable estimator.
/// Losses are minimized; ELBO models report the negative ELBO.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual ParamVector initial_params() const = 0;
  virtual double loss(const ParamVector& params) const = 0;
  virtual GradEstimate loss_gradient(const ParamVector& params, const EstimatorConfig& config,
                                     Rng& rng) const = 0;
  /// Support size of the model's discrete latent variable (nullopt = infinite).
  virtual std::optional<std::uint64_t> latent_support_size() const = 0;
};

}  // namespace rbgrad
