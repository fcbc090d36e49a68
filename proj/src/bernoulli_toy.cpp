#include "rbgrad/bernoulli_toy.hpp"

namespace rbgrad {

double SquaredErrorIntegrand::value(Atom z) const {
  double f = 0.0;
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    const double b = static_cast<double>((z.index >> i) & 1U);
    f += (b - targets_[i]) * (b - targets_[i]);
  }
  return f;
}

Evaluation SquaredErrorIntegrand::eval(Atom z) const {
  return {value(z), ParamVector::Zero(static_cast<Eigen::Index>(param_dim_))};
}

BernoulliProblem bernoulli_integrand(double eta) {
  return {IndependentBernoulliProduct(eta, 3), SquaredErrorIntegrand()};
}

double bernoulli_exact_loss(double eta) {
  const double s = sigmoid(eta);
  double loss = 0.0;
  for (double p : kBernoulliTargets) loss += s * (1.0 - p) * (1.0 - p) + (1.0 - s) * p * p;
  return loss;
}

ParamVector BernoulliToyModel::initial_params() const {
  return ParamVector::Constant(1, eta0_);
}

double BernoulliToyModel::loss(const ParamVector& params) const {
  return bernoulli_exact_loss(params[0]);
}

GradEstimate BernoulliToyModel::loss_gradient(const ParamVector& params,
                                              const EstimatorConfig& config, Rng& rng) const {
  const BernoulliProblem problem = bernoulli_integrand(params[0]);
  return estimate_with(config, problem.dist, problem.integrand, rng);
}

}  // namespace rbgrad
