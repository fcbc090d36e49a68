#include "rbgrad/estimators.hpp"

#include <limits>
#include <string>

namespace rbgrad {

namespace {

ParamVector zeros_like(const DiscreteDistribution& dist) {
  return ParamVector::Zero(static_cast<Eigen::Index>(dist.param_dim()));
}

// [f(z) − baseline]·score(z) + ∇f(z)
ParamVector eval_with_baseline(const DiscreteDistribution& dist, const IntegrandOracle& f,
                               Atom z, double baseline) {
  if (!dist.in_support(z)) {
    throw DomainError("estimator evaluated at out-of-support atom " + std::to_string(z.index));
  }
  Evaluation e = f.eval(z);
  if (static_cast<std::size_t>(e.grad.size()) != dist.param_dim()) {
    throw ContractError("integrand gradient dimension does not match the distribution's");
  }
  dist.accumulate_score(z, e.value - baseline, e.grad);
  return std::move(e.grad);
}

double baseline_of(BaseEstimator base, const IntegrandOracle& f, const AuxDraws& aux) {
  switch (base) {
    case BaseEstimator::Reinforce:
      return 0.0;
    case BaseEstimator::ReinforcePlus:
      if (!aux.control_variate_atom) {
        throw ContractError("REINFORCE+ needs a control-variate atom in AuxDraws");
      }
      return f.value(*aux.control_variate_atom);
  }
  return 0.0;
}

}  // namespace

GradEstimate exact_gradient(const DiscreteDistribution& dist, const IntegrandOracle& f,
                            double mass_cutoff) {
  GradEstimate out{zeros_like(dist), 0};
  for (const auto& [z, q] : dist.enumerate_support(mass_cutoff)) {
    ++out.base_evals;
    if (q == 0.0) continue;
    Evaluation e = f.eval(z);
    out.grad.noalias() += q * e.grad;
    dist.accumulate_score(z, q * e.value, out.grad);
  }
  return out;
}

double exact_expectation(const DiscreteDistribution& dist, const IntegrandOracle& f,
                         double mass_cutoff) {
  double acc = 0.0;
  for (const auto& [z, q] : dist.enumerate_support(mass_cutoff)) {
    if (q > 0.0) acc += q * f.value(z);
  }
  return acc;
}

ParamVector reinforce_at(const DiscreteDistribution& dist, const IntegrandOracle& f, Atom z) {
  return eval_with_baseline(dist, f, z, 0.0);
}

ParamVector reinforce_plus_at(const DiscreteDistribution& dist, const IntegrandOracle& f, Atom z,
                              const AuxDraws& aux) {
  return eval_with_baseline(dist, f, z, baseline_of(BaseEstimator::ReinforcePlus, f, aux));
}

ParamVector eval_at(BaseEstimator base, const DiscreteDistribution& dist,
                    const IntegrandOracle& f, Atom z, const AuxDraws& aux) {
  return eval_with_baseline(dist, f, z, baseline_of(base, f, aux));
}

AuxDraws draw_aux(BaseEstimator base, const DiscreteDistribution& dist, Rng& rng) {
  AuxDraws aux;
  if (base == BaseEstimator::ReinforcePlus) aux.control_variate_atom = dist.sample(rng);
  return aux;
}

GradEstimate estimate(BaseEstimator base, const DiscreteDistribution& dist,
                      const IntegrandOracle& f, Rng& rng) {
  const AuxDraws aux = draw_aux(base, dist, rng);
  const Atom z = dist.sample(rng);
  return {eval_at(base, dist, f, z, aux), 1};
}

GradEstimate rao_blackwellize(BaseEstimator base, const DiscreteDistribution& dist,
                              const IntegrandOracle& f, std::size_t k, Rng& rng) {
  const TopKSet topk = dist.top_k(k);
  const AuxDraws aux = draw_aux(base, dist, rng);
  const double baseline = baseline_of(base, f, aux);

  GradEstimate out{zeros_like(dist), topk.size()};
  for (Atom u : topk.atoms) {
    out.grad.noalias() += dist.pmf(u) * eval_with_baseline(dist, f, u, baseline);
  }
  if (topk.tail_mass > 0.0) {
    const Atom v = dist.sample_conditional_complement(topk, rng);
    out.grad.noalias() += topk.tail_mass * eval_with_baseline(dist, f, v, baseline);
    ++out.base_evals;
  }
  return out;
}

GradEstimate minibatch(BaseEstimator base, const DiscreteDistribution& dist,
                       const IntegrandOracle& f, std::size_t n, Rng& rng) {
  if (n == 0) throw DomainError("minibatch: need n >= 1");
  GradEstimate out{zeros_like(dist), n};
  for (std::size_t j = 0; j < n; ++j) {
    const AuxDraws aux = draw_aux(base, dist, rng);
    const Atom z = dist.sample(rng);
    out.grad.noalias() += eval_at(base, dist, f, z, aux);
  }
  out.grad *= 1.0 / static_cast<double>(n);
  return out;
}

GradEstimate rb_budgeted(BaseEstimator base, const DiscreteDistribution& dist,
                         const IntegrandOracle& f, std::size_t n, std::size_t k, Rng& rng) {
  if (n == 0) throw DomainError("rb_budgeted: need n >= 1");
  if (k > n) throw DomainError("rb_budgeted: need k <= n");
  const TopKSet topk = dist.top_k(k);
  if (k == n && topk.tail_mass > 0.0) {
    throw DomainError("rb_budgeted: k = n leaves no draws for a tail of mass " +
                      std::to_string(topk.tail_mass));
  }
  const AuxDraws aux = draw_aux(base, dist, rng);
  const double baseline = baseline_of(base, f, aux);

  GradEstimate out{zeros_like(dist), topk.size()};
  for (Atom u : topk.atoms) {
    out.grad.noalias() += dist.pmf(u) * eval_with_baseline(dist, f, u, baseline);
  }
  if (topk.tail_mass > 0.0) {
    const std::size_t draws = n - k;
    ParamVector tail = zeros_like(dist);
    for (std::size_t j = 0; j < draws; ++j) {
      const Atom v = dist.sample_conditional_complement(topk, rng);
      tail.noalias() += eval_with_baseline(dist, f, v, baseline);
    }
    out.grad.noalias() += (topk.tail_mass / static_cast<double>(draws)) * tail;
    out.base_evals += draws;
  }
  return out;
}

std::size_t select_k(const DiscreteDistribution& dist, std::size_t n) {
  if (n == 0) throw DomainError("select_k: need n >= 1");
  std::size_t k_max = n;
  if (auto size = dist.support_size(); size && *size < k_max) k_max = static_cast<std::size_t>(*size);

  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double tail = dist.top_k(k).tail_mass;
    double value;
    if (k < n) {
      value = tail / static_cast<double>(n - k);
    } else if (tail == 0.0) {
      value = 0.0;
    } else {
      continue;
    }
    if (value < best_value) {
      best_value = value;
      best = k;
    }
  }
  return best;
}

std::size_t nominal_base_evals(const EstimatorConfig& config,
                               std::optional<std::uint64_t> support) {
  if (config.kind == EstimatorKind::Exact) {
    return support ? static_cast<std::size_t>(*support) : 0;
  }
  if (config.budgeted) return config.minibatch_n;
  if (config.rb_k > 0) {
    const bool empty_tail = support && config.rb_k >= *support;
    return config.rb_k + (empty_tail ? 0 : 1);
  }
  return config.minibatch_n;
}

GradEstimate estimate_with(const EstimatorConfig& config, const DiscreteDistribution& dist,
                           const IntegrandOracle& f, Rng& rng) {
  if (config.kind == EstimatorKind::Exact) return exact_gradient(dist, f);
  const BaseEstimator base = config.kind == EstimatorKind::Reinforce
                                 ? BaseEstimator::Reinforce
                                 : BaseEstimator::ReinforcePlus;
  if (config.budgeted) {
    const std::size_t k = config.auto_k ? select_k(dist, config.minibatch_n) : config.rb_k;
    return rb_budgeted(base, dist, f, config.minibatch_n, k, rng);
  }
  if (config.rb_k > 0) return rao_blackwellize(base, dist, f, config.rb_k, rng);
  if (config.minibatch_n > 1) return minibatch(base, dist, f, config.minibatch_n, rng);
  return estimate(base, dist, f, rng);
}

}  // namespace rbgrad
