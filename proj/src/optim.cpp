#include "rbgrad/optim.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <limits>

namespace rbgrad {

namespace {

void require_finite(const ParamVector& grad) {
  if (!grad.allFinite()) throw NumericError("non-finite gradient");
}

}  // namespace

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr) {
  if (!(lr > 0.0)) throw DomainError("sgd_step: lr must be > 0");
  require_finite(grad);
  return params - lr * grad;
}

void adam_step(AdamState& state, ParamVector& params, const ParamVector& grad,
               const OptimizerConfig& config) {
  require_finite(grad);
  if (state.m.size() != params.size() || state.v.size() != params.size() ||
      grad.size() != params.size()) {
    throw ContractError("adam_step: state, params and grad dimensions differ");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  params.array() -= config.lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + config.eps);
}

namespace {

struct TrialOutput {
  std::vector<TraceRecord> records;
  std::optional<TrialFailure> failure;
  ParamVector final_params;
};

TrialOutput run_trial(const Model& model, const EstimatorConfig& estimator,
                      const OptimizerConfig& optimizer, std::size_t iters, std::size_t trial,
                      std::uint64_t seed, bool record_wall_time) {
  using clock = std::chrono::steady_clock;
  TrialOutput out;
  out.records.reserve(iters);
  Rng rng(derive_seed(seed, trial));
  ParamVector params = model.initial_params();
  AdamState adam = AdamState::zeros(params.size());
  const auto start = clock::now();

  for (std::size_t it = 1; it <= iters; ++it) {
    try {
      const GradEstimate g = model.loss_gradient(params, estimator, rng);
      if (optimizer.kind == OptimizerKind::Adam) {
        adam_step(adam, params, g.grad, optimizer);
      } else {
        params = sgd_step(params, g.grad, optimizer.lr);
      }
      const double loss = model.loss(params);
      if (!std::isfinite(loss)) throw NumericError("non-finite loss");
      TraceRecord rec{trial, it, loss, g.grad.norm(), g.base_evals, 0.0};
      if (record_wall_time) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
      }
      out.records.push_back(rec);
    } catch (const std::exception& e) {
      constexpr double nan = std::numeric_limits<double>::quiet_NaN();
      out.records.push_back({trial, it, nan, nan, 0, 0.0});
      out.failure = TrialFailure{trial, it, e.what()};
      break;
    }
  }
  out.final_params = std::move(params);
  return out;
}

}  // namespace

OptimizationResult run_optimization(const Model& model, const EstimatorConfig& estimator,
                                    const OptimizerConfig& optimizer, std::size_t iters,
                                    std::size_t trials, std::uint64_t seed,
                                    const RunOptions& options) {
  if (iters == 0 || trials == 0) throw DomainError("run_optimization: need iters, trials >= 1");
  std::vector<TrialOutput> outputs(trials);
  const int jobs = options.jobs < 1 ? 1 : options.jobs;

#pragma omp parallel for num_threads(jobs) schedule(dynamic)
  for (std::size_t t = 0; t < trials; ++t) {
    outputs[t] = run_trial(model, estimator, optimizer, iters, t, seed, options.record_wall_time);
  }

  OptimizationResult result;
  result.records.reserve(iters * trials);
  for (auto& o : outputs) {
    result.records.insert(result.records.end(), o.records.begin(), o.records.end());
    if (o.failure) result.failures.push_back(std::move(*o.failure));
    result.final_params.push_back(std::move(o.final_params));
  }
  return result;
}

}  // namespace rbgrad
