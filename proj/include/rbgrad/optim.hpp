#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rbgrad/model.hpp"
#include "rbgrad/types.hpp"

namespace rbgrad {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// η − lr·grad. Throws NumericError on a non-finite gradient.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double lr);

struct AdamState {
  std::size_t t = 0;
  ParamVector m;  // first moment
  ParamVector v;  // second moment

  static AdamState zeros(Eigen::Index dim) {
    return {0, ParamVector::Zero(dim), ParamVector::Zero(dim)};
  }
};

/// Bias-corrected Adam update, in place on both state and params.
void adam_step(AdamState& state, ParamVector& params, const ParamVector& grad,
               const OptimizerConfig& config);

struct TraceRecord {
  std::size_t trial = 0;
  std::size_t iter = 0;  // steps taken so far (1-based)
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t base_evals = 0;
  double wall_ms = 0.0;
};

struct TrialFailure {
  std::size_t trial = 0;
  std::size_t iter = 0;
  std::string message;
};

struct OptimizationResult {
  /// Sorted by (trial, iter). A failed trial ends with a record whose loss
  /// and grad_norm are NaN.
  std::vector<TraceRecord> records;
  std::vector<TrialFailure> failures;
  std::vector<ParamVector> final_params;  // per trial
};

struct RunOptions {
  int jobs = 1;
  bool record_wall_time = true;
};

/// Runs `trials` independent optimizations of `iters` steps each from the
/// model's initial parameters. Trial t draws from derive_seed(seed, t).
OptimizationResult run_optimization(const Model& model, const EstimatorConfig& estimator,
                                    const OptimizerConfig& optimizer, std::size_t iters,
                                    std::size_t trials, std::uint64_t seed,
                                    const RunOptions& options = {});

}  // namespace rbgrad
