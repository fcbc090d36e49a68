#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbgrad/estimators.hpp"
#include "rbgrad/model.hpp"
#include "rbgrad/optim.hpp"

#include "json.hpp"

namespace rbgrad {

enum class Experiment { Bernoulli, Gmm, NMixture, Diagnose };

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& name);

/// Everything needed to replay one CLI invocation.
struct ExperimentConfig {
  Experiment experiment = Experiment::Bernoulli;

  // Estimator. rb_k and minibatch_n are signed so that negative input is a
  // validation error rather than a wrap-around.
  EstimatorKind estimator = EstimatorKind::ReinforcePlus;
  std::int64_t rb_k = 0;
  std::int64_t minibatch_n = 1;
  bool budgeted = false;
  bool auto_k = false;

  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-2;
  std::int64_t iters = 2000;
  std::int64_t trials = 1;
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 1;  // dataset simulation and K-means init
  std::int64_t jobs = 1;
  std::string out;  // empty = <RBGRAD_OUT_DIR or .>/<experiment>.csv
  bool wall_time = true;

  // bernoulli
  double eta0 = -4.0;
  // gmm
  std::int64_t components = 10;
  std::int64_t observations = 200;
  std::int64_t dim = 2;
  double sigma0 = 5.0;
  double sigma_y = 0.5;
  // nmixture
  double lambda = 10.0;
  double p = 0.2;
  std::int64_t n_true = 10;
  std::int64_t count = 1000;
  double init_r = 5.0;
  double init_p = 0.5;
  // gmm and nmixture datasets
  std::string data_path;       // read instead of simulating
  std::string save_data_path;  // write the dataset used

  // diagnose
  std::vector<std::string> suites;  // empty = all
  std::int64_t cases = 100;
  std::int64_t draws = 100'000;
  std::string sweep_out;  // optional Bernoulli variance-vs-k table
  double sweep_eta = -4.0;
  std::vector<std::int64_t> k_list{0, 1, 2, 3, 4, 5, 6, 7, 8};

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Defaults per experiment: bernoulli lr 1e-2, 2000 iters; gmm lr 1e-3,
/// 10000 iters; nmixture lr 1e-3, 40000 iters.
ExperimentConfig default_config(Experiment experiment);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Usage errors exit with 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every problem with the config, one message per offending field. Empty = valid.
std::vector<std::string> validate(const ExperimentConfig& config);

/// The estimator configuration the optimizer steps with.
EstimatorConfig estimator_config(const ExperimentConfig& config);

/// argv[1] is the subcommand. Precedence: flags, then the --config JSON file
/// (a bare config object or {"config": {...}}), then default_config.
/// Throws UsageError on unknown flags, bad values or failed validation.
/// Returns nullopt when help was printed.
std::optional<ExperimentConfig> parse_config(int argc, const char* const* argv,
                                             std::ostream& help_out);

/// Output path with the environment default applied.
std::string resolve_out_path(const ExperimentConfig& config);

std::unique_ptr<Model> build_model(const ExperimentConfig& config);

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& records);

struct TraceSummary {
  std::size_t completed_trials = 0;
  double final_mean_loss = 0.0;
  double final_loss_se = 0.0;  // NaN with fewer than two completed trials
};

/// Final-iteration loss over trials that did not abort.
TraceSummary summarize(const OptimizationResult& result, std::size_t iters);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // IO, or a failed diagnostic suite
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs an experiment or the diagnostics; messages go to `log`, the
/// diagnostics table to `out`.
int run(const ExperimentConfig& config, std::ostream& out, std::ostream& log);

/// parse_config + run with exit-code mapping.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& log);

}  // namespace rbgrad
