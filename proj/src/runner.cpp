#include "rbgrad/runner.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "rbgrad/bernoulli_toy.hpp"
#include "rbgrad/diagnostics.hpp"
#include "rbgrad/gmm.hpp"
#include "rbgrad/io.hpp"
#include "rbgrad/nmixture.hpp"

namespace rbgrad {

namespace {

constexpr const char* kOutDirEnv = "RBGRAD_OUT_DIR";

std::string estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Exact:
      return "exact";
    case EstimatorKind::Reinforce:
      return "reinforce";
    case EstimatorKind::ReinforcePlus:
      return "reinforce-plus";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& s) {
  if (s == "exact") return EstimatorKind::Exact;
  if (s == "reinforce") return EstimatorKind::Reinforce;
  if (s == "reinforce-plus") return EstimatorKind::ReinforcePlus;
  throw UsageError("unknown estimator '" + s + "'");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw UsageError("unknown optimizer '" + s + "'");
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Bernoulli:
      return "bernoulli";
    case Experiment::Gmm:
      return "gmm";
    case Experiment::NMixture:
      return "nmixture";
    case Experiment::Diagnose:
      return "diagnose";
  }
  return "?";
}

Experiment parse_experiment(const std::string& name) {
  for (Experiment e : {Experiment::Bernoulli, Experiment::Gmm, Experiment::NMixture,
                       Experiment::Diagnose}) {
    if (to_string(e) == name) return e;
  }
  throw UsageError("unknown experiment '" + name + "'");
}

ExperimentConfig default_config(Experiment experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  // lr 1e-3 for the two ELBO models; iteration counts are where the exact
  // runs plateau at that step size.
  if (experiment == Experiment::Gmm) {
    c.lr = 1e-3;
    c.iters = 10000;
  }
  // The fit drifts toward a near-point mass (r → ∞, p → 0) and needs the extra steps.
  if (experiment == Experiment::NMixture) {
    c.lr = 1e-3;
    c.iters = 40000;
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{
      {"experiment", to_string(c.experiment)},
      {"estimator", estimator_name(c.estimator)},
      {"rb_k", c.rb_k},
      {"minibatch_n", c.minibatch_n},
      {"budgeted", c.budgeted},
      {"auto_k", c.auto_k},
      {"optimizer", optimizer_name(c.optimizer)},
      {"lr", c.lr},
      {"iters", c.iters},
      {"trials", c.trials},
      {"seed", c.seed},
      {"data_seed", c.data_seed},
      {"jobs", c.jobs},
      {"out", c.out},
      {"wall_time", c.wall_time},
      {"eta0", c.eta0},
      {"components", c.components},
      {"observations", c.observations},
      {"dim", c.dim},
      {"sigma0", c.sigma0},
      {"sigma_y", c.sigma_y},
      {"lambda", c.lambda},
      {"p", c.p},
      {"n_true", c.n_true},
      {"count", c.count},
      {"init_r", c.init_r},
      {"init_p", c.init_p},
      {"data_path", c.data_path},
      {"save_data_path", c.save_data_path},
      {"suites", c.suites},
      {"cases", c.cases},
      {"draws", c.draws},
      {"sweep_out", c.sweep_out},
      {"sweep_eta", c.sweep_eta},
      {"k_list", c.k_list},
  };
}

// Missing keys keep their current value so a partial file overlays defaults.
void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment").get<std::string>());
  if (j.contains("estimator")) c.estimator = parse_estimator(j.at("estimator").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  get("rb_k", c.rb_k);
  get("minibatch_n", c.minibatch_n);
  get("budgeted", c.budgeted);
  get("auto_k", c.auto_k);
  get("lr", c.lr);
  get("iters", c.iters);
  get("trials", c.trials);
  get("seed", c.seed);
  get("data_seed", c.data_seed);
  get("jobs", c.jobs);
  get("out", c.out);
  get("wall_time", c.wall_time);
  get("eta0", c.eta0);
  get("components", c.components);
  get("observations", c.observations);
  get("dim", c.dim);
  get("sigma0", c.sigma0);
  get("sigma_y", c.sigma_y);
  get("lambda", c.lambda);
  get("p", c.p);
  get("n_true", c.n_true);
  get("count", c.count);
  get("init_r", c.init_r);
  get("init_p", c.init_p);
  get("data_path", c.data_path);
  get("save_data_path", c.save_data_path);
  get("suites", c.suites);
  get("cases", c.cases);
  get("draws", c.draws);
  get("sweep_out", c.sweep_out);
  get("sweep_eta", c.sweep_eta);
  get("k_list", c.k_list);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::optional<std::uint64_t> support_of(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::Bernoulli:
      return 8;
    case Experiment::Gmm:
      return c.components > 0 ? std::optional<std::uint64_t>(c.components) : std::nullopt;
    default:
      return std::nullopt;
  }
}

}  // namespace

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };

  if (c.experiment == Experiment::Diagnose) {
    const auto names = suite_names();
    for (const auto& s : c.suites) {
      require(std::find(names.begin(), names.end(), s) != names.end(),
              "suite: unknown suite '" + s + "'");
    }
    require(c.cases >= 1, "cases: must be >= 1");
    require(c.draws >= 2, "M: must be >= 2");
    require(c.jobs >= 1, "jobs: must be >= 1");
    for (auto k : c.k_list) require(k >= 0 && k <= 8, "k_list: entries must lie in [0, 8]");
    return errors;
  }

  require(c.rb_k >= 0, "rb_k: must be >= 0 (got " + std::to_string(c.rb_k) + ")");
  require(c.minibatch_n >= 1, "minibatch_n: must be >= 1 (got " + std::to_string(c.minibatch_n) + ")");
  require(c.lr > 0.0 && std::isfinite(c.lr), "lr: must be a positive finite number");
  require(c.iters >= 1, "iters: must be >= 1");
  require(c.trials >= 1, "trials: must be >= 1");
  require(c.jobs >= 1, "jobs: must be >= 1");

  const auto support = support_of(c);
  if (c.rb_k > 0 && support) {
    require(static_cast<std::uint64_t>(c.rb_k) <= *support,
            "rb_k: " + std::to_string(c.rb_k) + " exceeds the support size " +
                std::to_string(*support));
  }
  if (c.estimator == EstimatorKind::Exact) {
    require(c.rb_k == 0 && c.minibatch_n == 1 && !c.budgeted && !c.auto_k,
            "estimator: exact takes no rb_k, minibatch_n, budgeted or auto_k");
  }
  if (c.budgeted) {
    if (!c.auto_k) {
      require(c.rb_k <= c.minibatch_n, "rb_k, minibatch_n: budgeted needs rb_k <= minibatch_n");
      // k = n leaves no draw for the tail, which is empty only once k covers the support.
      if (c.rb_k == c.minibatch_n) {
        require(support && static_cast<std::uint64_t>(c.rb_k) >= *support,
                "rb_k, minibatch_n: k = N with a positive tail mass");
      }
    }
  } else {
    require(!c.auto_k, "auto_k: requires budgeted");
    require(!(c.rb_k > 0 && c.minibatch_n > 1),
            "rb_k, minibatch_n: both set without budgeted");
  }

  if (c.experiment == Experiment::Bernoulli) {
    require(std::isfinite(c.eta0), "eta0: must be finite");
  }
  if (c.experiment == Experiment::Gmm) {
    require(c.components >= 1, "K: must be >= 1");
    require(c.observations >= 1, "N: must be >= 1");
    require(c.dim >= 1, "d: must be >= 1");
    require(c.sigma0 > 0.0, "sigma0: must be > 0");
    require(c.sigma_y > 0.0, "sigma_y: must be > 0");
  }
  if (c.experiment == Experiment::NMixture) {
    require(c.lambda > 0.0, "lambda: must be > 0");
    require(c.p > 0.0 && c.p <= 1.0, "p: must lie in (0, 1]");
    require(c.n_true >= 0, "n_true: must be >= 0");
    require(c.count >= 1, "count: must be >= 1");
    require(c.init_r > 0.0, "init_r: must be > 0");
    require(c.init_p > 0.0 && c.init_p < 1.0, "init_p: must lie in (0, 1)");
  }
  return errors;
}

EstimatorConfig estimator_config(const ExperimentConfig& c) {
  EstimatorConfig e;
  e.kind = c.estimator;
  e.rb_k = static_cast<std::size_t>(std::max<std::int64_t>(0, c.rb_k));
  e.minibatch_n = static_cast<std::size_t>(std::max<std::int64_t>(1, c.minibatch_n));
  e.budgeted = c.budgeted;
  e.auto_k = c.auto_k;
  return e;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

std::string find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.starts_with("--config=")) return std::string(a.substr(9));
  }
  return {};
}

ExperimentConfig load_config_file(const std::string& path, Experiment experiment) {
  std::ifstream is(path);
  if (!is) throw UsageError("--config: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
  if (j.is_object() && j.contains("config")) j = j.at("config");
  ExperimentConfig c = default_config(experiment);
  if (j.is_object() && j.contains("experiment") &&
      parse_experiment(j.at("experiment").get<std::string>()) != experiment) {
    throw UsageError("--config: file is for experiment '" + j.at("experiment").get<std::string>() +
                     "'");
  }
  try {
    from_json(j, c);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
  return c;
}

void add_common(CLI::App& app, ExperimentConfig& c, std::string& estimator, std::string& optimizer,
                std::string& config_path, bool& no_wall_time) {
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--seed", c.seed, "master seed");
  app.add_option("--jobs", c.jobs, "parallel trials / worker threads");
  if (c.experiment == Experiment::Diagnose) return;
  app.add_option("--estimator", estimator, "exact | reinforce | reinforce-plus")
      ->check(CLI::IsMember({"exact", "reinforce", "reinforce-plus"}));
  app.add_option("--rb-k", c.rb_k, "atoms summed exactly (0 disables)");
  app.add_option("--minibatch-n", c.minibatch_n, "base draws per step");
  app.add_flag("--budgeted", c.budgeted, "split minibatch-n into rb-k summed atoms and tail draws");
  app.add_flag("--auto-k", c.auto_k, "pick k minimizing tail/(N-k) each step (with --budgeted)");
  app.add_option("--optimizer", optimizer, "adam | sgd")->check(CLI::IsMember({"adam", "sgd"}));
  app.add_option("--lr", c.lr, "step size");
  app.add_option("--iters", c.iters, "steps per trial");
  app.add_option("--trials", c.trials, "independent trials");
  app.add_option("--out", c.out, "trace CSV path; the JSON sidecar goes to <out>.json");
  app.add_flag("--no-wall-time", no_wall_time, "write wall_ms as 0 for byte-identical traces");
}

}  // namespace

std::optional<ExperimentConfig> parse_config(int argc, const char* const* argv,
                                             std::ostream& help_out) {
  if (argc < 2) throw UsageError("missing subcommand: bernoulli | gmm | nmixture | diagnose");
  const std::string sub = argv[1];
  if (sub == "--help" || sub == "-h") {
    help_out << "usage: rbgrad {bernoulli|gmm|nmixture|diagnose} [options]\n"
                "       rbgrad <subcommand> --help\n";
    return std::nullopt;
  }
  const Experiment experiment = parse_experiment(sub);

  const std::string file = find_config_path(argc, argv);
  ExperimentConfig c = file.empty() ? default_config(experiment) : load_config_file(file, experiment);
  c.experiment = experiment;

  CLI::App app("rbgrad " + sub, "rbgrad " + sub);
  std::string estimator = estimator_name(c.estimator);
  std::string optimizer = optimizer_name(c.optimizer);
  std::string config_path;
  bool no_wall_time = false;
  add_common(app, c, estimator, optimizer, config_path, no_wall_time);

  switch (experiment) {
    case Experiment::Bernoulli:
      app.add_option("--eta0", c.eta0, "initial logit");
      break;
    case Experiment::Gmm:
      app.add_option("--K,--components", c.components, "mixture components");
      app.add_option("--N,--observations", c.observations, "observations");
      app.add_option("--d,--dim", c.dim, "observation dimension");
      app.add_option("--sigma0", c.sigma0, "prior std of the centroids");
      app.add_option("--sigma-y", c.sigma_y, "observation noise std");
      break;
    case Experiment::NMixture:
      app.add_option("--lambda", c.lambda, "Poisson prior rate");
      app.add_option("--p", c.p, "detection probability");
      app.add_option("--n-true", c.n_true, "true abundance for simulation");
      app.add_option("--count", c.count, "number of counts");
      app.add_option("--init-r", c.init_r, "initial negative-binomial r");
      app.add_option("--init-p", c.init_p, "initial negative-binomial p");
      break;
    case Experiment::Diagnose:
      app.add_option("--suite", c.suites, "suite name, repeatable (default: all)");
      app.add_option("--cases", c.cases, "random instances per suite");
      app.add_option("--M", c.draws, "Monte-Carlo draws for empirical suites");
      app.add_option("--sweep-out", c.sweep_out, "write the Bernoulli variance-vs-k table here");
      app.add_option("--eta", c.sweep_eta, "logit for the sweep");
      app.add_option("--k-list", c.k_list, "k values for the sweep")->delimiter(',');
      break;
  }
  if (experiment == Experiment::Gmm || experiment == Experiment::NMixture) {
    app.add_option("--data", c.data_path, "read the dataset from CSV instead of simulating");
    app.add_option("--save-data", c.save_data_path, "write the dataset to CSV");
    app.add_option("--data-seed", c.data_seed, "seed for simulation and initialization");
  }

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 2; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    help_out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  c.estimator = parse_estimator(estimator);
  c.optimizer = parse_optimizer(optimizer);
  if (no_wall_time) c.wall_time = false;

  const auto errors = validate(c);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw UsageError(msg);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Running

std::string resolve_out_path(const ExperimentConfig& c) {
  if (!c.out.empty()) return c.out;
  const char* dir = std::getenv(kOutDirEnv);
  const std::filesystem::path base = dir && *dir ? dir : ".";
  return (base / (to_string(c.experiment) + ".csv")).string();
}

std::unique_ptr<Model> build_model(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::Bernoulli:
      return std::make_unique<BernoulliToyModel>(c.eta0);
    case Experiment::Gmm: {
      GmmConfig g;
      g.components = static_cast<std::size_t>(c.components);
      g.observations = static_cast<std::size_t>(c.observations);
      g.dim = static_cast<std::size_t>(c.dim);
      g.sigma0 = c.sigma0;
      g.sigma_y = c.sigma_y;
      GmmDataset data;
      if (!c.data_path.empty()) {
        data = read_gmm_csv(c.data_path);
        g.observations = static_cast<std::size_t>(data.y.rows());
        g.dim = static_cast<std::size_t>(data.y.cols());
      } else {
        Rng rng(derive_seed(c.data_seed, 0));
        data = gmm_simulate(g, rng);
      }
      if (!c.save_data_path.empty()) write_gmm_csv(c.save_data_path, data, c.data_seed);
      Rng init_rng(derive_seed(c.data_seed, 1));
      GmmVariationalParams init = kmeans_init(data.y, g.components, init_rng);
      return std::make_unique<GmmModel>(g, data.y, std::move(init));
    }
    case Experiment::NMixture: {
      NMixtureConfig n;
      n.p = c.p;
      n.lambda = c.lambda;
      n.n_true = static_cast<std::uint64_t>(c.n_true);
      n.count = static_cast<std::size_t>(c.count);
      n.init_r = c.init_r;
      n.init_p = c.init_p;
      std::vector<std::uint64_t> data;
      if (!c.data_path.empty()) {
        data = read_nmixture_csv(c.data_path);
      } else {
        Rng rng(derive_seed(c.data_seed, 0));
        data = nmixture_simulate(n.n_true, n.p, n.count, rng);
      }
      if (!c.save_data_path.empty()) write_nmixture_csv(c.save_data_path, data, c.data_seed);
      return std::make_unique<NMixtureModel>(n, std::move(data));
    }
    case Experiment::Diagnose:
      break;
  }
  throw ContractError("build_model: diagnose has no model");
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& records) {
  os << "trial,iter,loss,grad_norm,base_evals,wall_ms\n";
  for (const auto& r : records) {
    os << r.trial << ',' << r.iter << ',' << format_double(r.loss) << ','
       << format_double(r.grad_norm) << ',' << r.base_evals << ',' << format_double(r.wall_ms)
       << '\n';
  }
}

TraceSummary summarize(const OptimizationResult& result, std::size_t iters) {
  std::vector<double> finals;
  for (const auto& r : result.records) {
    if (r.iter == iters && std::isfinite(r.loss)) finals.push_back(r.loss);
  }
  TraceSummary s;
  s.completed_trials = finals.size();
  if (finals.empty()) {
    s.final_mean_loss = std::nan("");
    s.final_loss_se = std::nan("");
    return s;
  }
  double mean = 0.0;
  for (double x : finals) mean += x;
  mean /= static_cast<double>(finals.size());
  s.final_mean_loss = mean;
  if (finals.size() < 2) {
    s.final_loss_se = std::nan("");
    return s;
  }
  double ss = 0.0;
  for (double x : finals) ss += (x - mean) * (x - mean);
  s.final_loss_se = std::sqrt(ss / static_cast<double>(finals.size() - 1) /
                              static_cast<double>(finals.size()));
  return s;
}

namespace {

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

int run_diagnose(const ExperimentConfig& c, std::ostream& out, std::ostream& log) {
  SuiteOptions opt;
  opt.cases = static_cast<std::size_t>(c.cases);
  opt.seed = c.seed;
  opt.draws = static_cast<std::size_t>(c.draws);
  const auto names = c.suites.empty() ? suite_names() : c.suites;

  bool all = true;
  out << std::left << std::setw(18) << "suite" << std::setw(6) << "result" << "  detail\n";
  for (const auto& name : names) {
    const SuiteResult r = run_suite(name, opt);
    all = all && r.passed;
    out << std::setw(18) << r.name << std::setw(6) << (r.passed ? "PASS" : "FAIL") << "  "
        << r.detail << '\n';
  }

  if (!c.sweep_out.empty()) {
    const BernoulliProblem p = bernoulli_integrand(c.sweep_eta);
    std::vector<std::size_t> ks;
    for (auto k : c.k_list) ks.push_back(static_cast<std::size_t>(k));
    const auto rows = variance_vs_k_sweep(p.dist, p.integrand, BaseEstimator::ReinforcePlus, ks,
                                          opt.draws, c.seed);
    ensure_parent(c.sweep_out);
    std::ofstream os(c.sweep_out);
    if (!os) {
      log << "error: cannot write " << c.sweep_out << '\n';
      return kExitFailure;
    }
    write_sweep_csv(os, rows);
  }
  return all ? kExitOk : kExitFailure;
}

}  // namespace

int run(const ExperimentConfig& c, std::ostream& out, std::ostream& log) {
  omp_set_num_threads(static_cast<int>(c.jobs));
  if (c.experiment == Experiment::Diagnose) return run_diagnose(c, out, log);

  std::unique_ptr<Model> model;
  try {
    model = build_model(c);
  } catch (const NumericError&) {
    throw;
  } catch (const std::runtime_error& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  RunOptions options;
  options.jobs = static_cast<int>(c.jobs);
  options.record_wall_time = c.wall_time;
  OptimizerConfig opt;
  opt.kind = c.optimizer;
  opt.lr = c.lr;
  const auto iters = static_cast<std::size_t>(c.iters);
  const OptimizationResult result =
      run_optimization(*model, estimator_config(c), opt, iters, static_cast<std::size_t>(c.trials),
                       c.seed, options);

  const std::filesystem::path path = resolve_out_path(c);
  try {
    ensure_parent(path);
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  {
    std::ofstream os(path);
    if (!os) {
      log << "error: cannot write " << path.string() << '\n';
      return kExitFailure;
    }
    write_trace_csv(os, result.records);
    if (!os) {
      log << "error: write failed for " << path.string() << '\n';
      return kExitFailure;
    }
  }

  const TraceSummary s = summarize(result, iters);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"trial", f.trial}, {"iter", f.iter}, {"message", f.message}});
  }
  const nlohmann::json sidecar{
      {"config", c},
      {"seed", c.seed},
      {"summary",
       {{"trials", c.trials},
        {"completed_trials", s.completed_trials},
        {"final_mean_loss", number_or_null(s.final_mean_loss)},
        {"final_loss_se", number_or_null(s.final_loss_se)}}},
      {"failures", failures},
  };
  const std::string sidecar_path = path.string() + ".json";
  {
    std::ofstream os(sidecar_path);
    if (!os) {
      log << "error: cannot write " << sidecar_path << '\n';
      return kExitFailure;
    }
    os << sidecar.dump(2) << '\n';
  }

  if (!result.failures.empty()) {
    for (const auto& f : result.failures) {
      log << "trial " << f.trial << " aborted at iter " << f.iter << ": " << f.message << '\n';
    }
    return kExitNumeric;
  }
  log << model->name() << ": final mean loss " << format_double(s.final_mean_loss);
  if (std::isfinite(s.final_loss_se)) log << " +/- " << format_double(s.final_loss_se);
  log << " over " << s.completed_trials << " trials -> " << path.string() << '\n';
  return kExitOk;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
  std::optional<ExperimentConfig> config;
  try {
    config = parse_config(argc, argv, out);
  } catch (const UsageError& e) {
    log << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!config) return kExitOk;
  try {
    return run(*config, out, log);
  } catch (const NumericError& e) {
    log << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace rbgrad
