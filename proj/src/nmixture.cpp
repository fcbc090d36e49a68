#include "rbgrad/nmixture.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "rbgrad/io.hpp"
#include "rbgrad/special_functions.hpp"

namespace rbgrad {

std::vector<std::uint64_t> nmixture_simulate(std::uint64_t n_true, double p, std::size_t count,
                                             Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("nmixture_simulate: p must lie in [0, 1]");
  std::binomial_distribution<std::uint64_t> binom(n_true, p);
  std::vector<std::uint64_t> out(count);
  for (auto& y : out) y = binom(rng);
  return out;
}

void write_nmixture_csv(const std::filesystem::path& path, const std::vector<std::uint64_t>& data,
                        std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "# seed=" << seed << "\ny\n";
  for (auto y : data) os << y << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::uint64_t> read_nmixture_csv(const std::filesystem::path& path,
                                             std::uint64_t* seed) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  const std::uint64_t s = parse_seed_header(line);
  if (seed) *seed = s;
  std::getline(is, line);
  if (line != "y") throw std::runtime_error(path.string() + ": expected header 'y'");
  std::vector<std::uint64_t> out;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(parse_uint(line));
  }
  return out;
}

double log_binomial_pmf(std::uint64_t y, std::uint64_t n, double p) {
  if (y > n) return -HUGE_VAL;
  const double yd = static_cast<double>(y), nd = static_cast<double>(n);
  double out = log_choose(nd, yd);
  if (y > 0) out += yd * std::log(p);
  if (n > y) out += (nd - yd) * std::log1p(-p);
  return out;
}

double log_poisson_pmf(std::uint64_t n, double lambda) {
  const double nd = static_cast<double>(n);
  return nd * std::log(lambda) - lambda - log_gamma(nd + 1.0);
}

CountSummary::CountSummary(const std::vector<std::uint64_t>& data) : size_(data.size()) {
  if (data.empty()) throw DomainError("CountSummary: need at least one count");
  for (auto y : data) max_ = std::max(max_, y);
  histogram_.assign(max_ + 1, 0);
  for (auto y : data) {
    ++histogram_[y];
    sum_ += static_cast<double>(y);
    sum_log_fact_ += log_gamma(static_cast<double>(y) + 1.0);
  }
}

double CountSummary::log_likelihood(std::uint64_t n, double p) const {
  if (n < max_) return -HUGE_VAL;
  const double nd = static_cast<double>(n);
  const double count = static_cast<double>(size_);
  double acc = count * log_gamma(nd + 1.0) - sum_log_fact_;
  for (std::uint64_t y = 0; y <= max_; ++y) {
    if (histogram_[y] > 0) {
      acc -= static_cast<double>(histogram_[y]) * log_gamma(nd - static_cast<double>(y) + 1.0);
    }
  }
  if (sum_ > 0.0) acc += sum_ * std::log(p);
  const double failures = count * nd - sum_;
  if (failures > 0.0) acc += failures * std::log1p(-p);
  return acc;
}

double NMixtureIntegrand::value(Atom z) const {
  if (!q_.in_support(z)) throw DomainError("NMixtureIntegrand: N below the shift");
  return counts_.log_likelihood(z.index, p_) + log_poisson_pmf(z.index, lambda_) - q_.log_pmf(z);
}

Evaluation NMixtureIntegrand::eval(Atom z) const {
  Evaluation e{value(z), ParamVector::Zero(static_cast<Eigen::Index>(param_dim()))};
  q_.accumulate_score(z, -1.0, e.grad);
  return e;
}

NMixtureModel::NMixtureModel(NMixtureConfig config, std::vector<std::uint64_t> data)
    : config_(config), counts_(data) {
  if (!(config_.p > 0.0 && config_.p < 1.0)) throw DomainError("NMixtureModel: need 0 < p < 1");
  if (!(config_.lambda > 0.0)) throw DomainError("NMixtureModel: need lambda > 0");
  if (!(config_.init_r > 0.0) || !(config_.init_p > 0.0 && config_.init_p < 1.0)) {
    throw DomainError("NMixtureModel: bad initial r or p");
  }
}

ParamVector NMixtureModel::initial_params() const {
  ParamVector out(2);
  out << std::log(config_.init_r), std::log(config_.init_p / (1.0 - config_.init_p));
  return out;
}

std::unique_ptr<NMixtureProblem> NMixtureModel::problem(const ParamVector& params) const {
  return std::make_unique<NMixtureProblem>(counts_, params[0], params[1], config_.p,
                                           config_.lambda);
}

double NMixtureModel::elbo(const ParamVector& params) const {
  const auto prob = problem(params);
  return exact_expectation(prob->dist, prob->integrand);
}

GradEstimate NMixtureModel::loss_gradient(const ParamVector& params,
                                          const EstimatorConfig& config, Rng& rng) const {
  const auto prob = problem(params);
  GradEstimate g = estimate_with(config, prob->dist, prob->integrand, rng);
  g.grad = -g.grad;
  return g;
}

}  // namespace rbgrad
