#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "rbgrad/distributions.hpp"
#include "rbgrad/estimators.hpp"
#include "rbgrad/model.hpp"

namespace rbgrad {

/// N ∼ Poisson(λ), y_i | N ∼ Binomial(N, p) iid; p and λ known.
struct NMixtureConfig {
  double p = 0.2;
  double lambda = 10.0;
  std::uint64_t n_true = 10;
  std::size_t count = 1000;
  double init_r = 5.0;
  double init_p = 0.5;
};

/// `count` iid Binomial(n_true, p) draws.
std::vector<std::uint64_t> nmixture_simulate(std::uint64_t n_true, double p, std::size_t count,
                                             Rng& rng);

/// CSV: "# seed=<seed>", header "y", one count per row.
void write_nmixture_csv(const std::filesystem::path& path, const std::vector<std::uint64_t>& data,
                        std::uint64_t seed);
std::vector<std::uint64_t> read_nmixture_csv(const std::filesystem::path& path,
                                             std::uint64_t* seed = nullptr);

/// log Binomial(y; n, p) for y ≤ n.
double log_binomial_pmf(std::uint64_t y, std::uint64_t n, double p);
double log_poisson_pmf(std::uint64_t n, double lambda);

/// Sufficient statistics of the counts for Σ_i log Binomial(y_i; N, p).
class CountSummary {
 public:
  explicit CountSummary(const std::vector<std::uint64_t>& data);

  /// Σ_i log Binomial(y_i; N, p); −∞ when N < max y.
  double log_likelihood(std::uint64_t n, double p) const;
  std::uint64_t max() const { return max_; }
  std::size_t size() const { return size_; }

 private:
  std::vector<std::size_t> histogram_;  // histogram_[y] = #{i : y_i = y}
  std::uint64_t max_ = 0;
  std::size_t size_ = 0;
  double sum_ = 0.0;
  double sum_log_fact_ = 0.0;
};

/// f(N) = Σ_i log Binomial(y_i; N, p) + log Poisson(N; λ) − log q(N), over
/// the parameter vector (log r̂, logit p̂). ∇f = −∇ log q(N).
class NMixtureIntegrand final : public IntegrandOracle {
 public:
  NMixtureIntegrand(const CountSummary& counts, const ShiftedNegativeBinomial& q, double p,
                    double lambda)
      : counts_(counts), q_(q), p_(p), lambda_(lambda) {}

  Evaluation eval(Atom z) const override;
  double value(Atom z) const override;
  std::size_t param_dim() const override { return q_.param_dim(); }

 private:
  const CountSummary& counts_;
  const ShiftedNegativeBinomial& q_;
  double p_;
  double lambda_;
};

/// Owns the distribution so the integrand's references stay valid.
struct NMixtureProblem {
  NMixtureProblem(const CountSummary& counts, double log_r, double logit_p, double p,
                  double lambda)
      : dist(log_r, logit_p, counts.max()), integrand(counts, dist, p, lambda) {}
  NMixtureProblem(const NMixtureProblem&) = delete;
  NMixtureProblem& operator=(const NMixtureProblem&) = delete;

  ShiftedNegativeBinomial dist;
  NMixtureIntegrand integrand;
};

/// Variational fit of N with q = NegBin(r̂, p̂) shifted by max y. Parameters
/// (log r̂, logit p̂); loss = −ELBO enumerated to mass 1 − 1e−12.
class NMixtureModel final : public Model {
 public:
  NMixtureModel(NMixtureConfig config, std::vector<std::uint64_t> data);

  std::string name() const override { return "nmixture"; }
  ParamVector initial_params() const override;
  double loss(const ParamVector& params) const override { return -elbo(params); }
  GradEstimate loss_gradient(const ParamVector& params, const EstimatorConfig& config,
                             Rng& rng) const override;
  std::optional<std::uint64_t> latent_support_size() const override { return std::nullopt; }

  double elbo(const ParamVector& params) const;
  /// The returned problem refers to this model's count summary.
  std::unique_ptr<NMixtureProblem> problem(const ParamVector& params) const;

  const NMixtureConfig& config() const { return config_; }
  const CountSummary& counts() const { return counts_; }

 private:
  NMixtureConfig config_;
  CountSummary counts_;
};

}  // namespace rbgrad
