#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rbgrad/distributions.hpp"
#include "rbgrad/estimators.hpp"
#include "rbgrad/model.hpp"

namespace rbgrad {

/// Generative model: μ_k ∼ N(0, σ0² I), z_n ∼ Categorical(π), y_n ∼ N(μ_{z_n}, σy² I).
struct GmmConfig {
  std::size_t components = 10;     // K
  std::size_t observations = 200;  // N
  std::size_t dim = 2;             // d
  double sigma0 = 5.0;
  double sigma_y = 0.5;
  std::vector<double> weights;  // π; empty means uniform 1/K

  std::vector<double> resolved_weights() const;
};

struct GmmDataset {
  Eigen::MatrixXd y;           // N × d
  std::vector<std::size_t> z;  // generating component per row
  Eigen::MatrixXd mu;          // K × d generating centroids (empty when loaded from disk)
};

GmmDataset gmm_simulate(const GmmConfig& config, Rng& rng);

/// CSV: "# seed=<seed>", header "y0,...,y{d-1},z", one row per observation.
void write_gmm_csv(const std::filesystem::path& path, const GmmDataset& data, std::uint64_t seed);
GmmDataset read_gmm_csv(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

// --- K-means ---------------------------------------------------------------

/// Index of the nearest centroid (lowest index on ties).
std::size_t nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& point);

/// Σ_n ‖y_n − c_{a(n)}‖² with a(n) the nearest centroid.
double kmeans_distortion(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids);

/// One Lloyd step: assign every row to its nearest centroid and move each
/// centroid to the mean of its rows. An empty cluster is re-seeded at the
/// row farthest from its assigned centroid.
Eigen::MatrixXd lloyd_iteration(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids);

/// K-means++ seeding: first centroid uniform, then ∝ squared distance.
Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& data, std::size_t k, Rng& rng);

struct KMeansResult {
  Eigen::MatrixXd centroids;
  std::vector<double> distortion;  // after seeding, then after each Lloyd step
};

KMeansResult kmeans(const Eigen::MatrixXd& data, std::size_t k, Rng& rng,
                    std::size_t max_iters = 20);

struct GmmVariationalParams {
  Eigen::MatrixXd mu_hat;  // K × d
  Eigen::MatrixXd logits;  // N × K, softmax per row gives π̂_n
};

/// μ̂ from K-means; π̂_n puts 0.99 on the nearest centroid and spreads 0.01
/// over the rest, stored as log-probabilities.
GmmVariationalParams kmeans_init(const Eigen::MatrixXd& data, std::size_t k, Rng& rng);

// --- Per-datum integrand ---------------------------------------------------

/// f(z_n) = log N(y_n; μ̂_{z_n}, σy² I) + log π_{z_n} − log π̂_{n,z_n}
/// over the local vector [μ̂ row-major (K·d) | logits of π̂_n (K)].
class GmmDatumIntegrand final : public IntegrandOracle {
 public:
  GmmDatumIntegrand(std::span<const double> y_n, std::span<const double> mu_hat,
                    std::span<const double> logits_n, std::span<const double> log_weights,
                    double sigma_y);

  Evaluation eval(Atom z) const override;
  double value(Atom z) const override;
  std::size_t param_dim() const override { return k_ * d_ + k_; }

 private:
  std::span<const double> y_;
  std::span<const double> mu_hat_;
  std::span<const double> log_weights_;
  std::vector<double> log_q_;
  std::vector<double> q_;
  std::size_t k_;
  std::size_t d_;
  double sigma_y_;
  double log_norm_;
};

struct GmmDatumProblem {
  SoftmaxCategorical dist;
  GmmDatumIntegrand integrand;
};

/// Mean-field variational inference for the mixture. Global parameter layout:
/// [μ̂ row-major (K·d) | logits row-major (N·K)]. The loss is −ELBO.
class GmmModel final : public Model {
 public:
  GmmModel(GmmConfig config, Eigen::MatrixXd data, GmmVariationalParams init,
           Execution execution = Execution::Parallel);

  std::string name() const override { return "gmm"; }
  ParamVector initial_params() const override { return pack(init_); }
  double loss(const ParamVector& params) const override { return -elbo(params); }
  GradEstimate loss_gradient(const ParamVector& params, const EstimatorConfig& config,
                             Rng& rng) const override {
    return loss_gradient(params, config, rng, execution_);
  }
  GradEstimate loss_gradient(const ParamVector& params, const EstimatorConfig& config, Rng& rng,
                             Execution execution) const;
  std::optional<std::uint64_t> latent_support_size() const override {
    return config_.components;
  }

  /// Σ_n E_{q(z_n)}[f(z_n)] by exact K-term sums, plus Σ_k log N(μ̂_k; 0, σ0² I).
  double elbo(const ParamVector& params) const;

  GmmDatumProblem datum_problem(const ParamVector& params, std::size_t n) const;

  ParamVector pack(const GmmVariationalParams& vp) const;
  GmmVariationalParams unpack(const ParamVector& params) const;

  const GmmConfig& config() const { return config_; }
  const Eigen::MatrixXd& data() const { return data_; }
  std::size_t param_dim() const;

 private:
  double log_prior(const ParamVector& params) const;

  GmmConfig config_;
  Eigen::MatrixXd data_;
  // Row-major copy so each observation is a contiguous span.
  std::vector<double> data_rows_;
  std::vector<double> log_weights_;
  GmmVariationalParams init_;
  Execution execution_;
};

}  // namespace rbgrad
