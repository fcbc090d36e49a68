#include "rbgrad/gmm.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "rbgrad/io.hpp"

namespace rbgrad {

namespace {

double log_normal_iso(std::span<const double> x, std::span<const double> mean, double sigma) {
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - mean[j]) * (x[j] - mean[j]);
  const double d = static_cast<double>(x.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma) - sq / (2.0 * sigma * sigma);
}

std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = uniform01(rng) * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i;
  }
  return weights.size() - 1;
}

}  // namespace

std::vector<double> GmmConfig::resolved_weights() const {
  if (weights.empty()) return std::vector<double>(components, 1.0 / static_cast<double>(components));
  if (weights.size() != components) throw DomainError("GmmConfig: weights must have K entries");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw DomainError("GmmConfig: weights must be positive");
    total += w;
  }
  std::vector<double> out = weights;
  for (double& w : out) w /= total;
  return out;
}

GmmDataset gmm_simulate(const GmmConfig& config, Rng& rng) {
  if (!(config.sigma0 > 0.0) || !(config.sigma_y > 0.0)) {
    throw DomainError("gmm_simulate: sigma0 and sigma_y must be > 0");
  }
  const auto K = static_cast<Eigen::Index>(config.components);
  const auto N = static_cast<Eigen::Index>(config.observations);
  const auto d = static_cast<Eigen::Index>(config.dim);
  const std::vector<double> pi = config.resolved_weights();
  std::normal_distribution<double> normal(0.0, 1.0);

  GmmDataset out;
  out.mu.resize(K, d);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < d; ++j) out.mu(k, j) = config.sigma0 * normal(rng);
  out.y.resize(N, d);
  out.z.resize(static_cast<std::size_t>(N));
  for (Eigen::Index n = 0; n < N; ++n) {
    const std::size_t z = draw_categorical(pi, rng);
    out.z[static_cast<std::size_t>(n)] = z;
    for (Eigen::Index j = 0; j < d; ++j) {
      out.y(n, j) = out.mu(static_cast<Eigen::Index>(z), j) + config.sigma_y * normal(rng);
    }
  }
  return out;
}

void write_gmm_csv(const std::filesystem::path& path, const GmmDataset& data, std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "# seed=" << seed << '\n';
  for (Eigen::Index j = 0; j < data.y.cols(); ++j) os << 'y' << j << ',';
  os << "z\n";
  for (Eigen::Index n = 0; n < data.y.rows(); ++n) {
    for (Eigen::Index j = 0; j < data.y.cols(); ++j) os << format_double(data.y(n, j)) << ',';
    os << (static_cast<std::size_t>(n) < data.z.size() ? data.z[static_cast<std::size_t>(n)] : 0)
       << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

GmmDataset read_gmm_csv(const std::filesystem::path& path, std::uint64_t* seed) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  const std::uint64_t s = parse_seed_header(line);
  if (seed) *seed = s;
  std::getline(is, line);
  const auto d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (d == 0) throw std::runtime_error(path.string() + ": header has no coordinate columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
    if (static_cast<Eigen::Index>(row.size()) != d + 1) {
      throw std::runtime_error(path.string() + ": ragged row");
    }
    labels.push_back(static_cast<std::size_t>(row.back()));
    row.pop_back();
    rows.push_back(std::move(row));
  }
  GmmDataset out;
  out.y.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t n = 0; n < rows.size(); ++n)
    for (Eigen::Index j = 0; j < d; ++j) out.y(static_cast<Eigen::Index>(n), j) = rows[n][j];
  out.z = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------
// K-means

std::size_t nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& point) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double dist = (centroids.row(k).transpose() - point).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<std::size_t>(k);
    }
  }
  return best;
}

double kmeans_distortion(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < data.rows(); ++n) {
    const Eigen::VectorXd y = data.row(n).transpose();
    const auto k = static_cast<Eigen::Index>(nearest_centroid(centroids, y));
    total += (centroids.row(k).transpose() - y).squaredNorm();
  }
  return total;
}

Eigen::MatrixXd lloyd_iteration(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids) {
  const Eigen::Index K = centroids.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, data.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
  std::vector<double> residual(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index n = 0; n < data.rows(); ++n) {
    const Eigen::VectorXd y = data.row(n).transpose();
    const auto k = static_cast<Eigen::Index>(nearest_centroid(centroids, y));
    sums.row(k) += data.row(n);
    ++counts[static_cast<std::size_t>(k)];
    residual[static_cast<std::size_t>(n)] = (centroids.row(k).transpose() - y).squaredNorm();
  }
  Eigen::MatrixXd next = centroids;
  for (Eigen::Index k = 0; k < K; ++k) {
    const std::size_t c = counts[static_cast<std::size_t>(k)];
    if (c > 0) {
      next.row(k) = sums.row(k) / static_cast<double>(c);
    } else {
      const auto far = std::max_element(residual.begin(), residual.end()) - residual.begin();
      next.row(k) = data.row(far);
      residual[static_cast<std::size_t>(far)] = 0.0;
    }
  }
  return next;
}

Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& data, std::size_t k, Rng& rng) {
  const Eigen::Index N = data.rows();
  if (k == 0 || static_cast<Eigen::Index>(k) > N) throw DomainError("kmeans: need 1 <= K <= N");
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), data.cols());
  const auto first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(N));
  centroids.row(0) = data.row(std::min(first, N - 1));
  std::vector<double> d2(static_cast<std::size_t>(N), std::numeric_limits<double>::infinity());
  for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
    for (Eigen::Index n = 0; n < N; ++n) {
      d2[static_cast<std::size_t>(n)] =
          std::min(d2[static_cast<std::size_t>(n)], (data.row(n) - centroids.row(c - 1)).squaredNorm());
    }
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index pick = 0;
    if (total > 0.0) {
      pick = static_cast<Eigen::Index>(draw_categorical(d2, rng));
    } else {
      pick = std::min(static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(N)), N - 1);
    }
    centroids.row(c) = data.row(pick);
  }
  return centroids;
}

KMeansResult kmeans(const Eigen::MatrixXd& data, std::size_t k, Rng& rng, std::size_t max_iters) {
  KMeansResult out;
  out.centroids = kmeans_plus_plus(data, k, rng);
  out.distortion.push_back(kmeans_distortion(data, out.centroids));
  for (std::size_t it = 0; it < max_iters; ++it) {
    Eigen::MatrixXd next = lloyd_iteration(data, out.centroids);
    const bool converged = next == out.centroids;
    out.centroids = std::move(next);
    out.distortion.push_back(kmeans_distortion(data, out.centroids));
    if (converged) break;
  }
  return out;
}

GmmVariationalParams kmeans_init(const Eigen::MatrixXd& data, std::size_t k, Rng& rng) {
  GmmVariationalParams vp;
  vp.mu_hat = kmeans(data, k, rng).centroids;
  const Eigen::Index N = data.rows();
  const auto K = static_cast<Eigen::Index>(k);
  const double on = std::log(0.99);
  const double off = K > 1 ? std::log(0.01 / static_cast<double>(K - 1)) : 0.0;
  vp.logits = Eigen::MatrixXd::Constant(N, K, off);
  for (Eigen::Index n = 0; n < N; ++n) {
    const Eigen::VectorXd y = data.row(n).transpose();
    vp.logits(n, static_cast<Eigen::Index>(nearest_centroid(vp.mu_hat, y))) = K > 1 ? on : 0.0;
  }
  return vp;
}

// ---------------------------------------------------------------------------
// Per-datum integrand

GmmDatumIntegrand::GmmDatumIntegrand(std::span<const double> y_n, std::span<const double> mu_hat,
                                     std::span<const double> logits_n,
                                     std::span<const double> log_weights, double sigma_y)
    : y_(y_n),
      mu_hat_(mu_hat),
      log_weights_(log_weights),
      k_(logits_n.size()),
      d_(y_n.size()),
      sigma_y_(sigma_y) {
  if (mu_hat.size() != k_ * d_ || log_weights.size() != k_) {
    throw DomainError("GmmDatumIntegrand: inconsistent K or d");
  }
  const double hi = *std::max_element(logits_n.begin(), logits_n.end());
  double acc = 0.0;
  for (double l : logits_n) acc += std::exp(l - hi);
  const double lse = hi + std::log(acc);
  log_q_.resize(k_);
  q_.resize(k_);
  for (std::size_t k = 0; k < k_; ++k) {
    log_q_[k] = logits_n[k] - lse;
    q_[k] = std::exp(log_q_[k]);
  }
  log_norm_ = -0.5 * static_cast<double>(d_) * std::log(2.0 * std::numbers::pi * sigma_y * sigma_y);
}

double GmmDatumIntegrand::value(Atom z) const {
  if (z.index >= k_) throw DomainError("GmmDatumIntegrand: atom out of range");
  const auto mu = mu_hat_.subspan(z.index * d_, d_);
  double sq = 0.0;
  for (std::size_t j = 0; j < d_; ++j) sq += (y_[j] - mu[j]) * (y_[j] - mu[j]);
  return log_norm_ - sq / (2.0 * sigma_y_ * sigma_y_) + log_weights_[z.index] - log_q_[z.index];
}

Evaluation GmmDatumIntegrand::eval(Atom z) const {
  Evaluation e{value(z), ParamVector::Zero(static_cast<Eigen::Index>(param_dim()))};
  const double inv_var = 1.0 / (sigma_y_ * sigma_y_);
  for (std::size_t j = 0; j < d_; ++j) {
    e.grad[static_cast<Eigen::Index>(z.index * d_ + j)] = (y_[j] - mu_hat_[z.index * d_ + j]) * inv_var;
  }
  // −∇ log π̂_{n,z} = −(e_z − π̂_n) on the logits slice
  const auto off = static_cast<Eigen::Index>(k_ * d_);
  for (std::size_t k = 0; k < k_; ++k) e.grad[off + static_cast<Eigen::Index>(k)] = q_[k];
  e.grad[off + static_cast<Eigen::Index>(z.index)] -= 1.0;
  return e;
}

// ---------------------------------------------------------------------------
// GmmModel

GmmModel::GmmModel(GmmConfig config, Eigen::MatrixXd data, GmmVariationalParams init,
                   Execution execution)
    : config_(std::move(config)), data_(std::move(data)), init_(std::move(init)),
      execution_(execution) {
  config_.observations = static_cast<std::size_t>(data_.rows());
  config_.dim = static_cast<std::size_t>(data_.cols());
  const auto K = static_cast<Eigen::Index>(config_.components);
  if (init_.mu_hat.rows() != K || init_.mu_hat.cols() != data_.cols() ||
      init_.logits.rows() != data_.rows() || init_.logits.cols() != K) {
    throw DomainError("GmmModel: initial parameters have the wrong shape");
  }
  for (double w : config_.resolved_weights()) log_weights_.push_back(std::log(w));
  data_rows_.resize(static_cast<std::size_t>(data_.size()));
  for (Eigen::Index n = 0; n < data_.rows(); ++n)
    for (Eigen::Index j = 0; j < data_.cols(); ++j)
      data_rows_[static_cast<std::size_t>(n * data_.cols() + j)] = data_(n, j);
}

std::size_t GmmModel::param_dim() const {
  return config_.components * config_.dim + config_.observations * config_.components;
}

ParamVector GmmModel::pack(const GmmVariationalParams& vp) const {
  const std::size_t K = config_.components, d = config_.dim, N = config_.observations;
  ParamVector out(static_cast<Eigen::Index>(param_dim()));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j)
      out[static_cast<Eigen::Index>(k * d + j)] = vp.mu_hat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      out[static_cast<Eigen::Index>(K * d + n * K + k)] = vp.logits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  return out;
}

GmmVariationalParams GmmModel::unpack(const ParamVector& params) const {
  const std::size_t K = config_.components, d = config_.dim, N = config_.observations;
  GmmVariationalParams vp{Eigen::MatrixXd(K, d), Eigen::MatrixXd(N, K)};
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j)
      vp.mu_hat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = params[static_cast<Eigen::Index>(k * d + j)];
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k)
      vp.logits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = params[static_cast<Eigen::Index>(K * d + n * K + k)];
  return vp;
}

GmmDatumProblem GmmModel::datum_problem(const ParamVector& params, std::size_t n) const {
  const std::size_t K = config_.components, d = config_.dim;
  if (static_cast<std::size_t>(params.size()) != param_dim()) {
    throw DomainError("GmmModel: parameter vector has the wrong dimension");
  }
  const std::span<const double> all(params.data(), static_cast<std::size_t>(params.size()));
  const auto mu = all.subspan(0, K * d);
  const auto logits = all.subspan(K * d + n * K, K);
  const std::span<const double> y(data_rows_.data() + n * d, d);
  return {SoftmaxCategorical(logits, K * d + K, K * d),
          GmmDatumIntegrand(y, mu, logits, log_weights_, config_.sigma_y)};
}

double GmmModel::log_prior(const ParamVector& params) const {
  const std::size_t K = config_.components, d = config_.dim;
  const std::span<const double> mu(params.data(), K * d);
  const std::vector<double> zero(d, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) acc += log_normal_iso(mu.subspan(k * d, d), zero, config_.sigma0);
  return acc;
}

double GmmModel::elbo(const ParamVector& params) const {
  double acc = log_prior(params);
  for (std::size_t n = 0; n < config_.observations; ++n) {
    const GmmDatumProblem p = datum_problem(params, n);
    acc += exact_expectation(p.dist, p.integrand);
  }
  return acc;
}

namespace {
constexpr std::size_t kRngBlock = 32;
}  // namespace

GradEstimate GmmModel::loss_gradient(const ParamVector& params, const EstimatorConfig& config,
                                     Rng& rng, Execution execution) const {
  const std::size_t K = config_.components, d = config_.dim, N = config_.observations;
  const std::uint64_t key = rng();
  std::vector<GradEstimate> local(N);
  std::exception_ptr error;

  // One stream per fixed block of data: seeding an mt19937_64 per datum costs
  // more than the estimate itself, and blocks keep results thread-count free.
  const std::size_t blocks = (N + kRngBlock - 1) / kRngBlock;
#pragma omp parallel for schedule(static) if (execution == Execution::Parallel)
  for (std::size_t b = 0; b < blocks; ++b) {
    try {
      Rng block_rng(derive_seed(key, b));
      for (std::size_t n = b * kRngBlock; n < std::min(N, (b + 1) * kRngBlock); ++n) {
        const GmmDatumProblem p = datum_problem(params, n);
        local[n] = estimate_with(config, p.dist, p.integrand, block_rng);
      }
    } catch (...) {
#pragma omp critical(rbgrad_gmm_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  // Serial reduction in datum order keeps both paths bit-identical.
  GradEstimate out{ParamVector::Zero(static_cast<Eigen::Index>(param_dim())), 0};
  const auto mu_len = static_cast<Eigen::Index>(K * d);
  for (std::size_t n = 0; n < N; ++n) {
    out.grad.head(mu_len) -= local[n].grad.head(mu_len);
    out.grad.segment(mu_len + static_cast<Eigen::Index>(n * K), static_cast<Eigen::Index>(K)) =
        -local[n].grad.tail(static_cast<Eigen::Index>(K));
    out.base_evals += local[n].base_evals;
  }
  out.grad.head(mu_len) += params.head(mu_len) / (config_.sigma0 * config_.sigma0);
  return out;
}

}  // namespace rbgrad
