#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rbgrad/bernoulli_toy.hpp"
#include "rbgrad/gmm.hpp"
#include "rbgrad/nmixture.hpp"

using namespace rbgrad;

namespace {

double log_normal_2d(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double s) {
  return -static_cast<double>(y.size()) * std::log(2 * std::numbers::pi * s * s) / 2 -
         (y - mu).squaredNorm() / (2 * s * s);
}

GmmModel small_gmm(std::uint64_t seed, std::size_t k = 3, std::size_t n = 12) {
  GmmConfig cfg;
  cfg.components = k;
  cfg.observations = n;
  Rng rng(seed);
  GmmDataset data = gmm_simulate(cfg, rng);
  GmmVariationalParams init = kmeans_init(data.y, k, rng);
  return GmmModel(cfg, data.y, init);
}

}  // namespace

// --- Bernoulli --------------------------------------------------------------

TEST(BernoulliToy, IntegrandValues) {
  const BernoulliProblem p = bernoulli_integrand(0.3);
  EXPECT_NEAR(p.integrand.value(Atom{0}), 0.8505, 1e-12);
  EXPECT_NEAR(p.integrand.value(Atom{7}), 0.6705, 1e-12);
  EXPECT_EQ(p.integrand.eval(Atom{5}).grad.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(BernoulliToy, ExactLoss) {
  EXPECT_NEAR(bernoulli_exact_loss(0.0), 0.7605, 1e-12);
  EXPECT_NEAR(bernoulli_exact_loss(-4.0), 0.8505 - 0.18 / (1 + std::exp(4.0)), 1e-12);
  EXPECT_NEAR(bernoulli_exact_loss(-4.0), 0.84726, 1e-5);
  EXPECT_NEAR(bernoulli_exact_loss(40.0), 0.6705, 1e-12);
}

TEST(BernoulliToy, LossIsExpectationOfIntegrand) {
  for (double eta : {-3.0, 0.0, 1.5}) {
    const BernoulliProblem p = bernoulli_integrand(eta);
    double e = 0.0;
    for (std::uint64_t z = 0; z < 8; ++z) e += p.dist.pmf(Atom{z}) * p.integrand.value(Atom{z});
    EXPECT_NEAR(e, bernoulli_exact_loss(eta), 1e-12);
  }
}

TEST(BernoulliToy, ModelGradientMatchesFiniteDifferences) {
  BernoulliToyModel m;
  for (double eta : {-4.0, -1.0, 0.0, 0.7, 2.5}) {
    ParamVector x(1);
    x[0] = eta;
    Rng rng(1);
    const ParamVector g = m.loss_gradient(x, {EstimatorKind::Exact}, rng).grad;
    const auto fd = oracle::central_difference([&](const oracle::Vec& v) { return m.loss(v); }, x);
    EXPECT_LT(oracle::rel_err(g, fd), 1e-5);
  }
}

// --- GMM --------------------------------------------------------------------

TEST(Gmm, SimulateShapes) {
  GmmConfig cfg;
  Rng rng(4);
  const GmmDataset d = gmm_simulate(cfg, rng);
  EXPECT_EQ(d.y.rows(), 200);
  EXPECT_EQ(d.y.cols(), 2);
  EXPECT_EQ(d.mu.rows(), 10);
  EXPECT_EQ(d.z.size(), 200u);
}

TEST(Gmm, TinyNoiseSitsOnCentroids) {
  GmmConfig cfg;
  cfg.sigma_y = 1e-12;
  Rng rng(5);
  const GmmDataset d = gmm_simulate(cfg, rng);
  for (Eigen::Index n = 0; n < d.y.rows(); ++n) {
    EXPECT_LT((d.y.row(n) - d.mu.row(static_cast<Eigen::Index>(d.z[static_cast<std::size_t>(n)]))).norm(), 1e-9);
  }
}

TEST(Gmm, SampleMeanMatchesMixtureMean) {
  GmmConfig cfg;
  cfg.observations = 200'000;
  Rng rng(6);
  const GmmDataset d = gmm_simulate(cfg, rng);
  const Eigen::VectorXd want = d.mu.colwise().mean();  // uniform weights
  const Eigen::VectorXd got = d.y.colwise().mean();
  // per-coordinate variance: between-centroid spread plus σy²
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double between = (d.mu.col(j).array() - want[j]).square().mean();
    const double se = std::sqrt((between + cfg.sigma_y * cfg.sigma_y) / 200'000.0);
    EXPECT_LE(std::abs(got[j] - want[j]), 4 * se);
  }
}

TEST(Gmm, CsvRoundTrip) {
  GmmConfig cfg;
  cfg.observations = 7;
  Rng rng(1);
  const GmmDataset d = gmm_simulate(cfg, rng);
  const auto path = std::filesystem::temp_directory_path() / "rbgrad_gmm_roundtrip.csv";
  write_gmm_csv(path, d, 42);
  std::uint64_t seed = 0;
  const GmmDataset back = read_gmm_csv(path, &seed);
  EXPECT_EQ(seed, 42u);
  EXPECT_EQ(back.z, d.z);
  EXPECT_EQ(back.y, d.y);
  std::filesystem::remove(path);
}

TEST(Gmm, DensityAtMean) {
  const std::vector<double> y{1.5, -2.0}, mu{1.5, -2.0, 7.0, 7.0}, logits{0.0, 0.0};
  const std::vector<double> log_w{std::log(0.5), std::log(0.5)};
  GmmDatumIntegrand f(y, mu, logits, log_w, 1.0);
  // log π and −log π̂ cancel, leaving the density at its mean
  EXPECT_NEAR(f.value(Atom{0}), -std::log(2 * std::numbers::pi), 1e-14);
}

TEST(Gmm, EqualCentroidsGiveFlatIntegrand) {
  const std::vector<double> y{0.3, 0.1}, mu{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const std::vector<double> logits(3, 0.0), log_w(3, std::log(1.0 / 3));
  GmmDatumIntegrand f(y, mu, logits, log_w, 0.5);
  EXPECT_NEAR(f.value(Atom{0}), f.value(Atom{2}), 1e-14);
  SoftmaxCategorical d(logits);
  ParamVector score_part = ParamVector::Zero(3);
  for (std::uint64_t z = 0; z < 3; ++z) score_part += d.pmf(Atom{z}) * f.value(Atom{z}) * d.score(Atom{z});
  EXPECT_LT(score_part.lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Gmm, ElboMatchesDirectFormula) {
  const GmmModel m = small_gmm(7);
  const ParamVector x = m.initial_params();
  const GmmVariationalParams vp = m.unpack(x);
  const double s = m.config().sigma_y, s0 = m.config().sigma0;
  const std::size_t K = m.config().components;
  double want = 0.0;
  for (Eigen::Index k = 0; k < vp.mu_hat.rows(); ++k) {
    want += log_normal_2d(vp.mu_hat.row(k).transpose(), Eigen::VectorXd::Zero(2), s0);
  }
  for (Eigen::Index n = 0; n < m.data().rows(); ++n) {
    const auto q = oracle::softmax(vp.logits.row(n).transpose());
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      want += q[k] * (log_normal_2d(m.data().row(n).transpose(), vp.mu_hat.row(kk).transpose(), s) +
                      std::log(1.0 / K) - std::log(q[k]));
    }
  }
  EXPECT_NEAR(m.elbo(x), want, 1e-9 * std::abs(want));
}

TEST(Gmm, SingleComponentIsPenalizedLikelihood) {
  const GmmModel m = small_gmm(8, 1, 15);
  const ParamVector x = m.initial_params();
  const Eigen::VectorXd mu = m.unpack(x).mu_hat.row(0).transpose();
  double want = log_normal_2d(mu, Eigen::VectorXd::Zero(2), m.config().sigma0);
  for (Eigen::Index n = 0; n < m.data().rows(); ++n) want += log_normal_2d(m.data().row(n).transpose(), mu, m.config().sigma_y);
  EXPECT_NEAR(m.elbo(x), want, 1e-10 * std::abs(want));
}

TEST(Gmm, ElboBoundsJointWithAssignmentsSummedOut) {
  // With μ held at a point, the bound is on log p(y, μ̂) = log p(μ̂) + Σ_n log Σ_k π_k N(y_n; μ̂_k).
  const GmmModel m = small_gmm(9, 2, 3);
  Rng rng(2);
  std::normal_distribution<double> n01;
  for (int c = 0; c < 10; ++c) {
    ParamVector x = m.initial_params();
    for (auto& v : x) v += n01(rng);
    const GmmVariationalParams vp = m.unpack(x);
    double joint = 0.0;
    for (Eigen::Index k = 0; k < 2; ++k) joint += log_normal_2d(vp.mu_hat.row(k).transpose(), Eigen::VectorXd::Zero(2), 5.0);
    for (Eigen::Index n = 0; n < 3; ++n) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < 2; ++k) s += 0.5 * std::exp(log_normal_2d(m.data().row(n).transpose(), vp.mu_hat.row(k).transpose(), 0.5));
      joint += std::log(s);
    }
    EXPECT_LE(m.elbo(x), joint + 1e-12);
  }
}

TEST(Gmm, LabelPermutationInvariance) {
  const GmmModel m = small_gmm(10, 4, 10);
  const ParamVector x = m.initial_params();
  GmmVariationalParams vp = m.unpack(x), swapped = vp;
  const std::vector<Eigen::Index> perm{2, 0, 3, 1};
  for (Eigen::Index k = 0; k < 4; ++k) {
    swapped.mu_hat.row(k) = vp.mu_hat.row(perm[static_cast<std::size_t>(k)]);
    swapped.logits.col(k) = vp.logits.col(perm[static_cast<std::size_t>(k)]);
  }
  EXPECT_NEAR(m.elbo(m.pack(swapped)), m.elbo(x), 1e-9 * std::abs(m.elbo(x)));
}

TEST(Gmm, ExactGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GmmModel m = small_gmm(100 + seed, 3, 6);
    Rng rng(seed);
    std::normal_distribution<double> n01;
    ParamVector x = m.initial_params();
    for (auto& v : x) v += 0.5 * n01(rng);
    const ParamVector g = m.loss_gradient(x, {EstimatorKind::Exact}, rng).grad;
    const auto fd = oracle::central_difference([&](const oracle::Vec& v) { return m.loss(v); }, x);
    EXPECT_LT(oracle::rel_err(g, fd), 1e-5) << seed;
  }
}

TEST(Gmm, EstimatorsUnbiasedForFullGradient) {
  const GmmModel m = small_gmm(11, 3, 4);
  const ParamVector x = m.initial_params();
  Rng rng(3);
  const ParamVector truth = m.loss_gradient(x, {EstimatorKind::Exact}, rng).grad;
  ParamVector mean = ParamVector::Zero(truth.size());
  ParamVector sq = ParamVector::Zero(truth.size());
  const int draws = 100'000;
  for (int i = 0; i < draws; ++i) {
    const ParamVector g = m.loss_gradient(x, {EstimatorKind::Reinforce}, rng).grad;
    mean += g / draws;
    sq += g.cwiseAbs2() / draws;
  }
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double se = std::sqrt(std::max(0.0, sq[i] - mean[i] * mean[i]) / draws);
    EXPECT_LE(std::abs(mean[i] - truth[i]), 4 * se + 1e-12) << i;
  }
}

TEST(KMeans, LloydExample) {
  Eigen::MatrixXd data(4, 1), c(2, 1);
  data << 0, 1, 9, 10;
  c << 0, 10;
  const Eigen::MatrixXd next = lloyd_iteration(data, c);
  EXPECT_DOUBLE_EQ(next(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(next(1, 0), 9.5);
}

TEST(KMeans, AsManyCentroidsAsPoints) {
  Eigen::MatrixXd data(5, 2);
  data << 0, 0, 1, 5, -3, 2, 8, 8, 4, -1;
  Rng rng(1);
  const KMeansResult r = kmeans(data, 5, rng);
  EXPECT_NEAR(r.distortion.back(), 0.0, 1e-20);
}

TEST(KMeans, DistortionNonIncreasing) {
  GmmConfig cfg;
  Rng rng(12);
  const GmmDataset d = gmm_simulate(cfg, rng);
  const KMeansResult r = kmeans(d.y, 10, rng);
  for (std::size_t i = 1; i < r.distortion.size(); ++i) EXPECT_LE(r.distortion[i], r.distortion[i - 1] + 1e-9);
}

TEST(KMeans, InitSmoothsAssignments) {
  GmmConfig cfg;
  Rng rng(13);
  const GmmDataset d = gmm_simulate(cfg, rng);
  const GmmVariationalParams vp = kmeans_init(d.y, 10, rng);
  for (Eigen::Index n = 0; n < vp.logits.rows(); ++n) {
    const auto q = oracle::softmax(vp.logits.row(n).transpose());
    const std::size_t best = nearest_centroid(vp.mu_hat, d.y.row(n).transpose());
    EXPECT_NEAR(q[best], 0.99, 1e-12);
    EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12);
  }
}

// --- N-mixture --------------------------------------------------------------

TEST(NMixture, BinomialExample) {
  EXPECT_NEAR(log_binomial_pmf(2, 10, 0.2), std::log(45.0) + 2 * std::log(0.2) + 8 * std::log(0.8), 1e-12);
  EXPECT_NEAR(log_binomial_pmf(2, 10, 0.2), -1.1973617456, 1e-9);
}

TEST(NMixture, Simulate) {
  Rng rng(14);
  const auto y = nmixture_simulate(10, 0.2, 1000, rng);
  ASSERT_EQ(y.size(), 1000u);
  double mean = 0.0;
  for (auto v : y) {
    EXPECT_LE(v, 10u);
    mean += static_cast<double>(v) / 1000;
  }
  EXPECT_LE(std::abs(mean - 2.0), 4 * std::sqrt(10 * 0.2 * 0.8 / 1000));
  const auto all = nmixture_simulate(10, 1.0, 50, rng);
  for (auto v : all) EXPECT_EQ(v, 10u);
}

TEST(NMixture, CountSummaryMatchesDirectSum) {
  Rng rng(15);
  const auto y = nmixture_simulate(10, 0.2, 200, rng);
  const CountSummary s(y);
  for (std::uint64_t n : {s.max(), s.max() + 3, 40ul}) {
    double want = 0.0;
    for (auto v : y) want += log_binomial_pmf(v, n, 0.2);
    EXPECT_NEAR(s.log_likelihood(n, 0.2), want, 1e-9 * std::abs(want));
  }
  if (s.max() > 0) EXPECT_EQ(s.log_likelihood(s.max() - 1, 0.2), -std::numeric_limits<double>::infinity());
}

TEST(NMixture, SupportStartsAtLargestCount) {
  Rng rng(16);
  const NMixtureModel m(NMixtureConfig{}, nmixture_simulate(10, 0.2, 1000, rng));
  const auto p = m.problem(m.initial_params());
  EXPECT_EQ(p->dist.shift(), m.counts().max());
  double mass = 0.0;
  for (const auto& w : p->dist.enumerate_support()) {
    EXPECT_GE(w.atom.index, m.counts().max());
    mass += w.pmf;
  }
  EXPECT_GE(mass, 1 - 1e-10);
}

TEST(NMixture, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  const NMixtureModel m(NMixtureConfig{}, nmixture_simulate(10, 0.2, 1000, rng));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int c = 0; c < 10; ++c) {
    ParamVector x(2);
    x << std::log(5.0) + u(rng), u(rng);
    const ParamVector g = m.loss_gradient(x, {EstimatorKind::Exact}, rng).grad;
    const auto fd = oracle::central_difference([&](const oracle::Vec& v) { return m.loss(v); }, x);
    EXPECT_LT(oracle::rel_err(g, fd), 1e-5);
  }
}
