#include <cmath>

#include <gtest/gtest.h>

#include "rbgrad/bernoulli_toy.hpp"
#include "rbgrad/optim.hpp"

using namespace rbgrad;

namespace {

ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Sgd, Examples) {
  EXPECT_DOUBLE_EQ(sgd_step(vec({0.0}), vec({1.0}), 0.1)[0], -0.1);
  EXPECT_EQ(sgd_step(vec({3.0, -2.0}), vec({0.0, 0.0}), 0.1), vec({3.0, -2.0}));
  // f(η) = η², ∇f = 2η
  ParamVector eta = vec({1.0});
  eta = sgd_step(eta, 2 * eta, 0.1);
  EXPECT_NEAR(eta[0], 0.8, 1e-15);
  eta = sgd_step(eta, 2 * eta, 0.1);
  EXPECT_NEAR(eta[0], 0.64, 1e-15);
}

TEST(Sgd, RejectsNonFinite) {
  EXPECT_THROW(sgd_step(vec({0.0}), vec({NAN}), 0.1), NumericError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  OptimizerConfig cfg;
  cfg.lr = 0.01;
  for (double g : {1e-3, 0.5, -7.0, 1e4}) {
    AdamState st = AdamState::zeros(1);
    ParamVector eta = vec({2.0});
    adam_step(st, eta, vec({g}), cfg);
    EXPECT_NEAR(std::abs(eta[0] - 2.0), cfg.lr, 1e-6 * cfg.lr + 1e-8 / std::abs(g) * cfg.lr);
    EXPECT_EQ(std::signbit(eta[0] - 2.0), !std::signbit(g));
    EXPECT_EQ(st.t, 1u);
  }
}

TEST(Adam, ZeroGradientKeepsParameters) {
  OptimizerConfig cfg;
  AdamState st = AdamState::zeros(3);
  ParamVector eta = vec({1.0, -2.0, 0.5});
  const ParamVector start = eta;
  for (int i = 0; i < 50; ++i) adam_step(st, eta, ParamVector::Zero(3), cfg);
  EXPECT_EQ(eta, start);
  EXPECT_EQ(st.t, 50u);
}

TEST(Adam, PermutationEquivariant) {
  OptimizerConfig cfg;
  AdamState a = AdamState::zeros(3), b = AdamState::zeros(3);
  ParamVector x = vec({1.0, 2.0, 3.0}), y = vec({3.0, 1.0, 2.0});
  const ParamVector grads[] = {vec({0.1, -0.4, 2.0}), vec({-1.0, 0.3, 0.2}), vec({0.0, 5.0, -0.5})};
  for (const auto& g : grads) {
    adam_step(a, x, g, cfg);
    adam_step(b, y, vec({g[2], g[0], g[1]}), cfg);
  }
  EXPECT_EQ(y, vec({x[2], x[0], x[1]}));
}

TEST(Adam, MatchesHandRolledUpdate) {
  OptimizerConfig cfg;
  cfg.lr = 0.05;
  AdamState st = AdamState::zeros(1);
  ParamVector eta = vec({0.3});
  double m = 0, v = 0, x = 0.3;
  for (int t = 1; t <= 5; ++t) {
    const double g = std::sin(t);
    adam_step(st, eta, vec({g}), cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= cfg.lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(eta[0], x, 1e-14);
  }
}

TEST(Adam, RejectsNonFinite) {
  AdamState st = AdamState::zeros(1);
  ParamVector eta = vec({0.0});
  EXPECT_THROW(adam_step(st, eta, vec({INFINITY}), OptimizerConfig{}), NumericError);
}

TEST(RunOptimization, TraceShape) {
  BernoulliToyModel m;
  RunOptions ro;
  const OptimizationResult r = run_optimization(m, {EstimatorKind::ReinforcePlus, 1}, {}, 30, 3, 5, ro);
  ASSERT_EQ(r.records.size(), 90u);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.final_params.size(), 3u);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    EXPECT_EQ(r.records[i].trial, i / 30);
    EXPECT_EQ(r.records[i].iter, i % 30 + 1);
    EXPECT_EQ(r.records[i].base_evals, 2u);
    if (i % 30) EXPECT_GE(r.records[i].wall_ms, r.records[i - 1].wall_ms);
  }
}

TEST(RunOptimization, ExactTraceIgnoresSeed) {
  BernoulliToyModel m;
  RunOptions ro;
  ro.record_wall_time = false;
  OptimizerConfig o;
  o.lr = 1e-2;
  const auto a = run_optimization(m, {EstimatorKind::Exact}, o, 50, 2, 1, ro);
  const auto b = run_optimization(m, {EstimatorKind::Exact}, o, 50, 2, 99, ro);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].loss, b.records[i].loss);
}

TEST(RunOptimization, AddingTrialsKeepsEarlierOnes) {
  BernoulliToyModel m;
  RunOptions ro;
  ro.record_wall_time = false;
  const auto a = run_optimization(m, {EstimatorKind::Reinforce}, {}, 20, 2, 7, ro);
  const auto b = run_optimization(m, {EstimatorKind::Reinforce}, {}, 20, 4, 7, ro);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].loss, b.records[i].loss);
}

TEST(RunOptimization, JobsDoNotChangeResults) {
  BernoulliToyModel m;
  RunOptions one, four;
  one.record_wall_time = four.record_wall_time = false;
  four.jobs = 4;
  const auto a = run_optimization(m, {EstimatorKind::ReinforcePlus, 1}, {}, 40, 6, 3, one);
  const auto b = run_optimization(m, {EstimatorKind::ReinforcePlus, 1}, {}, 40, 6, 3, four);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].loss, b.records[i].loss);
}

TEST(RunOptimization, ExactBernoulliApproachesOptimum) {
  BernoulliToyModel m;
  OptimizerConfig o;
  o.lr = 1e-2;
  const auto r = run_optimization(m, {EstimatorKind::Exact}, o, 2000, 1, 1);
  EXPECT_LT(r.records.back().loss, r.records.front().loss);
  EXPECT_NEAR(r.records.back().loss, 0.6705, 0.01);
}
