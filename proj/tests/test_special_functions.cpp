#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rbgrad/special_functions.hpp"
#include "rbgrad/types.hpp"

using namespace rbgrad;

namespace {

// γ = lim H_n − ln n; the 1/(2n) and 1/(12n²) terms bring n = 1e6 to ~1e-20.
double euler_gamma_oracle() {
  const double n = 1e6;
  double h = 0.0;
  for (double i = 1; i <= n; ++i) h += 1.0 / i;
  return h - std::log(n) - 1.0 / (2.0 * n) + 1.0 / (12.0 * n * n);
}

}  // namespace

TEST(LogGamma, Factorial) {
  EXPECT_NEAR(log_gamma(5.0), std::log(24.0), 1e-13);
  EXPECT_NEAR(log_gamma(1.0), 0.0, 1e-13);
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-12);
}

TEST(LogGamma, AgreesWithStdLgamma) {
  for (double x : {1e-6, 0.01, 0.3, 1.7, 4.2, 9.99, 10.0, 37.5, 1e3, 1e6}) {
    EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-10 * std::max(1.0, std::abs(std::lgamma(x)))) << x;
  }
}

TEST(LogGamma, RejectsNonPositive) {
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.5), DomainError);
  EXPECT_THROW(digamma(0.0), DomainError);
}

TEST(Digamma, EulerMascheroni) {
  EXPECT_NEAR(digamma(1.0), -euler_gamma_oracle(), 1e-10);
  EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-12);
}

TEST(Digamma, Recurrence) {
  for (double x : {0.5, 1.0, 2.0, 10.0}) EXPECT_NEAR(digamma(x + 1) - digamma(x), 1.0 / x, 1e-12) << x;
}

TEST(Digamma, DerivativeOfLogGamma) {
  for (double x : {0.2, 1.3, 6.0, 55.0}) {
    const double h = 1e-5 * x;
    const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2 * h);
    EXPECT_NEAR(digamma(x), fd, 1e-6 * std::max(1.0, std::abs(fd))) << x;
  }
}

TEST(LogChoose, SmallValues) {
  EXPECT_NEAR(log_choose(10, 2), std::log(45.0), 1e-12);
  EXPECT_NEAR(log_choose(7, 0), 0.0, 1e-12);
  EXPECT_NEAR(log_choose(7, 7), 0.0, 1e-12);
}
