#include "rbgrad/special_functions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rbgrad/types.hpp"

namespace rbgrad {

namespace {

constexpr double kAsymptoticStart = 10.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

}  // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  // ln Γ(x) = ln Γ(x + n) − ln(x (x+1) ... (x+n−1))
  double shift_log = 0.0;
  double prod = 1.0;
  while (x < kAsymptoticStart) {
    prod *= x;
    x += 1.0;
    if (prod < 1e-280 || prod > 1e280) {
      shift_log += std::log(prod);
      prod = 1.0;
    }
  }
  shift_log += std::log(prod);

  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number coefficients B_{2j} / (2j (2j-1))
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360360.0))))));
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series -
         shift_log;
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kAsymptoticStart) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
  return acc + std::log(x) - 0.5 / x - series;
}

double log_choose(double n, double k) {
  if (k < 0 || k > n) throw DomainError("log_choose: need 0 <= k <= n");
  if (k == 0 || k == n) return 0.0;
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

}  // namespace rbgrad
