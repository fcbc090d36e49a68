#pragma once

namespace rbgrad {

/// ln Γ(x) for x > 0. Stirling series after shifting the argument to x ≥ 10;
/// absolute error below 1e-13 over the domain. Throws DomainError for x ≤ 0.
double log_gamma(double x);

/// ψ(x) = d/dx ln Γ(x) for x > 0, asymptotic series with upward recurrence.
double digamma(double x);

/// log C(n, k) for integers 0 ≤ k ≤ n.
double log_choose(double n, double k);

}  // namespace rbgrad
