#pragma once

#include <cmath>

#include "oracles.hpp"
#include "rbgrad/distributions.hpp"
#include "rbgrad/estimators.hpp"

namespace fixtures {

/// Tabulates a softmax problem for the oracles. Probabilities come from the
/// distribution's log-pmf; scores are recomputed from them as e_z − q.
inline oracle::Table make_table(const rbgrad::FiniteDistribution& dist,
                                const rbgrad::IntegrandOracle& f) {
  oracle::Table t;
  for (std::size_t z = 0; z < dist.size(); ++z) t.q.push_back(std::exp(dist.log_pmf(rbgrad::Atom{z})));
  for (std::size_t z = 0; z < dist.size(); ++z) {
    const auto e = f.eval(rbgrad::Atom{z});
    t.f.push_back(e.value);
    t.grad_f.push_back(e.grad);
    t.score.push_back(oracle::softmax_score(t.q, z));
  }
  return t;
}

}  // namespace fixtures
