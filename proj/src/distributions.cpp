#include "rbgrad/distributions.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rbgrad/special_functions.hpp"

namespace rbgrad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// 1 − included cannot resolve a tail below a few ulps of 1.
constexpr double kTailSnap = 4.0 * std::numeric_limits<double>::epsilon();

double log_sum_exp(std::span<const double> xs) {
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

}  // namespace

bool TopKSet::contains(Atom z) const {
  return std::find(atoms.begin(), atoms.end(), z) != atoms.end();
}

double DiscreteDistribution::pmf(Atom z) const { return std::exp(log_pmf(z)); }

ParamVector DiscreteDistribution::score(Atom z) const {
  ParamVector out = ParamVector::Zero(static_cast<Eigen::Index>(param_dim_));
  accumulate_score(z, 1.0, out);
  return out;
}

Atom DiscreteDistribution::sample(Rng& rng) const {
  return sample_conditional_complement(top_k(0), rng);
}

Atom DiscreteDistribution::sample_conditional_topk(const TopKSet& topk, Rng& rng) const {
  if (topk.atoms.empty() || !(topk.included_mass > 0.0)) {
    throw DegenerateTailError("sample_conditional_topk: included set has zero mass");
  }
  const double u = uniform01(rng) * topk.included_mass;
  double cum = 0.0;
  for (Atom a : topk.atoms) {
    cum += pmf(a);
    if (u < cum) return a;
  }
  return topk.atoms.back();
}

// ---------------------------------------------------------------------------
// FiniteDistribution

void FiniteDistribution::set_log_probs(std::vector<double> log_probs) {
  log_probs_ = std::move(log_probs);
  probs_.resize(log_probs_.size());
  std::transform(log_probs_.begin(), log_probs_.end(), probs_.begin(),
                 [](double lp) { return std::exp(lp); });
}

void FiniteDistribution::check_atom(Atom z) const {
  if (!in_support(z)) {
    throw DomainError("atom " + std::to_string(z.index) + " outside support of size " +
                      std::to_string(log_probs_.size()));
  }
}

double FiniteDistribution::log_pmf(Atom z) const {
  check_atom(z);
  return log_probs_[z.index];
}

TopKSet FiniteDistribution::top_k(std::size_t k) const {
  const std::size_t n = log_probs_.size();
  if (k > n) {
    throw DomainError("top_k: k = " + std::to_string(k) + " exceeds support size " +
                      std::to_string(n));
  }
  TopKSet out;
  if (k == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (log_probs_[a] != log_probs_[b]) return log_probs_[a] > log_probs_[b];
                      return a < b;
                    });
  std::vector<char> included(n, 0);
  out.atoms.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.atoms.push_back(Atom{order[i]});
    included[order[i]] = 1;
  }
  out.included_mass = 0.0;
  out.tail_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (included[i] ? out.included_mass : out.tail_mass) += probs_[i];
  }
  return out;
}

Atom FiniteDistribution::sample_conditional_complement(const TopKSet& topk, Rng& rng) const {
  if (!(topk.tail_mass > 0.0)) {
    throw DegenerateTailError("sample_conditional_complement: degenerate tail (mass 0)");
  }
  const std::size_t n = log_probs_.size();
  std::vector<char> excluded(n, 0);
  for (Atom a : topk.atoms) excluded[a.index] = 1;

  const double u = uniform01(rng) * topk.tail_mass;
  double cum = 0.0;
  std::size_t last = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (excluded[i] || probs_[i] == 0.0) continue;
    cum += probs_[i];
    last = i;
    if (u < cum) return Atom{i};
  }
  if (last == n) {
    throw DegenerateTailError("sample_conditional_complement: complement has zero mass");
  }
  return Atom{last};
}

std::vector<WeightedAtom> FiniteDistribution::enumerate_support(double) const {
  std::vector<WeightedAtom> out;
  out.reserve(probs_.size());
  for (std::size_t i = 0; i < probs_.size(); ++i) out.push_back({Atom{i}, probs_[i]});
  return out;
}

// ---------------------------------------------------------------------------
// SoftmaxCategorical

SoftmaxCategorical::SoftmaxCategorical(std::span<const double> logits,
                                       std::optional<std::size_t> param_dim,
                                       std::size_t param_offset)
    : FiniteDistribution(param_dim.value_or(logits.size()), param_offset) {
  if (logits.empty()) throw DomainError("SoftmaxCategorical: need at least one category");
  if (param_offset + logits.size() > this->param_dim()) {
    throw DomainError("SoftmaxCategorical: logit slice exceeds parameter dimension");
  }
  for (double l : logits) {
    if (!std::isfinite(l)) throw DomainError("SoftmaxCategorical: non-finite logit");
  }
  const double lse = log_sum_exp(logits);
  std::vector<double> lp(logits.begin(), logits.end());
  for (double& x : lp) x -= lse;
  set_log_probs(std::move(lp));
}

void SoftmaxCategorical::accumulate_score(Atom z, double scale, ParamVector& out) const {
  check_atom(z);
  const auto p = probs();
  const auto off = static_cast<Eigen::Index>(param_offset());
  for (std::size_t j = 0; j < p.size(); ++j) {
    out[off + static_cast<Eigen::Index>(j)] -= scale * p[j];
  }
  out[off + static_cast<Eigen::Index>(z.index)] += scale;
}

// ---------------------------------------------------------------------------
// IndependentBernoulliProduct

IndependentBernoulliProduct::IndependentBernoulliProduct(double eta, unsigned d,
                                                         std::size_t param_dim,
                                                         std::size_t param_offset)
    : FiniteDistribution(param_dim, param_offset), eta_(eta), d_(d) {
  if (d == 0 || d > 20) throw DomainError("IndependentBernoulliProduct: need 1 <= d <= 20");
  if (!std::isfinite(eta)) throw DomainError("IndependentBernoulliProduct: non-finite eta");
  if (param_offset >= param_dim) throw DomainError("IndependentBernoulliProduct: bad offset");
  const double log_on = -softplus(-eta);
  const double log_off = -softplus(eta);
  const std::size_t n = std::size_t{1} << d;
  std::vector<double> lp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int ones = std::popcount(i);
    lp[i] = ones * log_on + (static_cast<int>(d) - ones) * log_off;
  }
  set_log_probs(std::move(lp));
}

void IndependentBernoulliProduct::accumulate_score(Atom z, double scale, ParamVector& out) const {
  check_atom(z);
  const int ones = std::popcount(z.index);
  out[static_cast<Eigen::Index>(param_offset())] += scale * (ones - d_ * sigmoid(eta_));
}

// ---------------------------------------------------------------------------
// ShiftedNegativeBinomial

ShiftedNegativeBinomial::ShiftedNegativeBinomial(double log_r, double logit_p,
                                                 std::uint64_t shift, std::size_t param_dim,
                                                 std::size_t param_offset)
    : DiscreteDistribution(param_dim, param_offset),
      log_r_(log_r),
      logit_p_(logit_p),
      shift_(shift) {
  if (!std::isfinite(log_r) || !std::isfinite(logit_p)) {
    throw DomainError("ShiftedNegativeBinomial: non-finite parameters");
  }
  if (param_offset + 2 > param_dim) throw DomainError("ShiftedNegativeBinomial: bad offset");
  r_ = std::exp(log_r);
  p_ = sigmoid(logit_p);
  log_p_ = -softplus(-logit_p);
  log_1mp_ = -softplus(logit_p);
  if (!(r_ > 0.0) || !std::isfinite(r_) || !(p_ < 1.0)) {
    throw DomainError("ShiftedNegativeBinomial: parameters out of range");
  }
  lgamma_r_ = log_gamma(r_);

  // Increasing while m <= (r−1)p/(1−p) − 1; settle ties numerically.
  const double x = (r_ - 1.0) * std::exp(logit_p);
  std::uint64_t c = 0;
  if (x > 0.0) {
    c = x > static_cast<double>(kScanCap) ? kScanCap : static_cast<std::uint64_t>(std::floor(x));
  }
  std::uint64_t best = c;
  for (std::uint64_t m = (c > 0 ? c - 1 : 0); m <= c + 1; ++m) {
    if (log_pmf_offset(m) > log_pmf_offset(best) || (m < best && log_pmf_offset(m) == log_pmf_offset(best))) {
      best = m;
    }
  }
  mode_offset_ = best;
}

double ShiftedNegativeBinomial::log_pmf_offset(std::uint64_t m) const {
  const double md = static_cast<double>(m);
  const double head = m == 0 ? 0.0 : log_gamma(md + r_) - lgamma_r_ - log_gamma(md + 1.0);
  return head + r_ * log_1mp_ + md * log_p_;
}

double ShiftedNegativeBinomial::log_pmf(Atom z) const {
  if (z.index < shift_) return kNegInf;
  return log_pmf_offset(z.index - shift_);
}

void ShiftedNegativeBinomial::accumulate_score(Atom z, double scale, ParamVector& out) const {
  if (!in_support(z)) {
    throw DomainError("ShiftedNegativeBinomial: atom " + std::to_string(z.index) +
                      " below shift " + std::to_string(shift_));
  }
  const double m = static_cast<double>(z.index - shift_);
  const auto off = static_cast<Eigen::Index>(param_offset());
  out[off] += scale * r_ * (digamma(m + r_) - digamma(r_) + log_1mp_);
  out[off + 1] += scale * (m * (1.0 - p_) - r_ * p_);
}

TopKSet ShiftedNegativeBinomial::top_k(std::size_t k) const {
  TopKSet out;
  if (k == 0) return out;
  // Unimodal pmf: the top k form an interval around the mode. Grow it one
  // atom at a time toward the larger neighbour, preferring the left on ties.
  std::uint64_t lo = mode_offset_;
  std::uint64_t hi = mode_offset_;
  double lp_left = lo > 0 ? log_pmf_offset(lo - 1) : kNegInf;
  double lp_right = log_pmf_offset(hi + 1);
  out.atoms.push_back(Atom{shift_ + mode_offset_});
  double included = std::exp(log_pmf_offset(mode_offset_));
  while (out.atoms.size() < k) {
    if (lo > 0 && lp_left >= lp_right) {
      --lo;
      out.atoms.push_back(Atom{shift_ + lo});
      included += std::exp(lp_left);
      lp_left = lo > 0 ? log_pmf_offset(lo - 1) : kNegInf;
    } else {
      ++hi;
      out.atoms.push_back(Atom{shift_ + hi});
      included += std::exp(lp_right);
      lp_right = log_pmf_offset(hi + 1);
    }
  }
  out.included_mass = included;
  const double tail = 1.0 - included;
  out.tail_mass = tail > kTailSnap ? tail : 0.0;
  return out;
}

Atom ShiftedNegativeBinomial::sample_conditional_complement(const TopKSet& topk, Rng& rng) const {
  if (!(topk.tail_mass > 0.0)) {
    throw DegenerateTailError("sample_conditional_complement: degenerate tail (mass 0)");
  }
  std::vector<std::uint64_t> excluded;
  excluded.reserve(topk.atoms.size());
  for (Atom a : topk.atoms) excluded.push_back(a.index);
  std::sort(excluded.begin(), excluded.end());

  const double u = uniform01(rng) * topk.tail_mass;
  double cum = 0.0;
  double lp = log_pmf_offset(0);
  std::uint64_t last = 0;
  bool have_last = false;
  for (std::uint64_t m = 0; m <= kScanCap; ++m) {
    if (m > 0) {
      const double md = static_cast<double>(m);
      lp += std::log((md - 1.0 + r_) / md) + log_p_;
    }
    const std::uint64_t n = shift_ + m;
    if (std::binary_search(excluded.begin(), excluded.end(), n)) continue;
    const double pm = std::exp(lp);
    // Past the mode the remaining mass can no longer move the running sum;
    // u lies in the rounding gap between tail_mass and the true complement.
    if (have_last && m > mode_offset_ && cum + pm == cum) return Atom{last};
    cum += pm;
    last = n;
    have_last = true;
    if (u < cum) return Atom{n};
  }
  throw NumericError("sample_conditional_complement: scan exceeded " +
                     std::to_string(kScanCap) + " atoms past the shift");
}

std::vector<WeightedAtom> ShiftedNegativeBinomial::enumerate_support(double mass_cutoff) const {
  if (!(mass_cutoff < 1.0)) {
    throw DomainError("enumerate_support: infinite support needs mass_cutoff < 1");
  }
  std::vector<WeightedAtom> out;
  double cum = 0.0;
  double lp = log_pmf_offset(0);
  for (std::uint64_t m = 0; m <= kScanCap; ++m) {
    if (m > 0) {
      const double md = static_cast<double>(m);
      lp += std::log((md - 1.0 + r_) / md) + log_p_;
    }
    const double pm = std::exp(lp);
    out.push_back({Atom{shift_ + m}, pm});
    cum += pm;
    if (cum >= mass_cutoff) return out;
  }
  throw NumericError("enumerate_support: cap of " + std::to_string(kScanCap) +
                     " atoms reached before cumulative mass " + std::to_string(mass_cutoff));
}

}  // namespace rbgrad
