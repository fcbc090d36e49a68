#include "rbgrad/diagnostics.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <sstream>

#include "rbgrad/bernoulli_toy.hpp"
#include "rbgrad/gmm.hpp"
#include "rbgrad/io.hpp"
#include "rbgrad/nmixture.hpp"

namespace rbgrad {

// ---------------------------------------------------------------------------
// MomentAccumulator

MomentAccumulator::MomentAccumulator(Eigen::Index dim)
    : mean_(Eigen::ArrayXd::Zero(dim)),
      m2_(Eigen::ArrayXd::Zero(dim)),
      m3_(Eigen::ArrayXd::Zero(dim)),
      m4_(Eigen::ArrayXd::Zero(dim)) {}

void MomentAccumulator::add(const ParamVector& x) {
  if (n_ == 0 && mean_.size() != x.size()) *this = MomentAccumulator(x.size());
  const double n1 = static_cast<double>(n_);
  ++n_;
  const double n = static_cast<double>(n_);
  const Eigen::ArrayXd delta = x.array() - mean_;
  const Eigen::ArrayXd delta_n = delta / n;
  const Eigen::ArrayXd delta_n2 = delta_n.square();
  const Eigen::ArrayXd term1 = delta * delta_n * n1;
  mean_ += delta_n;
  m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
  m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
  m2_ += term1;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double n = na + nb;
  const Eigen::ArrayXd delta = other.mean_ - mean_;
  const Eigen::ArrayXd d2 = delta.square();
  const Eigen::ArrayXd m2 = m2_ + other.m2_ + d2 * na * nb / n;
  const Eigen::ArrayXd m3 = m3_ + other.m3_ + d2 * delta * na * nb * (na - nb) / (n * n) +
                            3.0 * delta * (na * other.m2_ - nb * m2_) / n;
  const Eigen::ArrayXd m4 =
      m4_ + other.m4_ + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
      6.0 * d2 * (na * na * other.m2_ + nb * nb * m2_) / (n * n) +
      4.0 * delta * (na * other.m3_ - nb * m3_) / n;
  mean_ += delta * nb / n;
  m2_ = m2;
  m3_ = m3;
  m4_ = m4;
  n_ += other.n_;
}

MomentsReport MomentAccumulator::report(std::size_t non_finite) const {
  MomentsReport r;
  r.samples = n_;
  r.non_finite = non_finite;
  r.mean = mean_.matrix();
  const double n = static_cast<double>(n_);
  if (n_ >= 2) {
    r.variance = (m2_ / (n - 1.0)).matrix();
    r.std_error = (r.variance.array() / n).sqrt().matrix();
    const Eigen::ArrayXd biased = m2_ / n;
    r.variance_std_error = ((m4_ / n - biased.square()).max(0.0) / n).sqrt().matrix();
  } else {
    r.variance = ParamVector::Zero(mean_.size());
    r.std_error = r.variance;
    r.variance_std_error = r.variance;
  }
  r.total_variance = r.variance.sum();
  return r;
}

// ---------------------------------------------------------------------------
// Empirical moments

MomentsReport empirical_moments(const EstimatorCall& call, std::size_t draws, std::uint64_t seed,
                                Execution execution) {
  if (draws < 2) throw DomainError("empirical_moments: need at least 2 draws");
  const std::size_t chunks = (draws + kMomentChunk - 1) / kMomentChunk;

  auto run_chunk = [&](std::size_t c, MomentAccumulator& acc, std::size_t& bad) {
    Rng rng(derive_seed(seed, c));
    const std::size_t end = std::min(draws, (c + 1) * kMomentChunk);
    for (std::size_t i = c * kMomentChunk; i < end; ++i) {
      const ParamVector x = call(rng);
      if (!x.allFinite()) {
        ++bad;
        continue;
      }
      acc.add(x);
    }
  };

  if (execution == Execution::Serial) {
    MomentAccumulator acc;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c, acc, bad);
    return acc.report(bad);
  }

  std::vector<MomentAccumulator> partial(chunks);
  std::vector<std::size_t> bad(chunks, 0);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    try {
      run_chunk(c, partial[c], bad[c]);
    } catch (...) {
#pragma omp critical(rbgrad_moments_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  MomentAccumulator total;
  std::size_t total_bad = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total.merge(partial[c]);
    total_bad += bad[c];
  }
  return total.report(total_bad);
}

// ---------------------------------------------------------------------------
// Exact enumeration

std::string EstimatorSpec::label() const {
  std::ostringstream os;
  os << (base == BaseEstimator::Reinforce ? "reinforce" : "reinforce+");
  switch (kind) {
    case Kind::Single:
      break;
    case Kind::RaoBlackwell:
      os << " rb(k=" << k << ")";
      break;
    case Kind::Minibatch:
      os << " minibatch(n=" << n << ")";
      break;
    case Kind::Budgeted:
      os << " budgeted(n=" << n << ",k=" << k << ")";
      break;
  }
  return os.str();
}

GradEstimate run_spec(const EstimatorSpec& spec, const DiscreteDistribution& dist,
                      const IntegrandOracle& f, Rng& rng) {
  switch (spec.kind) {
    case EstimatorSpec::Kind::Single:
      return estimate(spec.base, dist, f, rng);
    case EstimatorSpec::Kind::RaoBlackwell:
      return rao_blackwellize(spec.base, dist, f, spec.k, rng);
    case EstimatorSpec::Kind::Minibatch:
      return minibatch(spec.base, dist, f, spec.n, rng);
    case EstimatorSpec::Kind::Budgeted:
      return rb_budgeted(spec.base, dist, f, spec.n, spec.k, rng);
  }
  throw ContractError("run_spec: unknown estimator kind");
}

namespace {

struct Law {
  ParamVector mean;
  ParamVector variance;
};

struct WeightedValue {
  double weight;
  ParamVector value;
};

Law weighted_law(const std::vector<WeightedValue>& xs, Eigen::Index dim) {
  Law law{ParamVector::Zero(dim), ParamVector::Zero(dim)};
  for (const auto& x : xs) law.mean.noalias() += x.weight * x.value;
  for (const auto& x : xs) law.variance += x.weight * (x.value - law.mean).cwiseAbs2();
  return law;
}

// Mixture over aux draws: E = Σ w E_a, V = Σ w (V_a + (E_a − E)²).
Law total_law(const std::vector<std::pair<double, Law>>& parts, Eigen::Index dim) {
  Law law{ParamVector::Zero(dim), ParamVector::Zero(dim)};
  for (const auto& [w, l] : parts) law.mean.noalias() += w * l.mean;
  for (const auto& [w, l] : parts) law.variance += w * (l.variance + (l.mean - law.mean).cwiseAbs2());
  return law;
}

std::vector<std::pair<AuxDraws, double>> aux_law(BaseEstimator base,
                                                 const std::vector<WeightedAtom>& support) {
  std::vector<std::pair<AuxDraws, double>> out;
  if (base == BaseEstimator::Reinforce) {
    out.push_back({AuxDraws{}, 1.0});
    return out;
  }
  for (const auto& [a, q] : support) {
    if (q > 0.0) out.push_back({AuxDraws{a}, q});
  }
  return out;
}

std::vector<WeightedAtom> finite_support(const DiscreteDistribution& dist) {
  if (!dist.support_size()) throw DomainError("exact enumeration needs a finite support");
  return dist.enumerate_support();
}

}  // namespace

MomentsReport exact_moments(const EstimatorSpec& spec, const DiscreteDistribution& dist,
                            const IntegrandOracle& f) {
  const auto support = finite_support(dist);
  const auto auxes = aux_law(spec.base, support);
  if (auxes.size() * support.size() > kMaxEnumeration) {
    throw DomainError("exact_moments: " + std::to_string(auxes.size() * support.size()) +
                      " combinations exceed the enumeration limit");
  }
  const auto dim = static_cast<Eigen::Index>(dist.param_dim());

  const bool conditional = spec.kind == EstimatorSpec::Kind::RaoBlackwell ||
                           spec.kind == EstimatorSpec::Kind::Budgeted;
  TopKSet topk;
  std::size_t tail_draws = 1;
  if (conditional) {
    topk = dist.top_k(spec.k);
    if (spec.kind == EstimatorSpec::Kind::Budgeted) {
      if (spec.n == 0 || spec.k > spec.n) throw DomainError("exact_moments: need 0 <= k <= n");
      if (spec.k == spec.n && topk.tail_mass > 0.0) {
        throw DomainError("exact_moments: k = n with a non-empty tail");
      }
      tail_draws = spec.n - spec.k;
    }
  }
  if (spec.kind == EstimatorSpec::Kind::Minibatch && spec.n == 0) {
    throw DomainError("exact_moments: minibatch needs n >= 1");
  }

  std::vector<std::pair<double, Law>> parts;
  for (const auto& [aux, w] : auxes) {
    if (!conditional) {
      std::vector<WeightedValue> xs;
      for (const auto& [z, q] : support) {
        if (q > 0.0) xs.push_back({q, eval_at(spec.base, dist, f, z, aux)});
      }
      parts.push_back({w, weighted_law(xs, dim)});
      continue;
    }
    ParamVector det = ParamVector::Zero(dim);
    for (Atom u : topk.atoms) det.noalias() += dist.pmf(u) * eval_at(spec.base, dist, f, u, aux);
    if (!(topk.tail_mass > 0.0)) {
      parts.push_back({w, Law{det, ParamVector::Zero(dim)}});
      continue;
    }
    std::vector<WeightedValue> tail;
    for (const auto& [v, q] : support) {
      if (q > 0.0 && !topk.contains(v)) {
        tail.push_back({q / topk.tail_mass, eval_at(spec.base, dist, f, v, aux)});
      }
    }
    const Law tl = weighted_law(tail, dim);
    const double eps = topk.tail_mass;
    parts.push_back({w, Law{det + eps * tl.mean,
                            (eps * eps / static_cast<double>(tail_draws)) * tl.variance}});
  }

  Law law = total_law(parts, dim);
  if (spec.kind == EstimatorSpec::Kind::Minibatch) law.variance /= static_cast<double>(spec.n);

  MomentsReport r;
  r.mean = law.mean;
  r.variance = law.variance;
  r.std_error = ParamVector::Zero(dim);
  r.variance_std_error = ParamVector::Zero(dim);
  r.total_variance = law.variance.sum();
  r.samples = 0;
  return r;
}

namespace {

// Laws of u ∼ q|C_k, v ∼ q|C̄_k and b ∼ Bernoulli(q(C̄_k)). A side with no
// mass is represented by one placeholder entry that b never selects.
struct TripletLaws {
  std::vector<std::pair<std::optional<Atom>, double>> u, v;
  double eps = 0.0;
};

TripletLaws triplet_laws(const FiniteDistribution& dist, std::size_t k) {
  const TopKSet topk = dist.top_k(k);
  TripletLaws laws;
  laws.eps = topk.tail_mass;
  if (topk.included_mass > 0.0) {
    for (Atom a : topk.atoms) laws.u.push_back({a, dist.pmf(a) / topk.included_mass});
  } else {
    laws.u.push_back({std::nullopt, 1.0});
  }
  if (topk.tail_mass > 0.0) {
    for (const auto& [a, q] : dist.enumerate_support()) {
      if (!topk.contains(a) && q > 0.0) laws.v.push_back({a, q / topk.tail_mass});
    }
  } else {
    laws.v.push_back({std::nullopt, 1.0});
  }
  return laws;
}

}  // namespace

double check_triplet_law(const FiniteDistribution& dist, std::size_t k) {
  const TripletLaws laws = triplet_laws(dist, k);
  std::vector<double> law(dist.size(), 0.0);
  for (const auto& [u, pu] : laws.u) {
    for (const auto& [v, pv] : laws.v) {
      for (bool b : {false, true}) {
        const double w = pu * pv * (b ? laws.eps : 1.0 - laws.eps);
        if (w == 0.0) continue;
        const auto& side = b ? v : u;
        if (!side) throw NumericError("triplet law: placeholder atom selected with positive mass");
        law[compose_triplet(u.value_or(Atom{}), v.value_or(Atom{}), b).index] += w;
      }
    }
  }
  double worst = 0.0;
  const auto q = dist.probs();
  for (std::size_t z = 0; z < law.size(); ++z) worst = std::max(worst, std::abs(law[z] - q[z]));
  return worst;
}

namespace {

struct RaoBlackwellTable {
  std::vector<std::pair<double, ParamVector>> conditional_mean;  // (P(v), E[g(T)|v])
  std::vector<ParamVector> conditional_var;                      // V[g(T)|v]
  std::vector<std::optional<Atom>> v_atoms;
};

RaoBlackwellTable rao_blackwell_table(const FiniteDistribution& dist, const IntegrandOracle& f,
                                      std::size_t k, BaseEstimator base, const AuxDraws& aux) {
  const TripletLaws laws = triplet_laws(dist, k);
  const auto dim = static_cast<Eigen::Index>(dist.param_dim());
  std::vector<ParamVector> g(dist.size());
  for (std::size_t z = 0; z < dist.size(); ++z) {
    if (dist.probs()[z] > 0.0) g[z] = eval_at(base, dist, f, Atom{z}, aux);
  }
  RaoBlackwellTable table;
  for (const auto& [v, pv] : laws.v) {
    ParamVector mean = ParamVector::Zero(dim);
    std::vector<std::pair<double, const ParamVector*>> terms;
    for (const auto& [u, pu] : laws.u) {
      for (bool b : {false, true}) {
        const double w = pu * (b ? laws.eps : 1.0 - laws.eps);
        if (w == 0.0) continue;
        const Atom t = compose_triplet(u.value_or(Atom{}), v.value_or(Atom{}), b);
        terms.push_back({w, &g[t.index]});
        mean.noalias() += w * g[t.index];
      }
    }
    ParamVector var = ParamVector::Zero(dim);
    for (const auto& [w, x] : terms) var += w * (*x - mean).cwiseAbs2();
    table.conditional_mean.push_back({pv, std::move(mean)});
    table.conditional_var.push_back(std::move(var));
    table.v_atoms.push_back(v);
  }
  return table;
}

}  // namespace

ParamVector variance_decomposition_residual(const FiniteDistribution& dist,
                                            const IntegrandOracle& f, std::size_t k,
                                            BaseEstimator base, const AuxDraws& aux) {
  const auto dim = static_cast<Eigen::Index>(dist.param_dim());
  std::vector<WeightedValue> plain;
  for (const auto& [z, q] : dist.enumerate_support()) {
    if (q > 0.0) plain.push_back({q, eval_at(base, dist, f, z, aux)});
  }
  const Law total = weighted_law(plain, dim);

  const RaoBlackwellTable table = rao_blackwell_table(dist, f, k, base, aux);
  std::vector<WeightedValue> rb;
  ParamVector expected_cond_var = ParamVector::Zero(dim);
  for (std::size_t i = 0; i < table.conditional_mean.size(); ++i) {
    const auto& [pv, mean] = table.conditional_mean[i];
    rb.push_back({pv, mean});
    expected_cond_var += pv * table.conditional_var[i];
  }
  const Law rb_law = weighted_law(rb, dim);
  return (total.variance - rb_law.variance - expected_cond_var).cwiseAbs();
}

double rao_blackwell_identity_residual(const FiniteDistribution& dist, const IntegrandOracle& f,
                                       std::size_t k, BaseEstimator base, const AuxDraws& aux) {
  const TopKSet topk = dist.top_k(k);
  const auto dim = static_cast<Eigen::Index>(dist.param_dim());
  ParamVector det = ParamVector::Zero(dim);
  for (Atom u : topk.atoms) det.noalias() += dist.pmf(u) * eval_at(base, dist, f, u, aux);

  const RaoBlackwellTable table = rao_blackwell_table(dist, f, k, base, aux);
  double worst = 0.0;
  for (std::size_t i = 0; i < table.v_atoms.size(); ++i) {
    ParamVector formula = det;
    if (const auto v = table.v_atoms[i]) {
      formula.noalias() += topk.tail_mass * eval_at(base, dist, f, *v, aux);
    }
    worst = std::max(worst, (formula - table.conditional_mean[i].second).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Finite differences

ParamVector finite_diff_grad(const ScalarFunction& fn, const ParamVector& at, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: need h > 0");
  ParamVector grad(at.size());
  ParamVector x = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    x[i] = at[i] + h;
    const double up = fn(x);
    x[i] = at[i] - h;
    const double down = fn(x);
    x[i] = at[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<SweepRow> variance_vs_k_sweep(const DiscreteDistribution& dist,
                                          const IntegrandOracle& f, BaseEstimator base,
                                          const std::vector<std::size_t>& k_list,
                                          std::size_t draws, std::uint64_t seed,
                                          Execution execution) {
  std::vector<SweepRow> rows;
  for (std::size_t k : k_list) {
    SweepRow row;
    row.k = k;
    row.tail_mass = dist.top_k(k).tail_mass;
    const EstimatorCall call = [&, k](Rng& rng) {
      return rao_blackwellize(base, dist, f, k, rng).grad;
    };
    row.moments = empirical_moments(call, draws, derive_seed(seed, k), execution);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "k,tail_mass,total_variance";
  const Eigen::Index dim = rows.empty() ? 0 : rows.front().moments.variance.size();
  for (Eigen::Index i = 0; i < dim; ++i) os << ",var_" << i;
  os << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << format_double(r.tail_mass) << ','
       << format_double(r.moments.total_variance);
    for (Eigen::Index i = 0; i < dim; ++i) os << ',' << format_double(r.moments.variance[i]);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Random instances

TableIntegrand::TableIntegrand(std::vector<double> offsets, Eigen::MatrixXd slopes,
                               ParamVector eta)
    : offsets_(std::move(offsets)), slopes_(std::move(slopes)), eta_(std::move(eta)) {
  if (slopes_.rows() != static_cast<Eigen::Index>(offsets_.size()) ||
      slopes_.cols() != eta_.size()) {
    throw DomainError("TableIntegrand: shape mismatch");
  }
}

double TableIntegrand::value(Atom z) const {
  if (z.index >= offsets_.size()) throw DomainError("TableIntegrand: atom out of range");
  return offsets_[z.index] + slopes_.row(static_cast<Eigen::Index>(z.index)).dot(eta_);
}

Evaluation TableIntegrand::eval(Atom z) const {
  return {value(z), slopes_.row(static_cast<Eigen::Index>(z.index)).transpose()};
}

RandomInstance random_instance(Rng& rng, std::size_t k_min, std::size_t k_max) {
  const std::size_t span = k_max - k_min + 1;
  const std::size_t K =
      k_min + std::min(span - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(span)));
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector logits(static_cast<Eigen::Index>(K));
  for (auto& l : logits) l = 2.0 * normal(rng);
  std::vector<double> offsets(K);
  for (auto& a : offsets) a = normal(rng);
  Eigen::MatrixXd slopes(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < slopes.size(); ++i) slopes.data()[i] = normal(rng);
  return {SoftmaxCategorical(logits), TableIntegrand(std::move(offsets), std::move(slopes), logits)};
}

// ---------------------------------------------------------------------------
// Property suites

namespace {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

constexpr BaseEstimator kBases[] = {BaseEstimator::Reinforce, BaseEstimator::ReinforcePlus};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

SuiteResult finish(SuiteResult r, double threshold, const char* what) {
  r.passed = r.failures == 0;
  std::ostringstream os;
  os << r.cases << " cases, " << r.failures << " failures, worst " << what << " " << fmt(r.worst)
     << " (threshold " << fmt(threshold) << ")";
  r.detail = os.str();
  return r;
}

SuiteResult unbiased_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "unbiased";
  constexpr double tol = 1e-10;
  Rng rng(opt.seed);
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t K = inst.dist.size();
    const ParamVector truth = exact_gradient(inst.dist, inst.integrand).grad;
    std::vector<EstimatorSpec> specs;
    for (BaseEstimator base : kBases) {
      specs.push_back({EstimatorSpec::Kind::Single, base});
      for (std::size_t k = 0; k <= K; ++k) specs.push_back({EstimatorSpec::Kind::RaoBlackwell, base, k});
      specs.push_back({EstimatorSpec::Kind::Minibatch, base, 0, 1 + uniform_index(rng, 4)});
      for (std::size_t n : {2u, 4u, 8u}) {
        specs.push_back({EstimatorSpec::Kind::Budgeted, base, uniform_index(rng, std::min(n, K)), n});
        specs.push_back({EstimatorSpec::Kind::Budgeted, base, select_k(inst.dist, n), n});
      }
    }
    double worst = 0.0;
    for (const auto& spec : specs) {
      const MomentsReport m = exact_moments(spec, inst.dist, inst.integrand);
      worst = std::max(worst, (m.mean - truth).cwiseAbs().maxCoeff());
    }
    r.worst = std::max(r.worst, worst);
    ++r.cases;
    if (!(worst < tol)) ++r.failures;
  }
  return finish(r, tol, "|mean - exact|");
}

SuiteResult triplet_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "triplet";
  constexpr double tol = 1e-12;
  Rng rng(opt.seed);
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t k = uniform_index(rng, inst.dist.size() + 1);
    const double d = check_triplet_law(inst.dist, k);
    r.worst = std::max(r.worst, d);
    ++r.cases;
    if (!(d < tol)) ++r.failures;
  }
  return finish(r, tol, "pmf discrepancy");
}

SuiteResult decomposition_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "decomposition";
  constexpr double tol = 1e-10;
  Rng rng(opt.seed);
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const RandomInstance inst = random_instance(rng, 5, 5);
    const std::size_t k = uniform_index(rng, 6);
    for (BaseEstimator base : kBases) {
      const AuxDraws aux = draw_aux(base, inst.dist, rng);
      const double res = std::max(
          variance_decomposition_residual(inst.dist, inst.integrand, k, base, aux).maxCoeff(),
          rao_blackwell_identity_residual(inst.dist, inst.integrand, k, base, aux));
      r.worst = std::max(r.worst, res);
      ++r.cases;
      if (!(res < tol)) ++r.failures;
    }
  }
  return finish(r, tol, "residual");
}

// Exact inequality lhs ≤ rhs per coordinate, with a rounding guard scaled to
// the base estimator's variance.
bool exact_leq(const ParamVector& lhs, const ParamVector& rhs, double scale) {
  const double guard = 1e-12 * (1.0 + scale);
  return ((lhs - rhs).array() <= guard).all();
}

double max_ratio(const ParamVector& lhs, const ParamVector& rhs) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    if (rhs[i] > 0.0) worst = std::max(worst, lhs[i] / rhs[i]);
  }
  return worst;
}

SuiteResult prop1_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "prop1";
  Rng rng(opt.seed);
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t k = uniform_index(rng, inst.dist.size() + 1);
    const double tail = inst.dist.top_k(k).tail_mass;
    for (BaseEstimator base : kBases) {
      const MomentsReport g = exact_moments({EstimatorSpec::Kind::Single, base}, inst.dist, inst.integrand);
      const MomentsReport rb =
          exact_moments({EstimatorSpec::Kind::RaoBlackwell, base, k}, inst.dist, inst.integrand);
      const ParamVector bound = tail * g.variance;
      r.worst = std::max(r.worst, max_ratio(rb.variance, bound));
      ++r.cases;
      if (!exact_leq(rb.variance, bound, g.variance.maxCoeff())) ++r.failures;
    }
  }
  return finish(r, 1.0, "V[rb] / (tail V[g])");
}

SuiteResult prop1_empirical_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "prop1-empirical";
  Rng rng(opt.seed);
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t k = uniform_index(rng, inst.dist.size() + 1);
    const double tail = inst.dist.top_k(k).tail_mass;
    const BaseEstimator base = kBases[c % 2];
    const std::uint64_t s = rng();
    const MomentsReport g = empirical_moments(
        [&](Rng& g_rng) { return estimate(base, inst.dist, inst.integrand, g_rng).grad; },
        opt.draws, derive_seed(s, 0));
    const MomentsReport rb = empirical_moments(
        [&](Rng& g_rng) { return rao_blackwellize(base, inst.dist, inst.integrand, k, g_rng).grad; },
        opt.draws, derive_seed(s, 1));
    // lhs ≤ rhs·(1 + 0.05) + 3·SE, plus the exact check's rounding guard for
    // k = K where REINFORCE+ leaves ~1e−32 of cancellation noise against rhs = 0.
    const double guard = 1e-12 * (1.0 + g.variance.maxCoeff());
    bool ok = true;
    for (Eigen::Index i = 0; i < g.variance.size(); ++i) {
      const double rhs = tail * g.variance[i];
      const double se = std::hypot(rb.variance_std_error[i], tail * g.variance_std_error[i]);
      if (rb.variance[i] > rhs * 1.05 + 3.0 * se + guard) ok = false;
      if (rhs > 0.0) r.worst = std::max(r.worst, rb.variance[i] / rhs);
    }
    ++r.cases;
    if (!ok) ++r.failures;
  }
  return finish(r, 1.05, "V[rb] / (tail V[g])");
}

SuiteResult prop2_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "prop2";
  Rng rng(opt.seed);
  for (std::size_t c = 0; c < opt.cases; ++c) {
    const RandomInstance inst = random_instance(rng);
    for (std::size_t n : {2u, 4u, 8u}) {
      const std::size_t k_hat = select_k(inst.dist, n);
      for (BaseEstimator base : kBases) {
        const MomentsReport mb =
            exact_moments({EstimatorSpec::Kind::Minibatch, base, 0, n}, inst.dist, inst.integrand);
        const MomentsReport rb = exact_moments({EstimatorSpec::Kind::Budgeted, base, k_hat, n},
                                               inst.dist, inst.integrand);
        r.worst = std::max(r.worst, max_ratio(rb.variance, mb.variance));
        ++r.cases;
        if (!exact_leq(rb.variance, mb.variance, n * mb.variance.maxCoeff())) ++r.failures;
      }
    }
  }
  return finish(r, 1.0, "V[rb_budgeted] / V[minibatch]");
}

double max_rel(const ParamVector& a, const ParamVector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

SuiteResult gradcheck_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "gradcheck";
  constexpr double tol = 1e-5;
  constexpr double h = 1e-5;
  Rng rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  auto record = [&](double err) {
    r.worst = std::max(r.worst, err);
    ++r.cases;
    if (!(err < tol)) ++r.failures;
  };

  // Simulated models shared by the model-level checks.
  GmmConfig gcfg;
  gcfg.components = 3;
  gcfg.observations = 8;
  Rng data_rng(derive_seed(opt.seed, 101));
  const GmmDataset gdata = gmm_simulate(gcfg, data_rng);
  const GmmModel gmm(gcfg, gdata.y, kmeans_init(gdata.y, gcfg.components, data_rng));
  NMixtureConfig ncfg;
  const NMixtureModel nmix(ncfg, nmixture_simulate(ncfg.n_true, ncfg.p, ncfg.count, data_rng));
  const EstimatorConfig exact{EstimatorKind::Exact};

  for (int point = 0; point < 10; ++point) {
    {  // softmax score
      const std::size_t K = 3 + uniform_index(rng, 8);
      ParamVector logits(static_cast<Eigen::Index>(K));
      for (auto& l : logits) l = 2.0 * normal(rng);
      const Atom z{uniform_index(rng, K)};
      const ParamVector fd = finite_diff_grad(
          [&](const ParamVector& x) { return SoftmaxCategorical(x).log_pmf(z); }, logits, h);
      record(max_rel(SoftmaxCategorical(logits).score(z), fd));
    }
    {  // Bernoulli-product score
      const ParamVector eta = ParamVector::Constant(1, uniform(-5.0, 5.0));
      const Atom z{uniform_index(rng, 8)};
      const ParamVector fd = finite_diff_grad(
          [&](const ParamVector& x) { return IndependentBernoulliProduct(x[0], 3).log_pmf(z); },
          eta, h);
      record(max_rel(IndependentBernoulliProduct(eta[0], 3).score(z), fd));
    }
    {  // negative-binomial score
      ParamVector theta(2);
      theta << uniform(-1.0, 3.0), uniform(-3.0, 2.0);
      const std::uint64_t shift = uniform_index(rng, 11);
      const Atom z{shift + uniform_index(rng, 31)};
      const ParamVector fd = finite_diff_grad(
          [&](const ParamVector& x) { return ShiftedNegativeBinomial(x[0], x[1], shift).log_pmf(z); },
          theta, h);
      record(max_rel(ShiftedNegativeBinomial(theta[0], theta[1], shift).score(z), fd));
    }
    {  // Bernoulli toy loss
      const ParamVector eta = ParamVector::Constant(1, uniform(-5.0, 5.0));
      const BernoulliToyModel toy;
      Rng unused(0);
      const ParamVector fd =
          finite_diff_grad([&](const ParamVector& x) { return toy.loss(x); }, eta, h);
      record(max_rel(toy.loss_gradient(eta, exact, unused).grad, fd));
    }
    {  // GMM: per-datum integrand gradient and full −ELBO gradient
      ParamVector params = gmm.initial_params();
      for (auto& x : params) x += 0.3 * normal(rng);
      const std::size_t n = uniform_index(rng, gcfg.observations);
      const Atom z{uniform_index(rng, gcfg.components)};
      const GmmDatumProblem p = gmm.datum_problem(params, n);
      const std::size_t K = gcfg.components, d = gcfg.dim;
      ParamVector local(static_cast<Eigen::Index>(K * d + K));
      local.head(static_cast<Eigen::Index>(K * d)) = params.head(static_cast<Eigen::Index>(K * d));
      local.tail(static_cast<Eigen::Index>(K)) =
          params.segment(static_cast<Eigen::Index>(K * d + n * K), static_cast<Eigen::Index>(K));
      const ParamVector fd_local = finite_diff_grad(
          [&](const ParamVector& x) {
            ParamVector full = params;
            full.head(static_cast<Eigen::Index>(K * d)) = x.head(static_cast<Eigen::Index>(K * d));
            full.segment(static_cast<Eigen::Index>(K * d + n * K), static_cast<Eigen::Index>(K)) =
                x.tail(static_cast<Eigen::Index>(K));
            return gmm.datum_problem(full, n).integrand.value(z);
          },
          local, h);
      record(max_rel(p.integrand.eval(z).grad, fd_local));

      Rng unused(0);
      const ParamVector fd =
          finite_diff_grad([&](const ParamVector& x) { return gmm.loss(x); }, params, h);
      record(max_rel(gmm.loss_gradient(params, exact, unused).grad, fd));
    }
    {  // N-mixture: integrand gradient and −ELBO gradient
      ParamVector theta(2);
      theta << uniform(0.0, 3.0), uniform(-2.0, 1.0);
      const auto prob = nmix.problem(theta);
      const Atom z{nmix.counts().max() + uniform_index(rng, 10)};
      const ParamVector fd_f = finite_diff_grad(
          [&](const ParamVector& x) { return nmix.problem(x)->integrand.value(z); }, theta, h);
      record(max_rel(prob->integrand.eval(z).grad, fd_f));

      Rng unused(0);
      const ParamVector fd =
          finite_diff_grad([&](const ParamVector& x) { return nmix.loss(x); }, theta, h);
      record(max_rel(nmix.loss_gradient(theta, exact, unused).grad, fd));
    }
  }
  return finish(r, tol, "relative error");
}

SuiteResult budget_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "budget";
  Rng rng(opt.seed);
  const std::size_t calls = 100 * opt.cases;
  for (std::size_t c = 0; c < calls; ++c) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t K = inst.dist.size();
    const BaseEstimator base = kBases[uniform_index(rng, 2)];
    std::size_t expected = 0, got = 0;
    switch (uniform_index(rng, 3)) {
      case 0: {
        const std::size_t k = uniform_index(rng, K + 1);
        got = rao_blackwellize(base, inst.dist, inst.integrand, k, rng).base_evals;
        expected = k < K ? k + 1 : k;
        break;
      }
      case 1: {
        const std::size_t n = 1 + uniform_index(rng, 8);
        got = minibatch(base, inst.dist, inst.integrand, n, rng).base_evals;
        expected = n;
        break;
      }
      default: {
        const std::size_t n = 1 + uniform_index(rng, 8);
        std::size_t k = uniform_index(rng, std::min(n, K) + 1);
        if (k == n && inst.dist.top_k(k).tail_mass > 0.0) --k;
        got = rb_budgeted(base, inst.dist, inst.integrand, n, k, rng).base_evals;
        expected = inst.dist.top_k(k).tail_mass > 0.0 ? n : k;
        break;
      }
    }
    ++r.cases;
    if (got != expected) {
      ++r.failures;
      r.worst = std::max(r.worst, std::abs(static_cast<double>(got) - static_cast<double>(expected)));
    }
  }
  return finish(r, 0.0, "|evals - expected|");
}

SuiteResult concentration_suite(const SuiteOptions& opt) {
  SuiteResult r;
  r.name = "concentration";
  std::ostringstream detail;
  auto ratio_at = [&](double eta) {
    const BernoulliProblem p = bernoulli_integrand(eta);
    const auto rows = variance_vs_k_sweep(p.dist, p.integrand, BaseEstimator::ReinforcePlus,
                                          {0, 1}, opt.draws, opt.seed);
    return rows[1].moments.total_variance / rows[0].moments.total_variance;
  };
  const double concentrated = ratio_at(-4.0);
  const double uniform = ratio_at(0.0);
  r.cases = 2;
  if (!(concentrated <= 0.06)) ++r.failures;
  if (!(uniform >= 0.7 && uniform <= 1.0)) ++r.failures;
  r.worst = concentrated;
  r.passed = r.failures == 0;
  detail << "ratio k=1/k=0 at eta=-4: " << fmt(concentrated) << " (<= 0.06), at eta=0: "
         << fmt(uniform) << " (in [0.7, 1.0])";
  r.detail = detail.str();
  return r;
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"unbiased", "triplet", "decomposition", "prop1", "prop1-empirical",
          "prop2",    "gradcheck", "budget",      "concentration"};
}

SuiteResult run_suite(const std::string& name, const SuiteOptions& options) {
  if (name == "unbiased") return unbiased_suite(options);
  if (name == "triplet") return triplet_suite(options);
  if (name == "decomposition") return decomposition_suite(options);
  if (name == "prop1") return prop1_suite(options);
  if (name == "prop1-empirical") return prop1_empirical_suite(options);
  if (name == "prop2") return prop2_suite(options);
  if (name == "gradcheck") return gradcheck_suite(options);
  if (name == "budget") return budget_suite(options);
  if (name == "concentration") return concentration_suite(options);
  throw DomainError("unknown diagnostic suite '" + name + "'");
}

}  // namespace rbgrad
