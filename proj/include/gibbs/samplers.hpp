#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/grid_model.hpp"
#include "gibbs/log_partition.hpp"
#include "gibbs/numerics.hpp"
#include "gibbs/quadrature.hpp"
#include "gibbs/target_functions.hpp"

namespace gibbs {

struct SamplerOutcome {
  Point point;
  /// 1-based round at which a rejection sampler accepted; empty after a
  /// fallback and for non-rejection samplers.
  std::optional<std::uint64_t> accepted_at;
  std::uint64_t evals_used = 0;
  /// True iff every rejection round failed and the point came from P_g.
  bool fell_back = false;
};

// ---------------------------------------------------------------------------
// Rejection sampling

/// A proposal P_g that can be sampled exactly and whose log-density g can be
/// evaluated pointwise (up to the common normalization).
template <class P>
concept Proposal = requires(const P& p, RandomStream& rng, std::span<double> out, std::span<const double> x) {
  { p.dim() } -> std::convertible_to<std::size_t>;
  p.sample(rng, out);
  { p.envelope(x) } -> std::convertible_to<double>;
};

/// g == level on the cube, sampled uniformly.
struct ConstantEnvelope {
  std::size_t dimension;
  double level;

  std::size_t dim() const noexcept { return dimension; }
  void sample(RandomStream& rng, std::span<double> out) const noexcept { rng.fill_uniform(out); }
  double envelope(std::span<const double>) const noexcept { return level; }
};

/// g = grid model + shift.
struct GridEnvelope {
  const GridApproximation* grid;
  double shift = 0.0;

  std::size_t dim() const noexcept { return grid->dim(); }
  void sample(RandomStream& rng, std::span<double> out) const noexcept { grid->sample(rng, out); }
  double envelope(std::span<const double> x) const noexcept { return grid->evaluate(x) + shift; }
};

/// Slack allowed when checking f <= g, relative to |g|.
inline double envelope_tolerance(double g) { return 1e-12 * std::max(1.0, std::abs(g)); }

/// Budgeted rejection sampling: at most n rounds of "x ~ P_g, u ~ U[0,1),
/// accept if log u + g(x) <= f(x)", then one fresh P_g draw as fallback.
/// Each round costs one evaluation of f; the fallback costs none.
template <Proposal P>
SamplerOutcome rejection_sampling(const TargetFunction& f, const P& g, std::uint64_t n, RandomStream& rng) {
  if (g.dim() != f.dim()) throw ShapeMismatch("rejection_sampling: proposal dimension mismatch");
  Point x(f.dim());
  for (std::uint64_t round = 1; round <= n; ++round) {
    g.sample(rng, x);
    const double u = rng.uniform();
    const double fx = f(x);
    const double gx = g.envelope(x);
    if (fx > gx + envelope_tolerance(gx))
      throw EnvelopeViolation("rejection_sampling: f(x) = " + format_param(fx) + " exceeds envelope " + format_param(gx));
    if (std::log(u) + gx <= fx) return {std::move(x), round, round, false};
  }
  g.sample(rng, x);
  return {std::move(x), std::nullopt, n, true};
}

/// Rejection sampling from the uniform proposal with the exact maximum M_f
/// as constant envelope.
inline SamplerOutcome uniform_rejection_sampling(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  if (!f.exact_max()) throw MissingOracle("uniform_rejection_sampling needs the exact maximum of " + f.label());
  return rejection_sampling(f, ConstantEnvelope{f.dim(), *f.exact_max()}, n, rng);
}

// ---------------------------------------------------------------------------
// Self-normalized selection among stochastic points

/// Picks index i with probability exp(w_i) / sum_j exp(w_j): uniformly
/// proposed indices are accepted when log u <= w_i - max_j w_j. Exact; the
/// expected number of proposals is 1 / mean_i exp(w_i - max w) <= n.
inline std::size_t softmax_select(std::span<const double> log_weights, RandomStream& rng) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m)) throw PreconditionViolated("softmax_select: non-finite log-weights");
  for (;;) {
    const std::size_t i = rng.below(log_weights.size());
    if (std::log(rng.uniform()) <= log_weights[i] - m) return i;
  }
}

/// Monte Carlo sampling: n uniform points, return X_I with
/// P(I = i) proportional to exp(f(X_i)). Costs exactly n evaluations.
inline SamplerOutcome mc_sampling(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  if (n == 0) throw PreconditionViolated("mc_sampling: n must be >= 1");
  const std::size_t d = f.dim();
  // Scratch reused across calls on the same thread.
  thread_local std::vector<double> points, logw;
  points.resize(n * d);
  logw.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::span<double> x(points.data() + i * d, d);
    rng.fill_uniform(x);
    logw[i] = f(x);
  }
  const std::size_t pick = softmax_select(std::span<const double>(logw.data(), logw.size()), rng);
  Point out(points.begin() + static_cast<std::ptrdiff_t>(pick * d),
            points.begin() + static_cast<std::ptrdiff_t>((pick + 1) * d));
  return {std::move(out), std::nullopt, n, false};
}

// ---------------------------------------------------------------------------
// Grid-based samplers. Their grid is deterministic (cell centers), so one
// instance can serve many samples; evals_used still reports the per-sample
// cost of the algorithm as if the grid were rebuilt for each sample, except
// for PcSampler whose samples share the same evaluations.

/// Exact sampling from the grid model with N = floor(n^(1/d)).
class PcSampler {
 public:
  PcSampler(const TargetFunction& f, std::uint64_t n) : grid_(build_grid(f, integer_root(n, f.dim()))) {
    if (n == 0) throw PreconditionViolated("pc sampler: n must be >= 1");
  }
  const GridApproximation& grid() const noexcept { return grid_; }
  SamplerOutcome operator()(RandomStream& rng) const { return {grid_.sample(rng), std::nullopt, grid_.cell_count(), false}; }

 private:
  GridApproximation grid_;
};

/// Grid model from floor(n/2) evaluations, n - N^d proposals from P_g and a
/// softmax selection on f - g.
class PcMcSampler {
 public:
  PcMcSampler(const TargetFunction& f, std::uint64_t n) : f_(f), n_(n), grid_(make_grid(f, n)) {}

  const GridApproximation& grid() const noexcept { return grid_; }
  std::uint64_t proposals() const noexcept { return n_ - grid_.cell_count(); }

  SamplerOutcome operator()(RandomStream& rng) const {
    const std::size_t d = f_.dim();
    const std::uint64_t m = proposals();
    thread_local std::vector<double> points, logw;
    points.resize(m * d);
    logw.resize(m);
    for (std::uint64_t i = 0; i < m; ++i) {
      std::span<double> x(points.data() + i * d, d);
      const std::size_t cell = grid_.sample(rng, x);
      logw[i] = f_(x) - grid_.values()[cell];
    }
    const std::size_t pick = softmax_select(std::span<const double>(logw.data(), logw.size()), rng);
    Point out(points.begin() + static_cast<std::ptrdiff_t>(pick * d),
              points.begin() + static_cast<std::ptrdiff_t>((pick + 1) * d));
    return {std::move(out), std::nullopt, n_, false};
  }

 private:
  static GridApproximation make_grid(const TargetFunction& f, std::uint64_t n) {
    if (n < 2) throw PreconditionViolated("pc+mc sampler: n must be >= 2");
    return build_grid(f, integer_root(n / 2, f.dim()));
  }

  TargetFunction f_;
  std::uint64_t n_;
  GridApproximation grid_;
};

/// Grid model from floor(n/2) evaluations, then ceil(n/2) rounds of rejection
/// sampling with envelope g + M_{f-g}.
class PcRsSampler {
 public:
  PcRsSampler(const TargetFunction& f, std::uint64_t n)
      : f_(f), rounds_((n + 1) / 2), grid_(make_grid(f, n)), deviation_(max_deviation_above(f, grid_)) {}

  const GridApproximation& grid() const noexcept { return grid_; }
  /// M_{f-g}, and whether it is exact (closed form) or a certified bound.
  DeviationBound deviation() const noexcept { return deviation_; }
  std::uint64_t rounds() const noexcept { return rounds_; }

  SamplerOutcome operator()(RandomStream& rng) const {
    auto out = rejection_sampling(f_, GridEnvelope{&grid_, deviation_.value}, rounds_, rng);
    out.evals_used += grid_.cell_count();
    return out;
  }

 private:
  static GridApproximation make_grid(const TargetFunction& f, std::uint64_t n) {
    if (n < 2) throw PreconditionViolated("pc+rs sampler: n must be >= 2");
    return build_grid(f, integer_root(n / 2, f.dim()));
  }

  TargetFunction f_;
  std::uint64_t rounds_;
  GridApproximation grid_;
  DeviationBound deviation_;
};

inline SamplerOutcome pc_sampling(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  return PcSampler(f, n)(rng);
}
inline SamplerOutcome pc_mc_sampler(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  return PcMcSampler(f, n)(rng);
}
inline SamplerOutcome pc_rs_sampler(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  return PcRsSampler(f, n)(rng);
}

// ---------------------------------------------------------------------------
// Bisection sampling

/// Axis-aligned box prod_j [lower_j, lower_j + size_j] inside [0,1]^d.
struct Hyperrectangle {
  Point lower;
  Point size;

  static Hyperrectangle unit(std::size_t d) { return {Point(d, 0.0), Point(d, 1.0)}; }

  std::size_t dim() const noexcept { return lower.size(); }

  /// The two halves along `axis`: first the lower, then the upper one.
  std::pair<Hyperrectangle, Hyperrectangle> split(std::size_t axis) const {
    Hyperrectangle lo = *this, hi = *this;
    lo.size[axis] = hi.size[axis] = size[axis] / 2.0;
    hi.lower[axis] = lower[axis] + lo.size[axis];
    return {std::move(lo), std::move(hi)};
  }

  /// z + h * x for x in the unit cube.
  void map(std::span<const double> x, std::span<double> out) const noexcept {
    for (std::size_t j = 0; j < lower.size(); ++j) out[j] = lower[j] + size[j] * x[j];
  }

  Point sample_uniform(RandomStream& rng) const {
    Point x(dim());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = lower[j] + size[j] * rng.uniform();
    return x;
  }
};

/// f_Z(x) = f(z_1 + h_1 x_1, ..., z_d + h_d x_d), a function on the unit cube.
inline TargetFunction rescaled(const TargetFunction& f, const Hyperrectangle& box) {
  if (box.dim() != f.dim()) throw ShapeMismatch("rescaled: box dimension mismatch");
  auto eval = [f, box](std::span<const double> x) {
    const std::size_t d = box.dim();
    if (d <= 8) {
      std::array<double, 8> y;
      box.map(x, std::span<double>(y.data(), d));
      return f(std::span<const double>(y.data(), d));
    }
    Point y(d);
    box.map(x, y);
    return f(y);
  };
  TargetFunction g(f.dim(), std::move(eval), f.label() + "|box");
  if (f.affine()) {
    AffineForm form = *f.affine();
    for (std::size_t j = 0; j < form.slopes.size(); ++j) {
      form.offset += form.slopes[j] * box.lower[j];
      form.slopes[j] *= box.size[j];
    }
    return g.with_affine(std::move(form));
  }
  const double hmax = *std::max_element(box.size.begin(), box.size.end());
  g = g.with_lipschitz(f.lipschitz() * hmax, f.lipschitz_kind() == BoundKind::exact ? BoundKind::upper_bound : f.lipschitz_kind());
  if (f.cm_bound()) {
    CmBound b = *f.cm_bound();
    if (b.kind == BoundKind::exact) b.kind = BoundKind::upper_bound;
    g = g.with_cm_bound(b);
  }
  return g;
}

/// Log-partition algorithm handed to bisection sampling.
using LogPartitionOracle = std::function<LogPartitionEstimate(const TargetFunction&, RandomStream&)>;

/// Closed-form oracle; zero evaluations per call.
inline LogPartitionOracle exact_oracle() {
  return [](const TargetFunction& g, RandomStream&) {
    if (!g.exact_log_partition()) throw MissingOracle("exact oracle: no closed-form log-partition for " + g.label());
    return LogPartitionEstimate{*g.exact_log_partition(), 0, 0, "exact"};
  };
}

/// One of the estimators ("mc", "pc", "pc+mc", "ti") with a per-call budget.
inline LogPartitionOracle estimator_oracle(std::string algorithm, std::uint64_t budget_per_call) {
  return [algorithm = std::move(algorithm), budget_per_call](const TargetFunction& g, RandomStream& rng) {
    return estimate_log_partition(algorithm, g, budget_per_call, rng);
  };
}

/// M rounds of d axis splits; each split keeps the lower half with
/// probability sigmoid(L(f_Z1) - L(f_Z2)); the point is finally drawn
/// uniformly from the remaining box. Uses 2 M d oracle calls.
inline SamplerOutcome bisection_sampling(const TargetFunction& f, const LogPartitionOracle& oracle, std::size_t rounds,
                                         RandomStream& rng) {
  const std::size_t d = f.dim();
  Hyperrectangle box = Hyperrectangle::unit(d);
  std::uint64_t evals = 0;
  for (std::size_t i = 0; i < rounds; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      auto [lo, hi] = box.split(j);
      const auto l1 = oracle(rescaled(f, lo), rng);
      const auto l2 = oracle(rescaled(f, hi), rng);
      evals += l1.evals_used + l2.evals_used;
      const double p1 = sigmoid(l1.value - l2.value);
      box = rng.uniform() < p1 ? std::move(lo) : std::move(hi);
    }
  }
  return {box.sample_uniform(rng), std::nullopt, evals, false};
}

/// Budget split for bisection on top of the grid estimator: the largest M
/// with 2^(M d) <= N_o, where N_o = floor(n / (2 M d)) is the per-call budget.
struct BisectionPlan {
  std::size_t rounds = 0;
  std::uint64_t budget_per_call = 0;
};

inline BisectionPlan plan_bisection(std::uint64_t n, std::size_t d) {
  BisectionPlan best{0, 0};
  for (std::size_t m = 1; m * d < 63; ++m) {
    const std::uint64_t per_call = n / (2 * m * d);
    if (per_call == 0 || (std::uint64_t{1} << (m * d)) > per_call) break;
    best = {m, per_call};
  }
  if (best.rounds == 0) throw PreconditionViolated("bisection needs n >= 4 d 2^d to afford one round");
  return best;
}

// ---------------------------------------------------------------------------
// Exact sampling with known normalization

/// Exact P_f sampling for L_f = 0 and ||f||_inf <= log(3/2): one round of
/// rejection of f~ = log(2 e^f - 1) against g = log 2, falling back to a
/// fresh uniform draw. The round accepts with probability exactly 1/2, so the
/// output law is P_f~/2 + U/2 = P_f. Costs one evaluation.
inline SamplerOutcome exact_sampler_known_Z(const TargetFunction& f, RandomStream& rng) {
  const double limit = std::log(1.5) + 1e-12;
  if (f.exact_log_partition() && std::abs(*f.exact_log_partition()) > 1e-9)
    throw PreconditionViolated("exact_sampler_known_Z: L_f must be 0, got " + format_param(*f.exact_log_partition()));
  if (f.exact_max() && *f.exact_max() > limit)
    throw PreconditionViolated("exact_sampler_known_Z: sup f exceeds log(3/2)");
  Point x(f.dim());
  rng.fill_uniform(x);
  const double u = rng.uniform();
  const double fx = f(x);
  if (std::abs(fx) > limit) throw PreconditionViolated("exact_sampler_known_Z: |f(x)| exceeds log(3/2)");
  const double ftilde = std::log(2.0 * std::exp(fx) - 1.0);
  if (std::log(u) + std::numbers::ln2 <= ftilde) return {std::move(x), 1, 1, false};
  rng.fill_uniform(x);
  return {std::move(x), std::nullopt, 1, true};
}

// ---------------------------------------------------------------------------
// Registry

/// A configured sampler: one call draws one point. Grid-based samplers share
/// their grid between calls; an instance must not be called concurrently.
using Sampler = std::function<SamplerOutcome(RandomStream&)>;

inline const std::vector<std::string>& sampler_ids() {
  static const std::vector<std::string> ids{"pc", "mc", "rs", "pc+mc", "pc+rs", "bisect", "exactZ"};
  return ids;
}

/// Builds sampler `id` for f under a per-sample budget n. "bisect" runs the
/// grid estimator as its oracle (see plan_bisection); "exactZ" samples
/// f - L_f, with L_f from reference_log_partition, and ignores n.
inline Sampler make_sampler(const std::string& id, const TargetFunction& f, std::uint64_t n) {
  if (id == "pc") {
    auto s = std::make_shared<const PcSampler>(f, n);
    return [s](RandomStream& rng) { return (*s)(rng); };
  }
  if (id == "mc") {
    if (n == 0) throw PreconditionViolated("mc sampler: n must be >= 1");
    return [f, n](RandomStream& rng) { return mc_sampling(f, n, rng); };
  }
  if (id == "rs") {
    if (!f.exact_max()) throw MissingOracle("rs needs the exact maximum of " + f.label());
    return [f, n](RandomStream& rng) { return uniform_rejection_sampling(f, n, rng); };
  }
  if (id == "pc+mc") {
    auto s = std::make_shared<const PcMcSampler>(f, n);
    return [s](RandomStream& rng) { return (*s)(rng); };
  }
  if (id == "pc+rs") {
    auto s = std::make_shared<const PcRsSampler>(f, n);
    return [s](RandomStream& rng) { return (*s)(rng); };
  }
  if (id == "bisect") {
    const BisectionPlan plan = plan_bisection(n, f.dim());
    auto oracle = estimator_oracle("pc", plan.budget_per_call);
    return [f, oracle, plan](RandomStream& rng) { return bisection_sampling(f, oracle, plan.rounds, rng); };
  }
  if (id == "exactZ") {
    const TargetFunction normalized = shifted(f, -reference_log_partition(f));
    return [normalized](RandomStream& rng) { return exact_sampler_known_Z(normalized, rng); };
  }
  throw UsageError("unknown sampler '" + id + "'");
}

}  // namespace gibbs
