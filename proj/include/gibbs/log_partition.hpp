#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/grid_model.hpp"
#include "gibbs/numerics.hpp"
#include "gibbs/target_functions.hpp"

namespace gibbs {

struct LogPartitionEstimate {
  double value = 0.0;
  std::uint64_t evals_used = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
};

/// Plain Monte Carlo: log((1/n) sum_i exp(f(X_i))), X_i uniform on the cube.
inline LogPartitionEstimate mc_log_partition(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  if (n == 0) throw PreconditionViolated("mc_log_partition: n must be >= 1");
  EvaluationBudget budget(n);
  const std::size_t d = f.dim();
  std::vector<double> fx(n);
  Point x(d);
  for (auto& v : fx) {
    rng.fill_uniform(x);
    budget.charge(1);
    v = f(x);
  }
  return {log_mean_exp(fx), budget.used(), rng.seed(), "mc"};
}

/// Log-partition of the piecewise-constant interpolant on the largest grid
/// with N^d <= n points; uses exactly N^d evaluations.
inline LogPartitionEstimate pc_log_partition(const TargetFunction& f, std::uint64_t n) {
  const std::uint64_t cells = integer_root(n, f.dim());
  if (cells == 0) throw PreconditionViolated("pc_log_partition: n must be >= 1");
  EvaluationBudget budget(n);
  const auto grid = build_grid(f, cells, budget);
  return {grid.log_partition(), budget.used(), 0, "pc"};
}

/// Importance sampling on top of a grid model g:
///   L_f = L_g + log E_{x ~ P_g}[exp(f(x) - g(x))].
/// The grid gets N = floor((n/2)^(1/d)) cells per axis, the remaining
/// n - N^d evaluations go to the Monte Carlo correction.
inline LogPartitionEstimate pc_mc_log_partition(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  if (n < 2) throw PreconditionViolated("pc_mc_log_partition: n must be >= 2");
  EvaluationBudget budget(n);
  const auto grid = build_grid(f, integer_root(n / 2, f.dim()), budget);
  const std::uint64_t m = budget.remaining();
  std::vector<double> ratio(m);
  Point x(f.dim());
  for (auto& v : ratio) {
    const std::size_t cell = grid.sample(rng, x);
    budget.charge(1);
    v = f(x) - grid.values()[cell];
  }
  return {grid.log_partition() + log_mean_exp(ratio), budget.used(), rng.seed(), "pc+mc"};
}

/// Draws one sample of P_{beta f} and reports the evaluations it cost.
struct TemperedDraw {
  Point point;
  std::uint64_t evals_used = 0;
};
using TemperedSampler = std::function<TemperedDraw(double beta, RandomStream&)>;

/// Exact P_{beta f} sampler from the affine closed form of f.
inline TemperedSampler exact_tempered_sampler(const TargetFunction& f) {
  if (!f.affine()) throw MissingOracle("exact tempered sampling needs an affine target: " + f.label());
  return [slopes = f.affine()->slopes](double beta, RandomStream& rng) {
    TemperedDraw draw{Point(slopes.size()), 0};
    for (std::size_t k = 0; k < slopes.size(); ++k) draw.point[k] = affine_inverse_cdf(beta * slopes[k], rng.uniform());
    return draw;
  };
}

/// Thermodynamic integration with Monte Carlo over the temperature:
/// beta_i ~ U[0,1], X_i ~ P_{beta_i f}, estimate (1/N) sum_i f(X_i).
/// Uses N evaluations of f plus whatever the sampler spends.
inline LogPartitionEstimate thermodynamic_integration(const TargetFunction& f, const TemperedSampler& sampler,
                                                      std::uint64_t samples, RandomStream& rng) {
  if (samples == 0) throw PreconditionViolated("thermodynamic_integration: N must be >= 1");
  CompensatedSum sum;
  std::uint64_t evals = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double beta = rng.uniform();
    const TemperedDraw draw = sampler(beta, rng);
    evals += draw.evals_used + 1;
    sum.add(f(draw.point));
  }
  return {sum.value() / static_cast<double>(samples), evals, rng.seed(), "ti"};
}

/// Thermodynamic integration under a total budget n, driven by the exact
/// tempered sampler of an affine target: every evaluation feeds the average.
inline LogPartitionEstimate ti_log_partition(const TargetFunction& f, std::uint64_t n, RandomStream& rng) {
  if (n == 0) throw PreconditionViolated("ti_log_partition: n must be >= 1");
  return thermodynamic_integration(f, exact_tempered_sampler(f), n, rng);
}

enum class Regime { optimization, quadrature };

inline const char* to_string(Regime r) { return r == Regime::optimization ? "optimization" : "quadrature"; }

struct RegimeBound {
  Regime regime;
  double bound;
};

/// High-probability (1 - delta) error bound of Monte Carlo log-partition for
/// a Lipschitz f. The quadrature branch applies from
/// n >= 4 log(2/delta) (1 + 3 |f|_1 / sqrt(d))^d on.
inline RegimeBound mc_error_bound(double delta, double lipschitz, std::size_t d, std::uint64_t n) {
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionViolated("mc_error_bound: delta must lie in (0, 1]");
  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  const double a = 1.0 + 3.0 * lipschitz / std::sqrt(dd);
  const double log2d = std::log(2.0 / delta);
  const double threshold = 4.0 * log2d * std::pow(a, dd);
  if (nn >= threshold) return {Regime::quadrature, 4.0 * std::sqrt(log2d) * std::pow(a, dd / 2.0) / std::sqrt(nn)};
  const double bound = std::sqrt(dd) * std::pow(std::log(1.0 / delta), 1.0 / dd) * lipschitz * std::pow(nn, -1.0 / dd) +
                       std::log(4.0 * log2d) + dd * std::log(a);
  return {Regime::optimization, bound};
}

/// Identifiers accepted by estimate_log_partition.
inline const std::vector<std::string>& log_partition_algorithms() {
  static const std::vector<std::string> ids{"mc", "pc", "pc+mc", "ti"};
  return ids;
}

inline LogPartitionEstimate estimate_log_partition(const std::string& algorithm, const TargetFunction& f,
                                                   std::uint64_t n, RandomStream& rng) {
  if (algorithm == "mc") return mc_log_partition(f, n, rng);
  if (algorithm == "pc") return pc_log_partition(f, n);
  if (algorithm == "pc+mc") return pc_mc_log_partition(f, n, rng);
  if (algorithm == "ti") return ti_log_partition(f, n, rng);
  throw UsageError("unknown log-partition algorithm '" + algorithm + "'");
}

}  // namespace gibbs
