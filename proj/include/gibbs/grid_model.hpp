#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/numerics.hpp"
#include "gibbs/target_functions.hpp"

namespace gibbs {

/// Piecewise-constant model g on the regular N^d grid of [0,1]^d.
///
/// Cells are indexed row-major with axis 0 most significant. values()[i] is
/// g on cell i; the represented density is exp(values_i - L_g) on the cell,
/// where L_g = log((1/n) sum_i exp(values_i)). Points with a coordinate
/// exactly on a cell boundary belong to the lower-adjacent cell, and the
/// coordinate 1 to the last cell.
class GridApproximation {
 public:
  GridApproximation(std::size_t dim, std::size_t cells_per_axis, std::vector<double> values)
      : dim_(dim), cells_(cells_per_axis), values_(std::move(values)) {
    if (dim_ == 0 || cells_ == 0) throw PreconditionViolated("grid needs d >= 1 and N >= 1");
    if (values_.size() != checked_pow(cells_, dim_)) throw ShapeMismatch("grid values must have N^d entries");
    const double m = *std::max_element(values_.begin(), values_.end());
    if (!std::isfinite(m)) throw PreconditionViolated("grid values must be finite");
    cumulative_.resize(values_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      acc += std::exp(values_[i] - m);
      cumulative_[i] = acc;
    }
    log_partition_ = m + std::log(acc) - std::log(static_cast<double>(values_.size()));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t cells_per_axis() const noexcept { return cells_; }
  std::size_t cell_count() const noexcept { return values_.size(); }
  double cell_width() const noexcept { return 1.0 / static_cast<double>(cells_); }
  std::span<const double> values() const noexcept { return values_; }
  double log_partition() const noexcept { return log_partition_; }

  /// Cell containing x (lower-adjacent on boundaries, clamped into range).
  std::size_t cell_of(std::span<const double> x) const noexcept {
    std::size_t flat = 0;
    const double n = static_cast<double>(cells_);
    for (std::size_t j = 0; j < dim_; ++j) {
      const double t = std::floor(x[j] * n);
      std::size_t k = t <= 0.0 ? 0 : static_cast<std::size_t>(t);
      k = std::min(k, cells_ - 1);
      flat = flat * cells_ + k;
    }
    return flat;
  }

  double evaluate(std::span<const double> x) const noexcept { return values_[cell_of(x)]; }

  /// Multi-index of a flat cell index.
  void cell_index(std::size_t flat, std::span<std::size_t> out) const noexcept {
    for (std::size_t j = dim_; j-- > 0;) {
      out[j] = flat % cells_;
      flat /= cells_;
    }
  }

  /// Center of cell `flat`.
  Point cell_center(std::size_t flat) const {
    Point x(dim_);
    for (std::size_t j = dim_; j-- > 0;) {
      x[j] = (static_cast<double>(flat % cells_) + 0.5) / static_cast<double>(cells_);
      flat /= cells_;
    }
    return x;
  }

  /// Probability P_g(cell i).
  double cell_mass(std::size_t i) const noexcept {
    return std::exp(values_[i] - log_partition_) / static_cast<double>(values_.size());
  }

  /// Cell selected by a uniform u in [0,1): binary search over prefix sums.
  std::size_t select_cell(double u) const noexcept {
    const double target = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

  /// One exact P_g sample: one uniform picks the cell, d more place the
  /// point uniformly inside it. Returns the cell index.
  std::size_t sample(RandomStream& rng, std::span<double> out) const noexcept {
    const std::size_t cell = select_cell(rng.uniform());
    std::size_t rest = cell;
    const double n = static_cast<double>(cells_);
    for (std::size_t j = dim_; j-- > 0;) {
      const auto k = static_cast<double>(rest % cells_);
      rest /= cells_;
      out[j] = (k + rng.uniform()) / n;
    }
    return cell;
  }

  Point sample(RandomStream& rng) const {
    Point x(dim_);
    sample(rng, x);
    return x;
  }

 private:
  std::size_t dim_;
  std::size_t cells_;
  std::vector<double> values_;
  std::vector<double> cumulative_;
  double log_partition_ = 0.0;
};

/// Interpolates f at the N^d cell centers, charging N^d evaluations to
/// `budget` before evaluating anything.
inline GridApproximation build_grid(const TargetFunction& f, std::size_t cells_per_axis, EvaluationBudget& budget) {
  if (cells_per_axis == 0) throw PreconditionViolated("build_grid: N must be >= 1");
  const std::size_t d = f.dim();
  const std::uint64_t n = checked_pow(cells_per_axis, d);
  budget.charge(n);
  std::vector<double> values(n);
  std::vector<std::size_t> idx(d, 0);
  Point x(d);
  const double inv = 1.0 / static_cast<double>(cells_per_axis);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = (static_cast<double>(idx[j]) + 0.5) * inv;
    values[i] = f(x);
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < cells_per_axis) break;
      idx[j] = 0;
    }
  }
  return GridApproximation(d, cells_per_axis, std::move(values));
}

inline GridApproximation build_grid(const TargetFunction& f, std::size_t cells_per_axis) {
  EvaluationBudget unlimited(std::numeric_limits<std::uint64_t>::max());
  return build_grid(f, cells_per_axis, unlimited);
}

/// Grid whose cell masses are the exact P_f masses of the N^d cells, for
/// affine f: values_i = log(n * integral of exp(f) over cell i).
inline GridApproximation cell_mass_grid(const TargetFunction& f, std::size_t cells_per_axis) {
  if (!f.affine()) throw MissingOracle("exact cell masses need an affine target: " + f.label());
  const AffineForm& form = *f.affine();
  const std::size_t d = f.dim();
  const std::uint64_t n = checked_pow(cells_per_axis, d);
  const double h = 1.0 / static_cast<double>(cells_per_axis);
  // Per-axis contributions, then summed over the multi-index.
  std::vector<std::vector<double>> axis(d, std::vector<double>(cells_per_axis));
  for (std::size_t j = 0; j < d; ++j) {
    const double s = form.slopes[j];
    for (std::size_t k = 0; k < cells_per_axis; ++k)
      axis[j][k] = s * static_cast<double>(k) * h + log_partition_affine_1d(s * h);
  }
  std::vector<double> values(n);
  std::vector<std::size_t> idx(d, 0);
  for (std::uint64_t i = 0; i < n; ++i) {
    double v = form.offset;
    for (std::size_t j = 0; j < d; ++j) v += axis[j][idx[j]];
    values[i] = v;
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < cells_per_axis) break;
      idx[j] = 0;
    }
  }
  return GridApproximation(d, cells_per_axis, std::move(values));
}

/// Upper bound on M_{f-g} = sup_x (f(x) - g(x)) for a grid g.
struct DeviationBound {
  double value = 0.0;
  bool exact = false;
};

/// Affine f: sum_k |s_k| h / 2 plus the largest center mismatch, exact.
/// Otherwise: maximum over a sub-lattice of every cell (about 10^6 points in
/// total, cell boundaries included) plus the Lipschitz slack
/// |f|_1 * sqrt(d) * spacing / 2, which keeps the result an upper bound.
inline DeviationBound max_deviation_above(const TargetFunction& f, const GridApproximation& g,
                                          std::size_t lattice_points = 1'000'000) {
  const std::size_t d = f.dim();
  if (d != g.dim()) throw ShapeMismatch("max_deviation_above: dimension mismatch");
  const double h = g.cell_width();
  if (f.affine()) {
    double half_range = 0.0;
    for (double s : f.affine()->slopes) half_range += std::abs(s) * h / 2.0;
    double center_gap = -kInf;
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      const Point c = g.cell_center(i);
      center_gap = std::max(center_gap, (*f.affine())(c) - g.values()[i]);
    }
    return {center_gap + half_range, true};
  }
  const double per_cell = static_cast<double>(lattice_points) / static_cast<double>(g.cell_count());
  const auto k = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(std::pow(per_cell, 1.0 / double(d)))));
  const double spacing = h / static_cast<double>(k - 1);
  std::vector<std::size_t> cell_idx(d), sub(d);
  Point x(d);
  double best = -kInf;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    g.cell_index(i, cell_idx);
    std::fill(sub.begin(), sub.end(), 0);
    for (bool more = true; more;) {
      for (std::size_t j = 0; j < d; ++j)
        x[j] = std::min(1.0, static_cast<double>(cell_idx[j]) * h + static_cast<double>(sub[j]) * spacing);
      best = std::max(best, f(x) - g.values()[i]);
      more = false;
      for (std::size_t j = d; j-- > 0;) {
        if (++sub[j] < k) {
          more = true;
          break;
        }
        sub[j] = 0;
      }
    }
  }
  return {best + f.lipschitz() * std::sqrt(static_cast<double>(d)) * spacing / 2.0, false};
}

}  // namespace gibbs
