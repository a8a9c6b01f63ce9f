#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/grid_model.hpp"
#include "gibbs/numerics.hpp"

namespace gibbs {

/// N points of [0,1]^d stored row-major (point i at coords[i*d .. i*d+d)).
class EmpiricalBatch {
 public:
  EmpiricalBatch(std::size_t dim, std::vector<double> coords, std::string label = {})
      : dim_(dim), coords_(std::move(coords)), label_(std::move(label)) {
    if (dim_ == 0) throw PreconditionViolated("EmpiricalBatch: d must be >= 1");
    if (coords_.empty() || coords_.size() % dim_ != 0)
      throw ShapeMismatch("EmpiricalBatch: coordinate count must be a positive multiple of d");
    for (double c : coords_)
      if (!(c >= 0.0 && c <= 1.0)) throw PreconditionViolated("EmpiricalBatch: coordinate outside [0,1]");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return coords_.size() / dim_; }
  const std::string& label() const noexcept { return label_; }
  std::span<const double> coords() const noexcept { return coords_; }
  std::span<const double> point(std::size_t i) const noexcept { return {coords_.data() + i * dim_, dim_}; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
  std::string label_;
};

namespace detail {

inline constexpr std::size_t kLanes = 16;
inline constexpr std::size_t kChunk = 2048;

// Sum over j in [begin, end) of the Euclidean distance between `a` and
// column point j. Distances are formed in single precision, lanes flush to
// double every kChunk columns; the order is fixed, so the result is too.
template <std::size_t D>
double row_distance_sum(const float* a, const float* const* cols, std::size_t begin, std::size_t end) {
  double total = 0.0;
  std::size_t j = begin;
  while (end - j >= kLanes) {
    const std::size_t stop = j + std::min((end - j) / kLanes * kLanes, kChunk);
    float acc[kLanes] = {};
    for (; j < stop; j += kLanes) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        float s = 0.0f;
        for (std::size_t k = 0; k < D; ++k) {
          const float t = cols[k][j + l] - a[k];
          s += t * t;
        }
        acc[l] += std::sqrt(s);
      }
    }
    double chunk = 0.0;
    for (float v : acc) chunk += v;
    total += chunk;
  }
  for (; j < end; ++j) {
    float s = 0.0f;
    for (std::size_t k = 0; k < D; ++k) {
      const float t = cols[k][j] - a[k];
      s += t * t;
    }
    total += std::sqrt(s);
  }
  return total;
}

inline double row_distance_sum_any(std::size_t d, const float* a, const float* const* cols, std::size_t begin,
                                   std::size_t end) {
  switch (d) {
    case 1: return row_distance_sum<1>(a, cols, begin, end);
    case 2: return row_distance_sum<2>(a, cols, begin, end);
    case 3: return row_distance_sum<3>(a, cols, begin, end);
    case 4: return row_distance_sum<4>(a, cols, begin, end);
    default: break;
  }
  double total = 0.0;
  for (std::size_t j = begin; j < end; ++j) {
    float s = 0.0f;
    for (std::size_t k = 0; k < d; ++k) {
      const float t = cols[k][j] - a[k];
      s += t * t;
    }
    total += std::sqrt(s);
  }
  return total;
}

}  // namespace detail

/// Batch laid out for the energy-distance kernels: sorted coordinates in
/// d = 1, single-precision columns otherwise. The within-batch distance sum
/// is computed once and cached.
class PreparedBatch {
 public:
  explicit PreparedBatch(const EmpiricalBatch& batch) : dim_(batch.dim()), size_(batch.size()) {
    if (dim_ == 1) {
      sorted_.assign(batch.coords().begin(), batch.coords().end());
      std::sort(sorted_.begin(), sorted_.end());
    } else {
      columns_.assign(dim_, std::vector<float>(size_));
      for (std::size_t i = 0; i < size_; ++i)
        for (std::size_t k = 0; k < dim_; ++k) columns_[k][i] = static_cast<float>(batch.point(i)[k]);
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return size_; }
  std::span<const double> sorted() const noexcept { return sorted_; }

  /// Sum over all ordered pairs (i, j) of ||x_i - y_j||, d > 1.
  double cross_sum(const PreparedBatch& other) const {
    if (other.dim_ != dim_) throw ShapeMismatch("cross_sum: dimension mismatch");
    const auto cols = other.column_pointers();
    std::vector<double> rows(size_);
    parallel_for(blocks(size_), [&](std::size_t b) {
      std::vector<float> a(dim_);
      for (std::size_t i = b * kBlock; i < std::min(size_, (b + 1) * kBlock); ++i) {
        for (std::size_t k = 0; k < dim_; ++k) a[k] = columns_[k][i];
        rows[i] = detail::row_distance_sum_any(dim_, a.data(), cols.data(), 0, other.size_);
      }
    });
    return ordered_sum(rows);
  }

  /// Sum over all ordered pairs within the batch, d > 1. Cached.
  double self_sum() const {
    if (!self_sum_) {
      const auto cols = column_pointers();
      std::vector<double> rows(size_);
      parallel_for(blocks(size_), [&](std::size_t b) {
        std::vector<float> a(dim_);
        for (std::size_t i = b * kBlock; i < std::min(size_, (b + 1) * kBlock); ++i) {
          for (std::size_t k = 0; k < dim_; ++k) a[k] = columns_[k][i];
          rows[i] = detail::row_distance_sum_any(dim_, a.data(), cols.data(), i + 1, size_);
        }
      });
      self_sum_ = 2.0 * ordered_sum(rows);
    }
    return *self_sum_;
  }

  /// Strict total order on batches, used to make two-batch sums symmetric.
  bool precedes(const PreparedBatch& other) const {
    if (size_ != other.size_) return size_ < other.size_;
    if (sorted_ != other.sorted_) return sorted_ < other.sorted_;
    return columns_ < other.columns_;
  }

  bool same_points(const PreparedBatch& other) const {
    return dim_ == other.dim_ && size_ == other.size_ && sorted_ == other.sorted_ && columns_ == other.columns_;
  }

 private:
  static constexpr std::size_t kBlock = 64;
  static std::size_t blocks(std::size_t n) { return (n + kBlock - 1) / kBlock; }

  static double ordered_sum(std::span<const double> rows) {
    CompensatedSum s;
    for (double r : rows) s.add(r);
    return s.value();
  }

  std::vector<const float*> column_pointers() const {
    std::vector<const float*> p;
    for (const auto& c : columns_) p.push_back(c.data());
    return p;
  }

  std::size_t dim_;
  std::size_t size_;
  std::vector<double> sorted_;
  std::vector<std::vector<float>> columns_;
  mutable std::optional<double> self_sum_;
};

namespace detail {

// Walks the pooled order of two sorted samples and calls
// visit(width, i, j) for every gap between consecutive pooled values, where
// i and j count the points of each sample at or below the gap's left end.
template <class Visit>
void walk_cdf_gaps(std::span<const double> xs, std::span<const double> ys, Visit&& visit) {
  std::size_t i = 0, j = 0;
  double t = std::min(xs.front(), ys.front());
  while (i < xs.size() || j < ys.size()) {
    while (i < xs.size() && xs[i] <= t) ++i;
    while (j < ys.size() && ys[j] <= t) ++j;
    if (i == xs.size() && j == ys.size()) break;
    const double next = std::min(i < xs.size() ? xs[i] : kInf, j < ys.size() ? ys[j] : kInf);
    visit(next - t, i, j);
    t = next;
  }
}

}  // namespace detail

/// Squared energy distance, V-statistic:
///   (2/(N M)) sum ||x_i - y_j|| - (1/N^2) sum ||x_i - x_j|| - (1/M^2) sum ||y_i - y_j||.
/// In d = 1 this equals 2 * integral (F_P - F_Q)^2, computed exactly from the
/// sorted samples in O(N log N). Otherwise the blocked O(N M) double sum.
inline double energy_distance_sq(const PreparedBatch& p, const PreparedBatch& q) {
  if (p.dim() != q.dim()) throw ShapeMismatch("energy_distance_sq: dimension mismatch");
  const double n = static_cast<double>(p.size());
  const double m = static_cast<double>(q.size());
  if (p.dim() == 1) {
    const auto pn = static_cast<std::int64_t>(p.size());
    const auto qn = static_cast<std::int64_t>(q.size());
    CompensatedSum s;
    detail::walk_cdf_gaps(p.sorted(), q.sorted(), [&](double width, std::size_t i, std::size_t j) {
      const double diff = static_cast<double>(static_cast<std::int64_t>(i) * qn - static_cast<std::int64_t>(j) * pn);
      s.add(width * diff * diff);
    });
    return 2.0 * s.value() / (n * m * n * m);
  }
  if (p.same_points(q)) return 0.0;
  if (q.precedes(p)) return energy_distance_sq(q, p);
  const double value = 2.0 * p.cross_sum(q) / (n * m) - p.self_sum() / (n * n) - q.self_sum() / (m * m);
  return std::max(0.0, value);
}

inline double energy_distance_sq(const EmpiricalBatch& p, const EmpiricalBatch& q) {
  return energy_distance_sq(PreparedBatch(p), PreparedBatch(q));
}

/// 1-Wasserstein distance between two 1-d empirical distributions,
/// integral |F_P - F_Q|.
inline double empirical_w1_1d(const PreparedBatch& p, const PreparedBatch& q) {
  if (p.dim() != 1 || q.dim() != 1) throw UnsupportedDimension("empirical W1 is implemented for d = 1 only");
  const auto pn = static_cast<std::int64_t>(p.size());
  const auto qn = static_cast<std::int64_t>(q.size());
  CompensatedSum s;
  detail::walk_cdf_gaps(p.sorted(), q.sorted(), [&](double width, std::size_t i, std::size_t j) {
    const auto diff = static_cast<std::int64_t>(i) * qn - static_cast<std::int64_t>(j) * pn;
    s.add(width * static_cast<double>(diff < 0 ? -diff : diff));
  });
  return s.value() / (static_cast<double>(pn) * static_cast<double>(qn));
}

// ---------------------------------------------------------------------------
// Distances between piecewise-constant densities on the same grid

namespace detail {

inline void require_same_grid(const GridApproximation& p, const GridApproximation& q, const char* what) {
  if (p.dim() != q.dim() || p.cells_per_axis() != q.cells_per_axis())
    throw ShapeMismatch(std::string(what) + ": grids differ in d or N");
}

}  // namespace detail

/// max_i |(p_i - L_p) - (q_i - L_q)|.
inline double grid_sup_log(const GridApproximation& p, const GridApproximation& q) {
  detail::require_same_grid(p, q, "grid_sup_log");
  double best = 0.0;
  for (std::size_t i = 0; i < p.cell_count(); ++i)
    best = std::max(best, std::abs((p.values()[i] - p.log_partition()) - (q.values()[i] - q.log_partition())));
  return best;
}

/// (1/2) sum_i |P(cell i) - Q(cell i)|.
inline double grid_tv(const GridApproximation& p, const GridApproximation& q) {
  detail::require_same_grid(p, q, "grid_tv");
  CompensatedSum s;
  for (std::size_t i = 0; i < p.cell_count(); ++i) s.add(std::abs(p.cell_mass(i) - q.cell_mass(i)));
  return 0.5 * s.value();
}

/// integral over [0,1] of |F_p - F_q|; both CDFs are piecewise linear with
/// knots at the cell boundaries, so each cell contributes a closed form.
inline double w1_1d(const GridApproximation& p, const GridApproximation& q) {
  if (p.dim() != 1 || q.dim() != 1) throw UnsupportedDimension("w1_1d is implemented for d = 1 only");
  detail::require_same_grid(p, q, "w1_1d");
  const double h = p.cell_width();
  CompensatedSum s;
  double a = 0.0;
  for (std::size_t k = 0; k < p.cell_count(); ++k) {
    const double b = a + (p.cell_mass(k) - q.cell_mass(k));
    if ((a >= 0.0) == (b >= 0.0) || a == 0.0 || b == 0.0)
      s.add(h * (std::abs(a) + std::abs(b)) / 2.0);
    else
      s.add(h * (a * a + b * b) / (2.0 * (std::abs(a) + std::abs(b))));
    a = b;
  }
  return s.value();
}

/// Per-cell frequencies of a batch on the grid's cells.
inline std::vector<double> cell_frequencies(const EmpiricalBatch& batch, const GridApproximation& grid) {
  if (batch.dim() != grid.dim()) throw ShapeMismatch("cell histogram: dimension mismatch");
  std::vector<std::uint64_t> counts(grid.cell_count(), 0);
  for (std::size_t i = 0; i < batch.size(); ++i) ++counts[grid.cell_of(batch.point(i))];
  std::vector<double> freq(counts.size());
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < counts.size(); ++i) freq[i] = static_cast<double>(counts[i]) / n;
  return freq;
}

/// (1/2) sum_i |freq_i - P_g(cell i)|.
inline double cell_histogram_tv(const EmpiricalBatch& batch, const GridApproximation& reference) {
  const auto freq = cell_frequencies(batch, reference);
  CompensatedSum s;
  for (std::size_t i = 0; i < freq.size(); ++i) s.add(std::abs(freq[i] - reference.cell_mass(i)));
  return 0.5 * s.value();
}

/// max_i |log(freq_i / P_g(cell i))|; infinite as soon as a cell is empty.
inline double cell_histogram_sup_log(const EmpiricalBatch& batch, const GridApproximation& reference) {
  const auto freq = cell_frequencies(batch, reference);
  double best = 0.0;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (freq[i] == 0.0) return kInf;
    best = std::max(best, std::abs(std::log(freq[i]) - std::log(reference.cell_mass(i))));
  }
  return best;
}

/// Identifiers accepted by the sampling harness.
inline const std::vector<std::string>& metric_ids() {
  static const std::vector<std::string> ids{"energy2", "suplog", "tv", "w1"};
  return ids;
}

}  // namespace gibbs
