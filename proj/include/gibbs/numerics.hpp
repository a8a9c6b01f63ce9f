#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace gibbs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log(sum_i exp(v_i)) with max-subtraction. Empty input gives -inf.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -kInf;
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log of the arithmetic mean of exp(v_i).
inline double log_mean_exp(std::span<const double> v) {
  if (v.empty()) return -kInf;
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

/// r(t) = log( integral_{-1/2}^{1/2} exp(t u) du ), i.e. log(sinh(t/2)/(t/2)).
/// Even, 1/2-Lipschitz and nonnegative; log-partition of x -> t x on [0,1]
/// is t/2 + r(t).
inline double r_function(double t) {
  const double a = std::abs(t);
  if (a < 1e-4) {
    const double t2 = a * a;
    return t2 / 24.0 - t2 * t2 / 2880.0;
  }
  if (a < 1.0) {
    const double h = 0.5 * a;
    return std::log(std::sinh(h) / h);
  }
  return 0.5 * a + std::log(-std::expm1(-a)) - std::log(a);
}

/// Log-partition of the affine map x -> slope * x over [0,1].
inline double log_partition_affine_1d(double slope) { return 0.5 * slope + r_function(slope); }

inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

/// N^d, throwing std::overflow_error past 2^63.
inline std::uint64_t checked_pow(std::uint64_t base, std::size_t exponent) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (base != 0 && r > (std::uint64_t{1} << 63) / base) throw std::overflow_error("checked_pow overflow");
    r *= base;
  }
  return r;
}

/// Largest N >= 0 with N^d <= n.
inline std::uint64_t integer_root(std::uint64_t n, std::size_t d) {
  if (d == 1 || n <= 1) return n;
  auto fits = [&](std::uint64_t c) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < d; ++i) {
      if (r > n / c) return false;
      r *= c;
    }
    return r <= n;
  };
  auto guess = static_cast<std::uint64_t>(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d)));
  guess = std::max<std::uint64_t>(guess, 1);
  while (guess > 1 && !fits(guess)) --guess;
  while (fits(guess + 1)) ++guess;
  return guess;
}

/// Lower median: element floor((n-1)/2) of the sorted values.
inline double lower_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("lower_median of empty range");
  const auto k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log_log_slope needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace gibbs
