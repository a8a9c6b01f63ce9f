#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gibbs/target_functions.hpp"

namespace gibbs {

namespace detail {

inline double gauss_kronrod(const std::function<double(double)>& g, double a, double b) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  double err = 0.0;
  return Rule::integrate(g, a, b, 25, 1e-13, &err);
}

// Max of f over a regular lattice with k points per axis (boundaries included).
inline double lattice_max(const TargetFunction& f, std::size_t k) {
  const std::size_t d = f.dim();
  std::vector<std::size_t> idx(d, 0);
  Point x(d);
  double best = -kInf;
  for (;;) {
    for (std::size_t j = 0; j < d; ++j) x[j] = static_cast<double>(idx[j]) / static_cast<double>(k - 1);
    best = std::max(best, f(x));
    std::size_t j = d;
    while (j > 0) {
      --j;
      if (++idx[j] < k) break;
      idx[j] = 0;
      if (j == 0) return best;
    }
  }
}

}  // namespace detail

/// Number of midpoint cells per axis used by the tensor-grid rule in d >= 3.
inline std::size_t quadrature_grid_size(std::size_t d) {
  if (d <= 3) return 512;
  return std::max<std::size_t>(4, static_cast<std::size_t>(std::pow(double(1u << 27), 1.0 / double(d))));
}

/// log of the integral of exp(f) over [0,1]^d by quadrature, independent of
/// any closed form carried by f. Adaptive Gauss-Kronrod (61 points) in d = 1,
/// nested Gauss-Kronrod in d = 2, tensor midpoint grid in d >= 3.
/// The integrand is scaled by exp(-m), m a lattice maximum, before integrating.
inline double quadrature_log_partition(const TargetFunction& f) {
  const std::size_t d = f.dim();
  if (d == 1) {
    const double m = detail::lattice_max(f, 4097);
    double x[1];
    const double I = detail::gauss_kronrod(
        [&](double t) {
          x[0] = t;
          return std::exp(f(x) - m);
        },
        0.0, 1.0);
    return m + std::log(I);
  }
  if (d == 2) {
    const double m = detail::lattice_max(f, 257);
    double x[2];
    const double I = detail::gauss_kronrod(
        [&](double t0) {
          return detail::gauss_kronrod(
              [&](double t1) {
                x[0] = t0;
                x[1] = t1;
                return std::exp(f(x) - m);
              },
              0.0, 1.0);
        },
        0.0, 1.0);
    return m + std::log(I);
  }
  const std::size_t k = quadrature_grid_size(d);
  std::vector<std::size_t> idx(d, 0);
  Point x(d);
  // Two passes: max, then scaled sum, so that nothing overflows.
  double m = -kInf;
  auto sweep = [&](auto&& visit) {
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {
      for (std::size_t j = 0; j < d; ++j) x[j] = (static_cast<double>(idx[j]) + 0.5) / static_cast<double>(k);
      visit(f(x));
      std::size_t j = d;
      while (j > 0) {
        --j;
        if (++idx[j] < k) break;
        idx[j] = 0;
        if (j == 0) return;
      }
    }
  };
  sweep([&](double v) { m = std::max(m, v); });
  CompensatedSum s;
  sweep([&](double v) { s.add(std::exp(v - m)); });
  return m + std::log(s.value()) - static_cast<double>(d) * std::log(static_cast<double>(k));
}

/// L_f from the closed form when present, else by quadrature.
inline double reference_log_partition(const TargetFunction& f) {
  if (f.exact_log_partition()) return *f.exact_log_partition();
  return quadrature_log_partition(f);
}

}  // namespace gibbs
