#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/numerics.hpp"

namespace gibbs {

/// How trustworthy a stored constant is.
enum class BoundKind { exact, upper_bound, empirical };

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::exact: return "exact";
    case BoundKind::upper_bound: return "upper-bound";
    case BoundKind::empirical: return "empirical";
  }
  return "?";
}

/// ||f||_{C^m} <= bound, where the norm is the sup over all partial
/// derivatives of total order <= m (including f itself).
struct CmBound {
  int order = 1;
  double bound = 0.0;
  BoundKind kind = BoundKind::exact;
};

/// f(x) = offset + sum_k slopes[k] * x_k. Carried alongside functions that
/// are affine so that closed forms (log-partition, maximum, inverse-CDF
/// sampling, cell masses) stay available after shifting or rescaling.
struct AffineForm {
  std::vector<double> slopes;
  double offset = 0.0;

  double operator()(std::span<const double> x) const {
    double v = offset;
    for (std::size_t k = 0; k < slopes.size(); ++k) v += slopes[k] * x[k];
    return v;
  }
  double log_partition() const {
    double l = offset;
    for (double s : slopes) l += log_partition_affine_1d(s);
    return l;
  }
  double max() const {
    double m = offset;
    for (double s : slopes) m += std::max(s, 0.0);
    return m;
  }
  double min() const {
    double m = offset;
    for (double s : slopes) m += std::min(s, 0.0);
    return m;
  }
  double lipschitz() const {
    double q = 0.0;
    for (double s : slopes) q += s * s;
    return std::sqrt(q);
  }
  double sup_abs() const { return std::max(std::abs(max()), std::abs(min())); }
};

/// Inverse CDF of the density proportional to exp(slope * x) on [0,1].
inline double affine_inverse_cdf(double slope, double u) {
  double x;
  if (std::abs(slope) < 1e-12) {
    x = u;
  } else if (slope > 1.0) {
    // exp(slope) may overflow; write the CDF relative to the right end.
    x = 1.0 + std::log(u + (1.0 - u) * std::exp(-slope)) / slope;
  } else {
    x = std::log1p(u * std::expm1(slope)) / slope;
  }
  if (!(x >= 0.0)) return 0.0;  // also catches -inf and NaN from log(0)
  return std::min(x, 1.0);
}

/// Exact sample from P_f for f(x) = beta * (x_1 + ... + x_d) by
/// componentwise inverse CDF of the uniform vector u.
inline Point exact_linear_sampler(double beta, std::span<const double> u) {
  Point x(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) x[k] = affine_inverse_cdf(beta, u[k]);
  return x;
}

/// Evaluatable f on [0,1]^d plus the analytic metadata the algorithms and
/// the oracles rely on. Immutable; the with_* members return modified copies.
class TargetFunction {
 public:
  using Evaluator = std::function<double(std::span<const double>)>;
  /// Writes one exact P_f sample into `out`.
  using ExactSampler = std::function<void(RandomStream&, std::span<double>)>;

  TargetFunction(std::size_t dim, Evaluator evaluate, std::string label)
      : dim_(dim), evaluate_(std::make_shared<const Evaluator>(std::move(evaluate))), label_(std::move(label)) {
    if (dim_ == 0) throw PreconditionViolated("TargetFunction dimension must be >= 1");
  }

  double operator()(std::span<const double> x) const { return (*evaluate_)(x); }
  double evaluate(std::span<const double> x) const { return (*evaluate_)(x); }

  std::size_t dim() const noexcept { return dim_; }
  const std::string& label() const noexcept { return label_; }

  /// Lipschitz constant |f|_1 with respect to the Euclidean norm.
  double lipschitz() const noexcept { return lipschitz_; }
  BoundKind lipschitz_kind() const noexcept { return lipschitz_kind_; }
  const std::optional<CmBound>& cm_bound() const noexcept { return cm_bound_; }
  const std::optional<double>& exact_log_partition() const noexcept { return log_partition_; }
  const std::optional<double>& exact_max() const noexcept { return max_; }
  const std::optional<AffineForm>& affine() const noexcept { return affine_; }
  bool has_exact_sampler() const noexcept { return static_cast<bool>(sampler_); }

  void sample_exact(RandomStream& rng, std::span<double> out) const {
    if (!sampler_) throw MissingOracle("no exact sampler for " + label_);
    (*sampler_)(rng, out);
  }
  Point sample_exact(RandomStream& rng) const {
    Point x(dim_);
    sample_exact(rng, x);
    return x;
  }

  TargetFunction with_lipschitz(double value, BoundKind kind) const {
    auto f = *this;
    f.lipschitz_ = value;
    f.lipschitz_kind_ = kind;
    return f;
  }
  TargetFunction with_cm_bound(CmBound b) const {
    auto f = *this;
    f.cm_bound_ = b;
    return f;
  }
  TargetFunction with_exact_log_partition(double value) const {
    auto f = *this;
    f.log_partition_ = value;
    return f;
  }
  TargetFunction with_exact_max(double value) const {
    auto f = *this;
    f.max_ = value;
    return f;
  }
  TargetFunction with_exact_sampler(ExactSampler s) const {
    auto f = *this;
    f.sampler_ = std::make_shared<const ExactSampler>(std::move(s));
    return f;
  }
  TargetFunction with_label(std::string label) const {
    auto f = *this;
    f.label_ = std::move(label);
    return f;
  }

  /// Same function and metadata; every evaluation increments *counter.
  TargetFunction counted(std::shared_ptr<std::atomic<std::uint64_t>> counter) const {
    auto f = *this;
    f.evaluate_ = std::make_shared<const Evaluator>([inner = evaluate_, counter](std::span<const double> x) {
      counter->fetch_add(1, std::memory_order_relaxed);
      return (*inner)(x);
    });
    return f;
  }

  /// Attaches an affine form and every closed form it implies.
  TargetFunction with_affine(AffineForm form) const {
    if (form.slopes.size() != dim_) throw ShapeMismatch("affine form dimension mismatch");
    auto f = *this;
    f.log_partition_ = form.log_partition();
    f.max_ = form.max();
    f.lipschitz_ = form.lipschitz();
    f.lipschitz_kind_ = BoundKind::exact;
    double c1 = form.sup_abs();
    for (double s : form.slopes) c1 = std::max(c1, std::abs(s));
    f.cm_bound_ = CmBound{1, c1, BoundKind::exact};
    f.sampler_ = std::make_shared<const ExactSampler>([slopes = form.slopes](RandomStream& rng, std::span<double> out) {
      for (std::size_t k = 0; k < slopes.size(); ++k) out[k] = affine_inverse_cdf(slopes[k], rng.uniform());
    });
    f.affine_ = std::move(form);
    return f;
  }

 private:
  std::size_t dim_;
  std::shared_ptr<const Evaluator> evaluate_;
  std::string label_;
  double lipschitz_ = 0.0;
  BoundKind lipschitz_kind_ = BoundKind::empirical;  // unknown until declared
  std::optional<CmBound> cm_bound_;
  std::optional<double> log_partition_;
  std::optional<double> max_;
  std::shared_ptr<const ExactSampler> sampler_;
  std::optional<AffineForm> affine_;
};

inline std::string format_param(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

/// f(x) = offset + <slopes, x> with all closed forms attached.
inline TargetFunction affine_function(std::vector<double> slopes, double offset, std::string label) {
  AffineForm form{std::move(slopes), offset};
  const std::size_t d = form.slopes.size();
  auto eval = [form](std::span<const double> x) { return form(x); };
  return TargetFunction(d, std::move(eval), std::move(label)).with_affine(std::move(form));
}

/// f(x) = beta * (x_1 + ... + x_d); |f|_1 = |beta| sqrt(d),
/// L_f = d (beta/2 + r(beta)).
inline TargetFunction linear_sum_function(double beta, std::size_t d) {
  if (d == 0) throw PreconditionViolated("linear_sum_function: d must be >= 1");
  auto label = "linear:beta=" + format_param(beta) + ",d=" + std::to_string(d);
  AffineForm form{std::vector<double>(d, beta), 0.0};
  auto eval = [beta](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return beta * s;
  };
  return TargetFunction(d, std::move(eval), std::move(label)).with_affine(std::move(form));
}

/// f(x) = beta * sum_k x_k^2. No closed-form log-partition is attached.
inline TargetFunction quadratic_sum_function(double beta, std::size_t d) {
  if (d == 0) throw PreconditionViolated("quadratic_sum_function: d must be >= 1");
  auto label = "quad:beta=" + format_param(beta) + ",d=" + std::to_string(d);
  auto eval = [beta](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return beta * s;
  };
  const double ab = std::abs(beta);
  const double dd = static_cast<double>(d);
  return TargetFunction(d, std::move(eval), std::move(label))
      .with_lipschitz(2.0 * ab * std::sqrt(dd), BoundKind::exact)
      .with_cm_bound(CmBound{2, std::max(ab * dd, 2.0 * ab), BoundKind::exact})
      .with_exact_max(beta >= 0 ? beta * dd : 0.0);
}

/// f(x) = beta * sum_k cos(2 pi (x_k - z_k)).
inline TargetFunction cosine_sum_function(double beta, std::vector<double> z) {
  const std::size_t d = z.size();
  if (d == 0) throw PreconditionViolated("cosine_sum_function: z must be non-empty");
  std::string zs;
  for (std::size_t k = 0; k < d; ++k) zs += (k ? "/" : "") + format_param(z[k]);
  auto label = "cos:beta=" + format_param(beta) + ",d=" + std::to_string(d) + ",z=" + zs;
  auto eval = [beta, z = std::move(z)](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) s += std::cos(2.0 * std::numbers::pi * (x[k] - z[k]));
    return beta * s;
  };
  const double ab = std::abs(beta);
  const double dd = static_cast<double>(d);
  const double two_pi = 2.0 * std::numbers::pi;
  return TargetFunction(d, std::move(eval), std::move(label))
      .with_lipschitz(two_pi * ab * std::sqrt(dd), BoundKind::exact)
      .with_cm_bound(CmBound{2, std::max(ab * dd, two_pi * two_pi * ab), BoundKind::exact})
      .with_exact_max(ab * dd);
}

struct BumpSpec {
  std::vector<double> center;
  double radius = 1.0;
};

/// Template bump exp(4 - 1/(1-y) - 1/(1+y)) on (-1, 1), zero elsewhere.
inline double bump_profile(double y) {
  if (!(std::abs(y) < 1.0)) return 0.0;
  return std::exp(4.0 - 1.0 / (1.0 - y) - 1.0 / (1.0 + y));
}

/// max_y |b'(y)| of the template bump, measured on a fine grid.
inline double bump_profile_max_slope() {
  static const double value = [] {
    double best = 0.0;
    constexpr int kSteps = 200000;
    for (int i = 1; i < kSteps; ++i) {
      const double y = -1.0 + 2.0 * i / kSteps;
      const double b = bump_profile(y);
      const double slope = b * (1.0 / ((1.0 + y) * (1.0 + y)) - 1.0 / ((1.0 - y) * (1.0 - y)));
      best = std::max(best, std::abs(slope));
    }
    return best;
  }();
  return value;
}

/// amplitude * prod_k b((x_k - z_k) / delta). Vanishes outside the open
/// sup-norm ball of radius delta around z and is >= amplitude on the ball
/// of radius delta/2.
inline TargetFunction bump_function(const BumpSpec& spec, double amplitude) {
  if (!(spec.radius > 0.0)) throw PreconditionViolated("bump_function: radius must be > 0");
  const std::size_t d = spec.center.size();
  if (d == 0) throw PreconditionViolated("bump_function: center must be non-empty");
  std::string zs;
  for (std::size_t k = 0; k < d; ++k) zs += (k ? "/" : "") + format_param(spec.center[k]);
  auto label = "bump:z=" + zs + ",delta=" + format_param(spec.radius) + ",amp=" + format_param(amplitude) +
               ",d=" + std::to_string(d);
  auto eval = [z = spec.center, delta = spec.radius, amplitude](std::span<const double> x) {
    double v = amplitude;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double b = bump_profile((x[k] - z[k]) / delta);
      if (b == 0.0) return 0.0;
      v *= b;
    }
    return v;
  };

  // Each factor attains its max at the cube point closest to z_k and its
  // min at the farther cube endpoint.
  double prod_max = 1.0, prod_min = 1.0;
  for (double zk : spec.center) {
    const double nearest = std::clamp(zk, 0.0, 1.0);
    const double farthest = std::abs(zk) > std::abs(zk - 1.0) ? 0.0 : 1.0;
    prod_max *= bump_profile((nearest - zk) / spec.radius);
    prod_min *= bump_profile((farthest - zk) / spec.radius);
  }
  const double max_value = amplitude >= 0 ? amplitude * prod_max : amplitude * prod_min;

  const double dd = static_cast<double>(d);
  const double slope = bump_profile_max_slope();
  const double peak = std::exp(2.0 * (dd - 1.0));
  const double lip = std::abs(amplitude) * std::sqrt(dd) * slope * peak / spec.radius;
  const double c1 = std::abs(amplitude) * std::max(std::exp(2.0 * dd), slope * peak / spec.radius);
  return TargetFunction(d, std::move(eval), std::move(label))
      .with_lipschitz(lip, BoundKind::upper_bound)
      .with_cm_bound(CmBound{1, c1, BoundKind::empirical})
      .with_exact_max(max_value);
}

/// f + c. Shifting preserves every closed form.
inline TargetFunction shifted(const TargetFunction& f, double c) {
  auto eval = [f, c](std::span<const double> x) { return f(x) + c; };
  TargetFunction g(f.dim(), std::move(eval), f.label() + "+" + format_param(c));
  if (f.affine()) {
    AffineForm form = *f.affine();
    form.offset += c;
    return g.with_affine(std::move(form));
  }
  g = g.with_lipschitz(f.lipschitz(), f.lipschitz_kind());
  if (f.cm_bound()) {
    CmBound b = *f.cm_bound();
    if (c != 0.0) {
      b.bound += std::abs(c);
      if (b.kind == BoundKind::exact) b.kind = BoundKind::upper_bound;
    }
    g = g.with_cm_bound(b);
  }
  if (f.exact_log_partition()) g = g.with_exact_log_partition(*f.exact_log_partition() + c);
  if (f.exact_max()) g = g.with_exact_max(*f.exact_max() + c);
  if (f.has_exact_sampler()) g = g.with_exact_sampler([f](RandomStream& rng, std::span<double> out) { f.sample_exact(rng, out); });
  return g;
}

/// beta * f (inverse temperature). Closed forms survive only for affine f
/// (and the maximum for beta >= 0).
inline TargetFunction scaled(const TargetFunction& f, double beta) {
  auto eval = [f, beta](std::span<const double> x) { return beta * f(x); };
  TargetFunction g(f.dim(), std::move(eval), format_param(beta) + "*" + f.label());
  if (f.affine()) {
    AffineForm form = *f.affine();
    for (double& s : form.slopes) s *= beta;
    form.offset *= beta;
    return g.with_affine(std::move(form));
  }
  g = g.with_lipschitz(std::abs(beta) * f.lipschitz(), f.lipschitz_kind());
  if (f.cm_bound()) {
    CmBound b = *f.cm_bound();
    b.bound *= std::abs(beta);
    g = g.with_cm_bound(b);
  }
  if (f.exact_max() && beta >= 0) g = g.with_exact_max(beta * *f.exact_max());
  return g;
}

/// Lipschitz-based bound on |M_f - eps * L_{f/eps}|:
/// eps * d * log(1 + 3 |f|_1 / (sqrt(d) eps)).
inline double optimization_limit_bound(double eps, double lipschitz, std::size_t d) {
  if (!(eps > 0.0)) throw PreconditionViolated("optimization_limit_bound: eps must be > 0");
  const double dd = static_cast<double>(d);
  return eps * dd * std::log1p(3.0 * lipschitz / (std::sqrt(dd) * eps));
}

}  // namespace gibbs
