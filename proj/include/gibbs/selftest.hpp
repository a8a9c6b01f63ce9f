#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/grid_model.hpp"
#include "gibbs/harness.hpp"
#include "gibbs/log_partition.hpp"
#include "gibbs/metrics.hpp"
#include "gibbs/quadrature.hpp"
#include "gibbs/samplers.hpp"
#include "gibbs/target_functions.hpp"

namespace gibbs {

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

namespace detail {

inline CheckResult check(std::string name, const std::function<std::string(bool&)>& body) {
  CheckResult r{std::move(name), true, {}};
  try {
    r.detail = body(r.ok);
  } catch (const std::exception& e) {
    r.ok = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

}  // namespace detail

/// Fast invariant suite behind `gibbs-bench selftest`.
inline std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> out;

  out.push_back(detail::check("oracle consistency", [](bool& ok) {
    std::ostringstream os;
    const std::vector<TargetFunction> fs{linear_sum_function(1, 1), linear_sum_function(-7, 1),
                                         linear_sum_function(40, 2), linear_sum_function(3, 3)};
    for (const auto& f : fs) {
      const double exact = *f.exact_log_partition();
      const double q = quadrature_log_partition(f);
      const double rel = std::abs(q - exact) / std::max(1.0, std::abs(exact));
      const double tol = f.dim() <= 2 ? 1e-6 : 1e-3;
      if (!(rel < tol)) ok = false;
      os << f.label() << " rel " << rel << "; ";
    }
    return os.str();
  }));

  out.push_back(detail::check("r function", [](bool& ok) {
    RandomStream rng(11);
    for (int i = 0; i < 1000; ++i) {
      const double t = -50.0 + 100.0 * rng.uniform();
      const double h = rng.uniform();
      if (r_function(t) != r_function(-t) || r_function(t) < 0.0 ||
          std::abs(r_function(t + h) - r_function(t)) > h / 2.0 + 1e-15)
        ok = false;
    }
    if (r_function(0.0) != 0.0) ok = false;
    return std::string("r(2) = ") + format_double(r_function(2.0));
  }));

  out.push_back(detail::check("grid model", [](bool& ok) {
    const auto g = build_grid(affine_function({1.0}, 0.0, "x"), 2);
    if (std::abs(g.log_partition() - std::log((std::exp(0.25) + std::exp(0.75)) / 2.0)) > 1e-15) ok = false;
    const auto h = build_grid(linear_sum_function(10000, 3), 10);
    double mass = 0.0;
    for (std::size_t i = 0; i < h.cell_count(); ++i) mass += h.cell_mass(i);
    if (std::abs(mass - 1.0) > 1e-10 || !std::isfinite(h.log_partition())) ok = false;
    return "L_g = " + format_double(g.log_partition());
  }));

  out.push_back(detail::check("budget honesty", [](bool& ok) {
    std::ostringstream os;
    auto counter = std::make_shared<std::atomic<std::uint64_t>>(0);
    const auto f = linear_sum_function(5, 2).counted(counter);
    for (std::uint64_t n : {7u, 50u, 333u}) {
      RandomStream rng(n);
      for (const auto& id : log_partition_algorithms()) {
        counter->store(0);
        const auto est = estimate_log_partition(id, f, n, rng);
        const std::uint64_t expected = id == "pc" ? checked_pow(integer_root(n, 2), 2) : n;
        if (est.evals_used != expected || counter->load() != expected) ok = false;
      }
      for (const auto& id : {"mc", "rs", "pc+mc", "pc+rs"}) {
        const Sampler s = make_sampler(id, f, n);
        counter->store(0);
        const auto o = s(rng);
        const bool grid_based = std::string(id).rfind("pc", 0) == 0;
        const std::uint64_t setup = grid_based ? checked_pow(integer_root(n / 2, 2), 2) : 0;
        if (o.evals_used != counter->load() + setup || o.evals_used > n) ok = false;
      }
    }
    os << "evaluation counts match the documented formulas";
    return os.str();
  }));

  out.push_back(detail::check("shift equivariance", [](bool& ok) {
    const auto f = linear_sum_function(2, 2);
    const auto g = shifted(f, 3.0);
    RandomStream a(5), b(5);
    const double va = mc_log_partition(f, 1000, a).value, vb = mc_log_partition(g, 1000, b).value;
    if (std::abs(vb - va - 3.0) > 1e-12) ok = false;
    return "mc shift " + format_double(vb - va);
  }));

  out.push_back(detail::check("determinism", [](bool& ok) {
    const auto f = linear_sum_function(3, 2);
    for (const auto& id : sampler_ids()) {
      if (id == "exactZ") continue;
      const Sampler s1 = make_sampler(id, f, 256), s2 = make_sampler(id, f, 256);
      RandomStream a(9), b(9);
      if (s1(a).point != s2(b).point) ok = false;
    }
    ExperimentSpec spec;
    spec.algorithms = {"mc", "pc", "pc+mc"};
    spec.functions = {"linear:beta=4,d=2"};
    spec.budgets = {16, 64};
    spec.reps = 5;
    spec.base_seed = 3;
    std::ostringstream one, two;
    spec.threads = 1;
    write_csv(run_sweep(spec), one);
    spec.threads = 3;
    write_csv(run_sweep(spec), two);
    if (one.str() != two.str()) ok = false;
    return std::string("CSV bytes ") + std::to_string(one.str().size());
  }));

  out.push_back(detail::check("metric inequalities", [](bool& ok) {
    RandomStream rng(17);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> a(4), b(4);
      for (auto& v : a) v = 4.0 * rng.uniform() - 2.0;
      for (auto& v : b) v = 4.0 * rng.uniform() - 2.0;
      const GridApproximation p(1, 4, a), q(1, 4, b);
      double gap = 0.0;
      for (int i = 0; i < 4; ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
      if (grid_tv(p, q) > grid_sup_log(p, q) + 1e-15 || w1_1d(p, q) > grid_tv(p, q) + 1e-15 ||
          std::abs(p.log_partition() - q.log_partition()) > gap + 1e-15 || grid_sup_log(p, q) > 2 * gap + 1e-15)
        ok = false;
    }
    return std::string("200 random grid pairs");
  }));

  out.push_back(detail::check("rejection fallback rate", [](bool& ok) {
    const auto f = affine_function({0.0}, 0.0, "zero");
    const ConstantEnvelope g{1, std::log(2.0)};
    RandomStream rng(23);
    const int runs = 100000;
    int fell = 0;
    for (int i = 0; i < runs; ++i) fell += rejection_sampling(f, g, 3, rng).fell_back;
    const double freq = static_cast<double>(fell) / runs;
    const double sigma = std::sqrt(0.125 * 0.875 / runs);
    if (std::abs(freq - 0.125) > 4 * sigma) ok = false;
    return "fallback frequency " + format_double(freq);
  }));

  return out;
}

}  // namespace gibbs
