// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance                 run everything
//   acceptance --only <id>     run one criterion (repeatable)
//   acceptance --list          print the ids
//
// Exit status 0 iff every selected criterion passed within its time limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gibbs/gibbs.hpp"

using namespace gibbs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double sigma(double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / n); }

TargetFunction from_grid(std::shared_ptr<const GridApproximation> grid) {
  const std::size_t d = grid->dim();
  return TargetFunction(d, [grid](std::span<const double> x) { return grid->evaluate(x); }, "grid");
}

// Wilson-Hilferty upper quantile of chi-square at tail 1e-6.
double chi_square_quantile_1e6(std::size_t dof) {
  const double k = static_cast<double>(dof);
  return k * std::pow(1.0 - 2.0 / (9.0 * k) + 4.753 * std::sqrt(2.0 / (9.0 * k)), 3.0);
}

// ---------------------------------------------------------------------------

Outcome oracle_suite() {
  struct Case {
    TargetFunction f;
    double limit;
  };
  std::vector<Case> cases;
  for (double beta : {-10000.0, -40.0, -1.0, 0.0, 0.1, 1.0, 15.0, 40.0, 1000.0, 10000.0})
    cases.push_back({linear_sum_function(beta, 1), 1e-6});
  for (double beta : {-40.0, 0.1, 1.0, 15.0, 40.0}) cases.push_back({linear_sum_function(beta, 2), 1e-6});
  for (double beta : {-40.0, 0.1, 15.0, 40.0}) cases.push_back({linear_sum_function(beta, 3), 1e-3});
  cases.push_back({affine_function({2.0, -7.5}, 0.3, "affine2"), 1e-6});
  cases.push_back({affine_function({-3.0, 0.0, 12.0}, -1.0, "affine3"), 1e-3});
  cases.push_back({shifted(linear_sum_function(5, 2), -2.0), 1e-6});
  cases.push_back({scaled(linear_sum_function(5, 1), -3.0), 1e-6});
  cases.push_back({rescaled(linear_sum_function(20, 2), Hyperrectangle{{0.25, 0.5}, {0.125, 0.25}}), 1e-6});

  double worst = 0.0;
  std::string worst_label;
  int bad = 0;
  for (const auto& c : cases) {
    const double exact = *c.f.exact_log_partition();
    const double quad = quadrature_log_partition(c.f);
    const double rel = exact == 0.0 ? std::abs(quad) : std::abs(quad - exact) / std::abs(exact);
    if (rel / c.limit > worst) {
      worst = rel / c.limit;
      worst_label = c.f.label() + " d=" + std::to_string(c.f.dim());
    }
    bad += !(rel < c.limit);
  }
  // Exact cell-mass grids carry the same closed form.
  for (double beta : {-30.0, 2.0, 300.0}) {
    const auto f = linear_sum_function(beta, 2);
    const double gap = std::abs(cell_mass_grid(f, 7).log_partition() - *f.exact_log_partition());
    bad += !(gap <= 1e-9 * std::max(1.0, std::abs(*f.exact_log_partition())));
  }
  return {bad == 0, std::to_string(cases.size()) + " closed forms checked, worst error/limit " + fmt(worst) + " (" +
                        worst_label + ")"};
}

Outcome mixture_law() {
  RandomStream cfg(20240601);
  const int runs = 1000000;
  int bad = 0;
  double worst_z = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 1 + cfg.below(2);
    const std::size_t cells = 2 + cfg.below(3);
    const std::uint64_t n = 1 + cfg.below(4);
    const std::size_t count = checked_pow(cells, d);
    std::vector<double> fv(count), gv(count);
    for (std::size_t i = 0; i < count; ++i) {
      fv[i] = 2.0 * cfg.uniform() - 1.0;
      gv[i] = fv[i] + 1.5 * cfg.uniform();
    }
    auto fg = std::make_shared<const GridApproximation>(d, cells, fv);
    const GridApproximation gg(d, cells, gv);
    const auto f = from_grid(fg);
    const double accept = std::exp(fg->log_partition() - gg.log_partition());
    const double pr = std::pow(1.0 - accept, double(n));

    RandomStream rng(derive_seed(1, "mixture", n, t));
    std::vector<std::uint64_t> hist(count, 0);
    std::uint64_t fell = 0;
    for (int r = 0; r < runs; ++r) {
      const auto out = rejection_sampling(f, GridEnvelope{&gg, 0.0}, n, rng);
      ++hist[fg->cell_of(out.point)];
      fell += out.fell_back;
    }
    for (std::size_t i = 0; i < count; ++i) {
      const double p = (1.0 - pr) * fg->cell_mass(i) + pr * gg.cell_mass(i);
      const double z = std::abs(double(hist[i]) / runs - p) / sigma(p, runs);
      worst_z = std::max(worst_z, z);
      bad += !(z <= 4.0);
    }
    const double z = std::abs(double(fell) / runs - pr) / sigma(pr, runs);
    worst_z = std::max(worst_z, z);
    bad += !(z <= 4.0);
  }
  return {bad == 0, "10 configurations x 1e6 runs, largest deviation " + fmt(worst_z, 3) + " sigma"};
}

Outcome mc_bound_domination() {
  const auto spec = recipe("fig1");
  const auto records = run_sweep(spec);
  int bad = 0, points = 0;
  double worst = 0.0;
  std::string where;
  for (const auto& id : spec.functions) {
    const auto nf = resolve_function(id);
    for (auto n : spec.budgets) {
      const auto med = median_of(records, "mc", id, n, "L");
      const double bound = mc_error_bound(0.5, nf.f.lipschitz(), 1, n).bound;
      ++points;
      if (!med || !(*med <= bound)) {
        ++bad;
        continue;
      }
      if (*med / bound > worst) {
        worst = *med / bound;
        where = "beta=" + fmt(nf.beta) + " n=" + std::to_string(n);
      }
    }
  }
  return {bad == 0, std::to_string(points) + " grid points, R=" + std::to_string(spec.reps) + ", " + std::to_string(bad) +
                        " above the bound; largest median/bound " + fmt(worst, 3) + " at " + where};
}

std::vector<double> median_curve(const std::vector<RunRecord>& records, const std::string& algo, const std::string& fn,
                                 const std::vector<std::uint64_t>& budgets) {
  std::vector<double> out;
  for (auto n : budgets) out.push_back(median_of(records, algo, fn, n, "L").value_or(std::nan("")));
  return out;
}

Outcome slopes(const std::string& fn, const std::vector<std::pair<std::string, std::pair<double, double>>>& expected,
               bool pc_below_mc) {
  auto spec = recipe("fig2");
  spec.functions = {fn};
  const auto records = run_sweep(spec);
  std::vector<double> ns(spec.budgets.begin(), spec.budgets.end());
  bool ok = true;
  std::string detail;
  for (const auto& [algo, target] : expected) {
    const auto curve = median_curve(records, algo, fn, spec.budgets);
    const double s = log_log_slope(ns, curve);
    const bool pass = std::abs(s - target.first) <= target.second;
    ok = ok && pass;
    detail += algo + " " + fmt(s, 3) + " (want " + fmt(target.first, 3) + "+-" + fmt(target.second, 2) + ") ";
  }
  if (pc_below_mc) {
    const auto pc = median_curve(records, "pc", fn, spec.budgets);
    const auto mc = median_curve(records, "mc", fn, spec.budgets);
    int bad = 0;
    for (std::size_t i = 0; i < ns.size(); ++i)
      if (ns[i] >= 1e4 && !(pc[i] < mc[i])) ++bad;
    ok = ok && bad == 0;
    detail += "| pc below mc for n >= 1e4: " + std::string(bad == 0 ? "yes" : "no");
  }
  return {ok, "R=" + std::to_string(spec.reps) + ": " + detail};
}

Outcome slopes_optimization_regime() {
  return slopes("linear:beta=10000,d=3", {{"pc", {-1.0 / 3, 0.08}}, {"mc", {-1.0 / 3, 0.08}}, {"pc+mc", {-2.0 / 3, 0.12}}},
                false);
}

Outcome slopes_quadrature_regime() {
  return slopes("linear:beta=0.1,d=3", {{"mc", {-0.5, 0.08}}, {"pc", {-2.0 / 3, 0.1}}, {"pc+mc", {-5.0 / 6, 0.12}}}, true);
}

Outcome mc_sampling_lower_bound() {
  const double beta = 600.0;
  const auto f = linear_sum_function(-beta, 1);
  const double delta = std::log(4.0) / beta;
  const double analytic = -std::expm1(-beta * delta) / -std::expm1(-beta);
  const int runs = 100000;
  RandomStream rng(derive_seed(2, "mc", 100, 0));
  int inside = 0;
  for (int i = 0; i < runs; ++i) inside += mc_sampling(f, 100, rng).point[0] <= delta;
  const double empirical = double(inside) / runs;
  const bool ok = empirical <= 0.25 && analytic >= 0.75 && analytic - empirical >= 0.5;
  return {ok, "P~([0, log4/600]) = " + fmt(empirical) + ", P_f = " + fmt(analytic) + ", TV >= " + fmt(analytic - empirical)};
}

Outcome known_normalization_exactness() {
  auto grid = std::make_shared<const GridApproximation>(1, 2, std::vector<double>{std::log(4.0 / 3.0), std::log(2.0 / 3.0)});
  const auto f = from_grid(grid);
  RandomStream rng(derive_seed(3, "exactZ", 0, 0));
  const int draws = 1000000;
  std::uint64_t low = 0, accepted = 0;
  for (int i = 0; i < draws; ++i) {
    const auto out = exact_sampler_known_Z(f, rng);
    low += out.point[0] < 0.5;
    accepted += !out.fell_back;
  }
  const double freq = double(low) / draws;
  const double z = std::abs(freq - 2.0 / 3.0) / sigma(2.0 / 3.0, draws);
  const double acceptance = double(accepted) / draws;
  const bool ok = z <= 4.0 && std::abs(acceptance - 0.5) <= 0.002;
  return {ok, "lower-cell mass " + fmt(freq, 6) + " (" + fmt(z, 3) + " sigma from 2/3), per-round acceptance " +
                  fmt(acceptance, 5)};
}

Outcome ti_unbiasedness() {
  const auto f = linear_sum_function(1, 1);
  const double exact = *f.exact_log_partition();
  const int seeds = 10000;
  const std::uint64_t n = 1000;
  const double sup_norm = 1.0;
  const double radius = 2.0 * sup_norm * std::sqrt(std::log(2.0 / 0.05) / (2.0 * double(n)));
  std::vector<double> err(seeds);
  parallel_for(seeds, [&](std::size_t s) {
    RandomStream rng(derive_seed(4, "ti", n, s));
    err[s] = ti_log_partition(f, n, rng).value - exact;
  });
  double mean = 0.0;
  for (double e : err) mean += e;
  mean /= seeds;
  double var = 0.0;
  for (double e : err) var += (e - mean) * (e - mean);
  const double se = std::sqrt(var / (seeds - 1) / seeds);
  int inside = 0;
  for (double e : err) inside += std::abs(e) <= radius;
  const double coverage = double(inside) / seeds;
  const bool ok = std::abs(mean) <= 4.0 * se && coverage >= 0.95;
  return {ok, "mean bias " + fmt(mean, 3) + " (" + fmt(std::abs(mean) / se, 3) + " SE), coverage of the delta=0.05 envelope " +
                  fmt(coverage, 4)};
}

// Exact cell masses of bisection sampling for a 1-d affine f, when the
// oracle returns L(f_Z1) + eps and L(f_Z2) - eps at every split.
std::vector<double> bisection_masses(const TargetFunction& f, std::size_t depth, double eps) {
  std::vector<double> mass{1.0};
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<double> next(mass.size() * 2);
    const double h = 1.0 / double(mass.size());
    for (std::size_t k = 0; k < mass.size(); ++k) {
      const auto [lo, hi] = Hyperrectangle{{k * h}, {h}}.split(0);
      const double p1 = sigmoid(*rescaled(f, lo).exact_log_partition() + eps - *rescaled(f, hi).exact_log_partition() + eps);
      next[2 * k] = mass[k] * p1;
      next[2 * k + 1] = mass[k] * (1.0 - p1);
    }
    mass = std::move(next);
  }
  return mass;
}

// sup over x of |log p~(x) - log p_f(x)| for an increasing 1-d affine f.
double sup_log_error(const std::vector<double>& mass, double beta) {
  const double lf = *linear_sum_function(beta, 1).exact_log_partition();
  const double h = 1.0 / double(mass.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    const double log_density = std::log(mass[k] / h);
    for (double x : {k * h, (k + 1) * h}) worst = std::max(worst, std::abs(log_density - (beta * x - lf)));
  }
  return worst;
}

Outcome bisection() {
  const double beta = 5.0;
  const std::size_t depth = 6, d = 1;
  const auto f = linear_sum_function(beta, 1);
  const double c1_norm = beta;  // max(sup |f|, sup |f'|) on [0,1]
  const std::size_t cells = std::size_t{1} << depth;

  // Exact oracle: chi-square of the dyadic cells against analytic masses.
  RandomStream rng(derive_seed(5, "bisect", 0, 0));
  std::vector<std::uint64_t> hist(cells, 0);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) {
    const double x = bisection_sampling(f, exact_oracle(), depth, rng).point[0];
    ++hist[std::min<std::size_t>(cells - 1, static_cast<std::size_t>(x * cells))];
  }
  double chi = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    const double a = double(k) / cells, b = double(k + 1) / cells;
    const double p = (std::exp(beta * b) - std::exp(beta * a)) / std::expm1(beta);
    chi += (hist[k] - draws * p) * (hist[k] - draws * p) / (draws * p);
  }
  const double chi_limit = chi_square_quantile_1e6(cells - 1);
  bool ok = chi < chi_limit;
  std::string detail = "chi2 " + fmt(chi, 4) + " < " + fmt(chi_limit, 4);

  for (double eps : {0.01, 0.1}) {
    // Perturbed oracle: +eps on even calls (lower child), -eps on odd calls.
    auto calls = std::make_shared<std::uint64_t>(0);
    LogPartitionOracle perturbed = [calls, eps](const TargetFunction& g, RandomStream&) {
      const double sign = (*calls)++ % 2 == 0 ? 1.0 : -1.0;
      return LogPartitionEstimate{*g.exact_log_partition() + sign * eps, 0, 0, "perturbed"};
    };
    const auto mass = bisection_masses(f, depth, eps);
    const double err = sup_log_error(mass, beta);
    const double bound = 2.0 * depth * d * eps + std::ldexp(1.0, -int(depth)) * d * c1_norm;
    // The sampler must realize these masses.
    RandomStream prng(derive_seed(5, "bisect", 1, std::uint64_t(eps * 1000)));
    std::vector<std::uint64_t> ph(cells, 0);
    const int pdraws = 200000;
    for (int i = 0; i < pdraws; ++i) {
      const double x = bisection_sampling(f, perturbed, depth, prng).point[0];
      ++ph[std::min<std::size_t>(cells - 1, static_cast<std::size_t>(x * cells))];
    }
    double pchi = 0.0;
    for (std::size_t k = 0; k < cells; ++k) pchi += (ph[k] - pdraws * mass[k]) * (ph[k] - pdraws * mass[k]) / (pdraws * mass[k]);
    ok = ok && err <= bound && pchi < chi_limit;
    detail += "; eps=" + fmt(eps) + ": sup-log " + fmt(err, 4) + " <= " + fmt(bound, 4) + " (sampler chi2 " + fmt(pchi, 4) + ")";
  }
  return {ok, detail};
}

Outcome sampler_ordering() {
  ExperimentSpec spec;
  spec.mode = Mode::sample;
  spec.algorithms = {"pc", "mc", "rs", "pc+mc", "pc+rs"};
  const std::string fn = "linear:beta=15,d=3";
  spec.functions = {fn};
  spec.budgets = {64, 512, 4096, 32768};
  spec.reps = 11;
  spec.base_seed = 7;
  spec.metrics = {"energy2"};
  spec.reference_samples = 20000;
  const auto records = run_sweep(spec);
  double ceiling = 0.0;
  for (const auto& r : records)
    if (r.algorithm == kCeilingId && r.value) ceiling = std::max(ceiling, *r.value);
  auto med = [&](const std::string& a, std::uint64_t n) { return median_of(records, a, fn, n, "energy2").value_or(kInf); };
  const std::uint64_t lo = spec.budgets.front(), hi = spec.budgets.back();
  const double pc = med("pc", hi), mc = med("mc", hi), pcmc = med("pc+mc", hi), pcrs = med("pc+rs", hi), rs = med("rs", hi);
  const bool hybrids = std::max(pcmc, pcrs) <= std::min(pc, mc);
  const bool rs_start = med("rs", lo) > med("pc", lo);
  const bool rs_end = rs <= 2.0 * ceiling;
  std::ostringstream os;
  os.precision(3);
  os << "N=" << spec.reference_samples << ", R=" << spec.reps << "; n=" << hi << ": pc " << pc << ", mc " << mc << ", pc+mc "
     << pcmc << ", pc+rs " << pcrs << ", rs " << rs << ", ceiling " << ceiling << "; n=" << lo << ": rs " << med("rs", lo)
     << " vs pc " << med("pc", lo);
  return {hybrids && rs_start && rs_end, os.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const char* bench = std::getenv("GIBBS_BENCH");
  if (!bench) return {false, "GIBBS_BENCH is not set to the gibbs-bench executable"};
  const auto dir = std::filesystem::temp_directory_path() / ("gibbs_determinism_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::vector<std::string> commands{
      "logpartition --algo mc,pc,pc+mc,ti --fn 'linear:beta=40,d=3;linear:beta=0.1,d=1;quad:beta=2,d=2' --n 1e3:1e5:log5 "
      "--reps 31 --seed 3",
      "sample --algo pc,mc,rs,pc+mc,pc+rs,bisect --fn 'linear:beta=15,d=3' --n 64,4096 --metric energy2,tv,suplog "
      "--ref-samples 3000 --reps 3 --seed 8",
      "sample --algo pc,mc,pc+rs,exactZ --fn 'linear:beta=0.5,d=1' --n 64,512 --metric energy2,w1,tv --ref-samples 2000 "
      "--reps 3 --seed 9"};
  bool ok = true;
  std::size_t bytes = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::string out[2];
    for (int threads : {1, 2}) {
      const auto path = dir / ("run" + std::to_string(c) + "_t" + std::to_string(threads) + ".csv");
      const std::string cmd = "GIBBS_BENCH_THREADS=" + std::to_string(threads) + " '" + bench + "' " + commands[c] +
                              " --out '" + path.string() + "'";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
      out[threads - 1] = slurp(path);
    }
    ok = ok && !out[0].empty() && out[0] == out[1];
    bytes += out[0].size();
  }
  std::filesystem::remove_all(dir);
  return {ok, std::to_string(commands.size()) + " specs, " + std::to_string(bytes) + " bytes, 1 vs 2 threads " +
                  (ok ? "identical" : "differ")};
}

std::vector<Criterion> criteria() {
  return {
      {"oracle_suite", 60, oracle_suite},
      {"mixture_law", 300, mixture_law},
      {"mc_bound_domination", 600, mc_bound_domination},
      {"slopes_optimization_regime", 1200, slopes_optimization_regime},
      {"slopes_quadrature_regime", 1200, slopes_quadrature_regime},
      {"mc_sampling_lower_bound", 120, mc_sampling_lower_bound},
      {"known_normalization_exactness", 120, known_normalization_exactness},
      {"ti_unbiasedness", 300, ti_unbiasedness},
      {"bisection", 300, bisection},
      {"sampler_ordering", 1800, sampler_ordering},
      {"determinism", 120, determinism},
  };
}

}  // namespace

int main(int argc, char** argv) {
  const auto all = criteria();
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--list") {
      for (const auto& c : all) std::cout << c.id << '\n';
      return 0;
    }
    if (arg == "--only" && i + 1 < argc) {
      only.emplace_back(argv[++i]);
      continue;
    }
    std::cerr << "usage: acceptance [--list] [--only <id>]...\n";
    return 2;
  }
  for (const auto& id : only)
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.id == id; })) {
      std::cerr << "unknown criterion '" << id << "'\n";
      return 2;
    }

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.id << " [" << fmt(secs, 3) << " s of " << c.limit_s << " s"
              << (in_time ? "" : ", too slow") << "]: " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
