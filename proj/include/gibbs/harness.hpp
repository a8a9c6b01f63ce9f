#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/grid_model.hpp"
#include "gibbs/log_partition.hpp"
#include "gibbs/metrics.hpp"
#include "gibbs/quadrature.hpp"
#include "gibbs/registry.hpp"
#include "gibbs/samplers.hpp"

namespace gibbs {

enum class Mode { logpartition, sample };

struct ExperimentSpec {
  Mode mode = Mode::logpartition;
  std::vector<std::string> algorithms;
  std::vector<std::string> functions;
  std::vector<std::uint64_t> budgets;
  std::uint64_t reps = 1001;
  std::uint64_t base_seed = 0;
  std::vector<std::string> metrics{"energy2"};
  std::uint64_t reference_samples = 100000;
  /// Fill wall_ns. Off by default: timings would break byte-identical output.
  bool timing = false;
  /// Worker threads; 0 means worker_count().
  std::size_t threads = 0;
};

struct RunRecord {
  std::string algorithm;
  std::string function;
  double beta = 0.0;
  std::size_t d = 0;
  std::uint64_t n_budget = 0;
  std::uint64_t n_used = 0;
  std::uint64_t rep = 0;
  std::uint64_t seed = 0;
  std::optional<double> value;
  std::optional<double> error;
  /// "L" for log-partition estimates, the metric id for samples; a failed
  /// run carries "<metric>!<ErrorKind>" and no value.
  std::string metric;
  std::optional<std::int64_t> wall_ns;
};

inline RunRecord make_record(std::string algorithm, const NamedFunction& nf, std::uint64_t n, std::uint64_t rep,
                             std::uint64_t seed) {
  RunRecord r;
  r.algorithm = std::move(algorithm);
  r.function = nf.id;
  r.beta = nf.beta;
  r.d = nf.f.dim();
  r.n_budget = n;
  r.rep = rep;
  r.seed = seed;
  return r;
}

/// Algorithm id of the self-distance rows of a sampling sweep.
inline constexpr const char* kCeilingId = "ceiling";
inline constexpr const char* kReferenceId = "reference";

// ---------------------------------------------------------------------------
// Budget grammar: "1e3:1e6:log8" (8 log-spaced values, endpoints included,
// rounded to integers, duplicates dropped), "64,128,256", or a single value.

inline std::uint64_t parse_count(std::string_view text) {
  const double v = detail::parse_real(text, "budget");
  if (!(v >= 1.0 && v <= 9.0e15) || v != std::floor(v))
    throw UsageError("budget must be a positive integer, got '" + std::string(text) + "'");
  return static_cast<std::uint64_t>(v);
}

inline std::vector<std::uint64_t> parse_budgets(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3 || parts[2].rfind("log", 0) != 0) throw UsageError("budget range must look like 1e3:1e6:log8");
    const std::uint64_t lo = parse_count(parts[0]);
    const std::uint64_t hi = parse_count(parts[1]);
    const std::uint64_t k = parse_count(std::string_view(parts[2]).substr(3));
    if (hi < lo) throw UsageError("budget range must be increasing");
    if (k == 1 || lo == hi) {
      out.push_back(lo);
    } else {
      const double a = std::log(static_cast<double>(lo)), b = std::log(static_cast<double>(hi));
      for (std::uint64_t i = 0; i < k; ++i) {
        const auto v = static_cast<std::uint64_t>(
            std::llround(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1))));
        const std::uint64_t clamped = i + 1 == k ? hi : std::clamp(v, lo, hi);
        if (out.empty() || clamped > out.back()) out.push_back(clamped);
      }
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_count(p));
    if (out.empty()) throw UsageError("empty budget list");
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i] <= out[i - 1]) throw UsageError("budgets must be strictly increasing");
  }
  return out;
}

inline void validate(const ExperimentSpec& spec) {
  if (spec.reps < 1) throw UsageError("--reps must be >= 1");
  if (spec.algorithms.empty()) throw UsageError("no algorithm given");
  if (spec.functions.empty()) throw UsageError("no function given");
  if (spec.budgets.empty()) throw UsageError("no budget given");
  for (std::size_t i = 1; i < spec.budgets.size(); ++i)
    if (spec.budgets[i] <= spec.budgets[i - 1]) throw UsageError("budgets must be strictly increasing");
  const auto& known = spec.mode == Mode::logpartition ? log_partition_algorithms() : sampler_ids();
  for (const auto& a : spec.algorithms)
    if (std::find(known.begin(), known.end(), a) == known.end()) throw UsageError("unknown algorithm '" + a + "'");
  for (const auto& f : spec.functions) resolve_function(f);
  if (spec.mode == Mode::sample) {
    if (spec.metrics.empty()) throw UsageError("no metric given");
    for (const auto& m : spec.metrics)
      if (std::find(metric_ids().begin(), metric_ids().end(), m) == metric_ids().end())
        throw UsageError("unknown metric '" + m + "'");
    if (spec.reference_samples < 1) throw UsageError("--ref-samples must be >= 1");
  }
}

/// Short name of the library error behind a failed run.
inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const BudgetExhausted*>(&e)) return "BudgetExhausted";
  if (dynamic_cast<const EnvelopeViolation*>(&e)) return "EnvelopeViolation";
  if (dynamic_cast<const MissingOracle*>(&e)) return "MissingOracle";
  if (dynamic_cast<const PreconditionViolated*>(&e)) return "PreconditionViolated";
  if (dynamic_cast<const ShapeMismatch*>(&e)) return "ShapeMismatch";
  if (dynamic_cast<const UnsupportedDimension*>(&e)) return "UnsupportedDimension";
  return "Error";
}

namespace detail {

inline std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
}

inline void sort_records(std::vector<RunRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.algorithm, a.n_budget, a.rep, a.function, a.metric) <
           std::tie(b.algorithm, b.n_budget, b.rep, b.function, b.metric);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sweeps

/// R records per (function, algorithm, n) with error = |estimate - L_f|,
/// L_f from reference_log_partition. The grid estimator is deterministic,
/// so it runs once per (function, n) and its result is repeated per rep.
inline std::vector<RunRecord> run_logpartition_sweep(const ExperimentSpec& spec) {
  validate(spec);
  std::vector<NamedFunction> fns;
  std::vector<double> reference;
  for (const auto& id : spec.functions) {
    fns.push_back(resolve_function(id));
    reference.push_back(reference_log_partition(fns.back().f));
  }
  struct Task {
    std::size_t fn, algo, budget;
    std::uint64_t rep;
  };
  std::vector<Task> tasks;
  for (std::size_t fi = 0; fi < fns.size(); ++fi)
    for (std::size_t a = 0; a < spec.algorithms.size(); ++a)
      for (std::size_t b = 0; b < spec.budgets.size(); ++b)
        for (std::uint64_t r = 0; r < spec.reps; ++r) tasks.push_back({fi, a, b, r});

  std::vector<RunRecord> records(tasks.size());
  parallel_for(
      tasks.size(),
      [&](std::size_t t) {
        const Task& task = tasks[t];
        const auto& nf = fns[task.fn];
        const auto& algo = spec.algorithms[task.algo];
        const std::uint64_t n = spec.budgets[task.budget];
        RunRecord& rec = records[t];
        rec = make_record(algo, nf, n, task.rep, derive_seed(spec.base_seed, algo, n, task.rep));
        rec.metric = "L";
        if (algo == "pc" && task.rep > 0) return;  // filled from rep 0 below
        const auto t0 = std::chrono::steady_clock::now();
        try {
          RandomStream rng(rec.seed);
          const auto est = estimate_log_partition(algo, nf.f, n, rng);
          rec.n_used = est.evals_used;
          rec.value = est.value;
          rec.error = std::abs(est.value - reference[task.fn]);
        } catch (const Error& e) {
          rec.metric = "L!" + error_kind(e);
        }
        if (spec.timing) rec.wall_ns = detail::elapsed_ns(t0);
      },
      spec.threads ? spec.threads : worker_count());

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (spec.algorithms[tasks[t].algo] != "pc" || tasks[t].rep == 0) continue;
    const RunRecord& first = records[t - tasks[t].rep];
    RunRecord& rec = records[t];
    rec.n_used = first.n_used;
    rec.value = first.value;
    rec.error = first.error;
    rec.metric = first.metric;
    rec.wall_ns = first.wall_ns;
  }
  detail::sort_records(records);
  return records;
}

/// Draws `count` points from the exact sampler of f.
inline EmpiricalBatch exact_batch(const TargetFunction& f, std::uint64_t count, std::uint64_t seed,
                                  const std::string& label) {
  RandomStream rng(seed);
  std::vector<double> coords(count * f.dim());
  for (std::uint64_t i = 0; i < count; ++i) f.sample_exact(rng, std::span<double>(coords.data() + i * f.dim(), f.dim()));
  return EmpiricalBatch(f.dim(), std::move(coords), label);
}

/// Histogram resolution for tv/suplog: about 100 expected points per cell.
inline std::size_t histogram_cells_per_axis(std::uint64_t samples, std::size_t d) {
  return std::max<std::uint64_t>(1, integer_root(std::max<std::uint64_t>(1, samples / 100), d));
}

namespace detail {

// Metric values of one batch against the reference of its rep.
struct MetricContext {
  const TargetFunction* f;
  const PreparedBatch* reference;
  const GridApproximation* masses;  // null when cell masses are unavailable
};

inline double evaluate_metric(const std::string& metric, const EmpiricalBatch& batch, const PreparedBatch& prepared,
                              const MetricContext& ctx) {
  if (metric == "energy2") return energy_distance_sq(prepared, *ctx.reference);
  if (metric == "w1") return empirical_w1_1d(prepared, *ctx.reference);
  if (!ctx.masses) throw MissingOracle("exact cell masses need an affine target: " + ctx.f->label());
  if (metric == "tv") return cell_histogram_tv(batch, *ctx.masses);
  return cell_histogram_sup_log(batch, *ctx.masses);
}

}  // namespace detail

/// For each (function, algorithm, n, rep): reference_samples draws from the
/// algorithm, each with a fresh budget n (the grid of "pc" is shared by all
/// draws), compared with an exact batch of the same size that is shared by
/// every algorithm of the same rep. n_used is the largest per-draw cost.
/// Three extra "ceiling" records per function and metric hold the distance
/// between two independent exact batches.
inline std::vector<RunRecord> run_sampling_sweep(const ExperimentSpec& spec) {
  validate(spec);
  const std::size_t threads = spec.threads ? spec.threads : worker_count();
  const std::uint64_t count = spec.reference_samples;
  std::vector<NamedFunction> fns;
  std::vector<std::optional<GridApproximation>> masses;
  for (const auto& id : spec.functions) {
    fns.push_back(resolve_function(id));
    const auto& f = fns.back().f;
    if (f.affine())
      masses.push_back(cell_mass_grid(f, histogram_cells_per_axis(count, f.dim())));
    else
      masses.push_back(std::nullopt);
  }
  const auto& metrics = spec.metrics;
  std::vector<RunRecord> records;

  // Self-distance ceiling.
  for (std::size_t fi = 0; fi < fns.size(); ++fi) {
    const auto& nf = fns[fi];
    std::vector<std::vector<RunRecord>> rows(3);
    parallel_for(
        3,
        [&](std::size_t k) {
          const auto t0 = std::chrono::steady_clock::now();
          RunRecord base = make_record(kCeilingId, nf, 0, k, derive_seed(spec.base_seed, kCeilingId, 0, k));
          try {
            const auto a = exact_batch(nf.f, count, base.seed, "exact");
            const auto b = exact_batch(nf.f, count, mix64(base.seed), "exact");
            const PreparedBatch pa(a), pb(b);
            const detail::MetricContext ctx{&nf.f, &pb, masses[fi] ? &*masses[fi] : nullptr};
            for (const auto& m : metrics) {
              RunRecord r = base;
              r.metric = m;
              try {
                r.value = detail::evaluate_metric(m, a, pa, ctx);
              } catch (const Error& e) {
                r.metric = m + "!" + error_kind(e);
              }
              if (spec.timing) r.wall_ns = detail::elapsed_ns(t0);
              rows[k].push_back(std::move(r));
            }
          } catch (const Error& e) {
            for (const auto& m : metrics) {
              RunRecord r = base;
              r.metric = m + "!" + error_kind(e);
              rows[k].push_back(std::move(r));
            }
          }
        },
        threads);
    for (auto& v : rows)
      for (auto& r : v) records.push_back(std::move(r));
  }

  struct Task {
    std::size_t algo, budget;
  };
  std::vector<Task> tasks;
  for (std::size_t a = 0; a < spec.algorithms.size(); ++a)
    for (std::size_t b = 0; b < spec.budgets.size(); ++b) tasks.push_back({a, b});

  for (std::size_t fi = 0; fi < fns.size(); ++fi) {
    const auto& nf = fns[fi];
    for (std::uint64_t rep = 0; rep < spec.reps; ++rep) {
      std::optional<EmpiricalBatch> ref;
      std::optional<PreparedBatch> ref_prepared;
      std::string ref_failure;
      try {
        ref.emplace(exact_batch(nf.f, count, derive_seed(spec.base_seed, kReferenceId, 0, rep), "reference"));
        ref_prepared.emplace(*ref);
        if (nf.f.dim() > 1 && std::find(metrics.begin(), metrics.end(), "energy2") != metrics.end())
          ref_prepared->self_sum();  // computed once, before the workers share it
      } catch (const Error& e) {
        ref_failure = error_kind(e);
      }
      std::vector<std::vector<RunRecord>> rows(tasks.size());
      parallel_for(
          tasks.size(),
          [&](std::size_t t) {
            const auto& algo = spec.algorithms[tasks[t].algo];
            const std::uint64_t n = spec.budgets[tasks[t].budget];
            const auto t0 = std::chrono::steady_clock::now();
            RunRecord base = make_record(algo, nf, n, rep, derive_seed(spec.base_seed, algo, n, rep));
            auto fail = [&](const std::string& kind) {
              for (const auto& m : metrics) {
                RunRecord r = base;
                r.metric = m + "!" + kind;
                rows[t].push_back(std::move(r));
              }
            };
            if (!ref_prepared) return fail(ref_failure);
            try {
              const Sampler sampler = make_sampler(algo, nf.f, n);
              RandomStream rng(base.seed);
              const std::size_t d = nf.f.dim();
              std::vector<double> coords(count * d);
              std::uint64_t used = 0;
              for (std::uint64_t i = 0; i < count; ++i) {
                const SamplerOutcome out = sampler(rng);
                std::copy(out.point.begin(), out.point.end(), coords.begin() + static_cast<std::ptrdiff_t>(i * d));
                used = std::max(used, out.evals_used);
              }
              base.n_used = used;
              const EmpiricalBatch batch(d, std::move(coords), algo);
              const PreparedBatch prepared(batch);
              const detail::MetricContext ctx{&nf.f, &*ref_prepared, masses[fi] ? &*masses[fi] : nullptr};
              for (const auto& m : metrics) {
                RunRecord r = base;
                r.metric = m;
                try {
                  r.value = detail::evaluate_metric(m, batch, prepared, ctx);
                } catch (const Error& e) {
                  r.metric = m + "!" + error_kind(e);
                }
                if (spec.timing) r.wall_ns = detail::elapsed_ns(t0);
                rows[t].push_back(std::move(r));
              }
            } catch (const Error& e) {
              fail(error_kind(e));
            }
          },
          threads);
      for (auto& v : rows)
        for (auto& r : v) records.push_back(std::move(r));
    }
  }
  detail::sort_records(records);
  return records;
}

inline std::vector<RunRecord> run_sweep(const ExperimentSpec& spec) {
  return spec.mode == Mode::logpartition ? run_logpartition_sweep(spec) : run_sampling_sweep(spec);
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvHeader = "algorithm,function,beta,d,n_budget,n_used,rep,seed,value,error,metric,wall_ns";

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Records in (algorithm, n_budget, rep) order, LF line ends.
inline void write_csv(std::vector<RunRecord> records, std::ostream& os) {
  detail::sort_records(records);
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << csv_field(r.algorithm) << ',' << csv_field(r.function) << ',' << format_double(r.beta) << ',' << r.d << ','
       << r.n_budget << ',' << r.n_used << ',' << r.rep << ',' << r.seed << ','
       << (r.value ? format_double(*r.value) : "") << ',' << (r.error ? format_double(*r.error) : "") << ','
       << csv_field(r.metric) << ',' << (r.wall_ns ? std::to_string(*r.wall_ns) : "") << '\n';
  }
}

/// Writes to `path`, or to standard output for "-".
inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  if (path == "-") {
    write_csv(records, std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_csv(records, os);
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Summaries used by the recipes and the acceptance checks

/// Lower median of `value` (or `error` for log-partition rows) over reps, for
/// the rows matching (algorithm, function, n, metric).
inline std::optional<double> median_of(const std::vector<RunRecord>& records, const std::string& algorithm,
                                       const std::string& function, std::uint64_t n, const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : records) {
    if (r.algorithm != algorithm || r.function != function || r.n_budget != n || r.metric != metric) continue;
    const auto& x = metric == "L" ? r.error : r.value;
    if (!x) return std::nullopt;
    v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  return lower_median(std::move(v));
}

/// Named reproduction recipes: "fig1", "fig2", "fig3".
inline ExperimentSpec recipe(const std::string& name) {
  ExperimentSpec s;
  if (name == "fig1") {
    s.mode = Mode::logpartition;
    s.algorithms = {"mc"};
    s.functions = {"linear:beta=1,d=1", "linear:beta=10,d=1", "linear:beta=100,d=1", "linear:beta=1000,d=1"};
    s.budgets = parse_budgets("16:1048576:log17");
    s.reps = 1001;
    s.base_seed = 1;
  } else if (name == "fig2") {
    s.mode = Mode::logpartition;
    s.algorithms = {"mc", "pc", "pc+mc"};
    s.functions = {"linear:beta=0.1,d=3", "linear:beta=40,d=3", "linear:beta=10000,d=3"};
    s.budgets = parse_budgets("1e3:1e6:log8");
    s.reps = 101;
    s.base_seed = 42;
  } else if (name == "fig3") {
    s.mode = Mode::sample;
    s.algorithms = {"pc", "mc", "rs", "pc+mc", "pc+rs"};
    s.functions = {"linear:beta=15,d=3"};
    s.budgets = parse_budgets("64:262144:log13");
    s.metrics = {"energy2"};
    s.reference_samples = 100000;
    s.reps = 11;
    s.base_seed = 7;
  } else {
    throw UsageError("unknown recipe '" + name + "' (expected fig1, fig2 or fig3)");
  }
  return s;
}

}  // namespace gibbs
