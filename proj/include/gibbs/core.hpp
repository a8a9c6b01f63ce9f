#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gibbs {

/// A point of the unit cube [0,1]^d. The dimension is a runtime quantity.
using Point = std::vector<double>;

// Error hierarchy. Every failure the library reports derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetExhausted : Error {
  using Error::Error;
};
struct EnvelopeViolation : Error {
  using Error::Error;
};
struct MissingOracle : Error {
  using Error::Error;
};
struct PreconditionViolated : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct UnsupportedDimension : Error {
  using Error::Error;
};
struct UsageError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

/// SplitMix64 finalizer. Used for seed derivation only.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a of an identifier string.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of one repetition: a chained SplitMix64 over
/// (base_seed, fnv1a64(algorithm), n, rep). The chain is
///   s = mix64(base ^ mix64(hash ^ mix64(n ^ mix64(rep)))).
/// Streams derived this way are reproducible bit-for-bit with any
/// implementation of mix64 and std::mt19937_64.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view algorithm,
                                    std::uint64_t n, std::uint64_t rep) noexcept {
  return mix64(base_seed ^ mix64(fnv1a64(algorithm) ^ mix64(n ^ mix64(rep))));
}

/// Seeded uniform random stream over std::mt19937_64.
///
/// uniform() returns the top 53 bits of one engine output scaled into
/// [0, 1), so the stream is identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by rejection on the top bits (no modulo bias).
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  void fill_uniform(std::span<double> out) noexcept {
    for (double& v : out) v = uniform();
  }

  Point uniform_point(std::size_t dim) {
    Point x(dim);
    fill_uniform(x);
    return x;
  }

  /// Independent child stream, e.g. for an inner algorithm that must not
  /// perturb the caller's draws.
  RandomStream split(std::uint64_t tag) { return RandomStream(mix64(engine_() ^ mix64(tag))); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Counts oracle calls against a fixed limit.
class EvaluationBudget {
 public:
  explicit EvaluationBudget(std::uint64_t limit) : limit_(limit) {}

  std::uint64_t limit() const noexcept { return limit_; }
  std::uint64_t used() const noexcept { return used_; }
  std::uint64_t remaining() const noexcept { return limit_ - used_; }

  /// Reserves k evaluations; throws BudgetExhausted without consuming
  /// anything when fewer than k remain.
  void charge(std::uint64_t k) {
    if (k > remaining()) {
      throw BudgetExhausted("evaluation budget exhausted: requested " + std::to_string(k) +
                            ", remaining " + std::to_string(remaining()) + " of " +
                            std::to_string(limit_));
    }
    used_ += k;
  }

 private:
  std::uint64_t limit_;
  std::uint64_t used_ = 0;
};

/// Worker count: GIBBS_BENCH_THREADS when set to a positive integer,
/// otherwise the hardware concurrency.
inline std::size_t worker_count() {
  if (const char* env = std::getenv("GIBBS_BENCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to `workers` threads. Work items
/// are claimed dynamically, so body must write its result to a slot owned by
/// i; the first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         std::size_t workers = worker_count()) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gibbs
