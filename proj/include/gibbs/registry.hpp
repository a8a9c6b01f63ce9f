#pragma once

#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gibbs/core.hpp"
#include "gibbs/target_functions.hpp"

namespace gibbs {

/// A registry function resolved from its string id.
struct NamedFunction {
  std::string id;
  TargetFunction f;
  /// The inverse temperature reported in CSV output (amplitude for bumps).
  double beta = 0.0;
};

namespace detail {

inline double parse_real(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw UsageError("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
  return v;
}

inline std::size_t parse_dimension(std::string_view text) {
  const double v = parse_real(text, "d");
  if (!(v >= 1.0 && v <= 64.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
    throw UsageError("d must be an integer in [1, 64], got '" + std::string(text) + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Resolves ids of the form
///   linear:beta=40,d=3    quad:beta=1,d=2    cos:beta=1,d=1,z=0.5
///   bump:z=0.5,delta=0.1,amp=2,d=1
/// Missing keys take the defaults beta=1, d=1, z=0.5, delta=0.25, amp=1;
/// z is a scalar repeated on every axis.
inline NamedFunction resolve_function(const std::string& id) {
  const auto colon = id.find(':');
  const std::string family = id.substr(0, colon);
  std::map<std::string, std::string, std::less<>> params;
  if (colon != std::string::npos) {
    std::string_view rest(id);
    rest.remove_prefix(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0) throw UsageError("malformed parameter '" + std::string(item) + "' in " + id);
      if (!params.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1))).second)
        throw UsageError("duplicate parameter in " + id);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  auto take = [&](const char* key, std::string fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    std::string v = it->second;
    params.erase(it);
    return v;
  };
  auto real = [&](const char* key, const char* fallback) { return detail::parse_real(take(key, fallback), key); };

  NamedFunction out{id, linear_sum_function(0.0, 1), 0.0};
  if (family == "linear") {
    out.beta = real("beta", "1");
    out.f = linear_sum_function(out.beta, detail::parse_dimension(take("d", "1")));
  } else if (family == "quad") {
    out.beta = real("beta", "1");
    out.f = quadratic_sum_function(out.beta, detail::parse_dimension(take("d", "1")));
  } else if (family == "cos") {
    out.beta = real("beta", "1");
    const std::size_t d = detail::parse_dimension(take("d", "1"));
    out.f = cosine_sum_function(out.beta, std::vector<double>(d, real("z", "0.5")));
  } else if (family == "bump") {
    const double z = real("z", "0.5");
    const double delta = real("delta", "0.25");
    out.beta = real("amp", "1");
    const std::size_t d = detail::parse_dimension(take("d", "1"));
    if (!(delta > 0.0)) throw UsageError("bump delta must be > 0");
    out.f = bump_function(BumpSpec{std::vector<double>(d, z), delta}, out.beta);
  } else {
    throw UsageError("unknown function family '" + family + "' (expected linear, quad, cos or bump)");
  }
  if (!params.empty()) throw UsageError("unknown parameter '" + params.begin()->first + "' for " + family);
  out.f = out.f.with_label(id);
  return out;
}

}  // namespace gibbs
