#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sar/error.hpp"

namespace sar::session {

/// Nearest-rank percentile, p in (0, 100].
inline std::int64_t percentile(std::vector<std::int64_t> v, double p) {
  if (v.empty()) throw Error(ErrorKind::InsufficientData, "percentile of an empty sample");
  if (!(p > 0 && p <= 100)) throw Error(ErrorKind::Value, "percentile must be in (0, 100]");
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

inline constexpr std::size_t kLatencyBins = 15;

/// 1 s bins over 0-15 s; anything slower lands in the last bin.
inline std::array<int, kLatencyBins> latency_histogram(const std::vector<std::int64_t>& latencies_ms) {
  std::array<int, kLatencyBins> bins{};
  for (const auto ms : latencies_ms) {
    const auto b = static_cast<std::size_t>(std::max<std::int64_t>(ms, 0) / 1000);
    ++bins[std::min(b, kLatencyBins - 1)];
  }
  return bins;
}

inline nlohmann::json latency_summary(const std::vector<std::int64_t>& latencies_ms) {
  nlohmann::json j{{"turns", latencies_ms.size()}, {"histogram", latency_histogram(latencies_ms)},
                   {"bin_ms", 1000}};
  if (!latencies_ms.empty()) {
    j["p50_ms"] = percentile(latencies_ms, 50);
    j["p90_ms"] = percentile(latencies_ms, 90);
    j["min_ms"] = *std::min_element(latencies_ms.begin(), latencies_ms.end());
    j["max_ms"] = *std::max_element(latencies_ms.begin(), latencies_ms.end());
  }
  return j;
}

}  // namespace sar::session
