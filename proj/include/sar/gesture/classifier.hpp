#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/error.hpp"

namespace sar::gesture {

struct TrackSample {
  std::int64_t t = 0;
  double x = 0.0;
  double y = 0.0;
  bool alive = true;
};

struct Trajectory {
  int point_id = 0;
  std::vector<TrackSample> samples;
};

/// Timestamps strictly increasing; a dead sample is never followed by a live one.
inline void validate(const Trajectory& tr) {
  bool dead = false;
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    if (i > 0 && tr.samples[i].t <= tr.samples[i - 1].t) {
      throw Error(ErrorKind::Value, "trajectory timestamps must be strictly increasing");
    }
    if (dead && tr.samples[i].alive) throw Error(ErrorKind::Value, "trajectory revived after death");
    dead = dead || !tr.samples[i].alive;
  }
}

struct GestureParams {
  std::int64_t window_ms = 1500;
  double min_amplitude = 4.0;
  int min_reversals = 2;
  double axis_ratio = 2.0;
  double min_live_fraction = 0.5;
  /// Steps of the median path smaller than this do not count toward reversals.
  double velocity_deadband = 0.5;
};

inline void validate(const GestureParams& p) {
  if (p.window_ms <= 0 || !(p.min_amplitude > 0) || p.min_reversals < 1 || !(p.axis_ratio > 1.0) ||
      !(p.min_live_fraction > 0) || p.min_live_fraction > 1.0 || p.velocity_deadband < 0) {
    throw Error(ErrorKind::Config, "invalid gesture parameters");
  }
}

enum class GestureKind { None, Nod, Shake };

inline const char* to_string(GestureKind k) {
  switch (k) {
    case GestureKind::Nod: return "nod";
    case GestureKind::Shake: return "shake";
    case GestureKind::None: return "none";
  }
  return "none";
}

inline GestureKind gesture_kind_from_string(const std::string& s) {
  if (s == "nod") return GestureKind::Nod;
  if (s == "shake") return GestureKind::Shake;
  if (s == "none") return GestureKind::None;
  throw Error(ErrorKind::Parse, "unknown gesture kind: " + s);
}

struct GestureVerdict {
  GestureKind kind = GestureKind::None;
  double confidence = 0.0;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  friend bool operator==(const GestureVerdict&, const GestureVerdict&) = default;
};

inline nlohmann::json to_json(const GestureVerdict& v) {
  return {{"kind", to_string(v.kind)}, {"confidence", v.confidence}, {"window", {v.t_start, v.t_end}}};
}

inline GestureVerdict verdict_from_json(const nlohmann::json& j) {
  GestureVerdict v;
  v.kind = gesture_kind_from_string(j.at("kind").get<std::string>());
  v.confidence = j.value("confidence", 0.0);
  if (j.contains("window")) {
    v.t_start = j["window"].at(0).get<std::int64_t>();
    v.t_end = j["window"].at(1).get<std::int64_t>();
  }
  return v;
}

/// Per-axis motion statistics of the aggregated path.
struct AxisMotion {
  double amplitude = 0.0;
  int reversals = 0;
};

inline AxisMotion axis_motion(const std::vector<double>& path, double deadband) {
  AxisMotion m;
  if (path.empty()) return m;
  const auto [lo, hi] = std::minmax_element(path.begin(), path.end());
  m.amplitude = *hi - *lo;
  int last_sign = 0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double v = path[i] - path[i - 1];
    if (std::abs(v) < deadband) continue;
    const int sign = v > 0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++m.reversals;
    last_sign = sign;
  }
  return m;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MedianPath {
  std::vector<std::int64_t> t;
  std::vector<double> dx;
  std::vector<double> dy;
  double live_fraction = 0.0;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
};

/// Median displacement path over the trailing window_ms. Each point's
/// displacement is measured from its position at the window's first
/// timestamp; points not alive there are left out.
inline MedianPath median_path(const std::vector<Trajectory>& trajectories, std::int64_t window_ms) {
  std::optional<std::int64_t> t_first, t_last;
  for (const auto& tr : trajectories) {
    validate(tr);
    if (tr.samples.empty()) continue;
    t_first = std::min(t_first.value_or(tr.samples.front().t), tr.samples.front().t);
    t_last = std::max(t_last.value_or(tr.samples.back().t), tr.samples.back().t);
  }
  if (!t_first || *t_last - *t_first < window_ms) {
    throw Error(ErrorKind::InsufficientData, "trajectories cover less than the gesture window");
  }
  MedianPath out;
  out.t_end = *t_last;
  const std::int64_t cutoff = *t_last - window_ms;

  std::vector<std::int64_t> stamps;
  for (const auto& tr : trajectories)
    for (const auto& s : tr.samples)
      if (s.t >= cutoff) stamps.push_back(s.t);
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());
  out.t_start = stamps.front();

  // index each trajectory by timestamp
  std::vector<std::map<std::int64_t, const TrackSample*>> by_time(trajectories.size());
  std::vector<std::optional<std::pair<double, double>>> origin(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (const auto& s : trajectories[i].samples)
      if (s.t >= cutoff) by_time[i][s.t] = &s;
    const auto it = by_time[i].find(out.t_start);
    if (it != by_time[i].end() && it->second->alive) origin[i] = {it->second->x, it->second->y};
  }

  for (const auto t : stamps) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      if (!origin[i]) continue;
      const auto it = by_time[i].find(t);
      if (it == by_time[i].end() || !it->second->alive) continue;
      xs.push_back(it->second->x - origin[i]->first);
      ys.push_back(it->second->y - origin[i]->second);
    }
    if (xs.empty()) continue;
    out.t.push_back(t);
    out.dx.push_back(median(std::move(xs)));
    out.dy.push_back(median(std::move(ys)));
  }

  std::size_t alive_at_end = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto it = by_time[i].find(out.t_end);
    if (it != by_time[i].end() && it->second->alive) ++alive_at_end;
  }
  out.live_fraction = trajectories.empty() ? 0.0
                                           : static_cast<double>(alive_at_end) / static_cast<double>(trajectories.size());
  return out;
}

/// Nod: vertical amplitude >= min_amplitude, vertical >= axis_ratio x
/// horizontal, and at least min_reversals vertical direction changes. Shake
/// is the same test on the horizontal axis.
inline GestureVerdict classify_gesture(const std::vector<Trajectory>& trajectories, const GestureParams& params) {
  validate(params);
  const auto path = median_path(trajectories, params.window_ms);
  GestureVerdict v;
  v.t_start = path.t_start;
  v.t_end = path.t_end;
  if (path.live_fraction < params.min_live_fraction) return v;

  const auto mx = axis_motion(path.dx, params.velocity_deadband);
  const auto my = axis_motion(path.dy, params.velocity_deadband);
  const bool nod = my.amplitude >= params.min_amplitude && my.amplitude >= params.axis_ratio * mx.amplitude &&
                   my.reversals >= params.min_reversals;
  const bool shake = mx.amplitude >= params.min_amplitude && mx.amplitude >= params.axis_ratio * my.amplitude &&
                     mx.reversals >= params.min_reversals;
  if (nod && (!shake || my.amplitude >= mx.amplitude)) {
    v.kind = GestureKind::Nod;
    v.confidence = std::min(1.0, my.amplitude / (2.0 * params.min_amplitude));
  } else if (shake) {
    v.kind = GestureKind::Shake;
    v.confidence = std::min(1.0, mx.amplitude / (2.0 * params.min_amplitude));
  }
  return v;
}

}  // namespace sar::gesture
