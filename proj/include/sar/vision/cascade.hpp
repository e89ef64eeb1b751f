#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/error.hpp"
#include "sar/vision/frame.hpp"
#include "sar/vision/image_io.hpp"

namespace sar::vision {

struct WeightedRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  double weight = 0.0;
};

struct WeakClassifier {
  std::vector<WeightedRect> feature;
  double split_threshold = 0.0;
  double pass_value = 0.0;
  double fail_value = 0.0;
};

struct Stage {
  double stage_threshold = 0.0;
  std::vector<WeakClassifier> weak;
};

struct Cascade {
  int base_width = 24;
  int base_height = 24;
  std::vector<Stage> stages;
};

/// Sentinels for thresholds that always or never pass. JSON carries them as
/// "-inf"/"inf" strings or as the extreme finite doubles.
inline constexpr double kAlwaysPass = std::numeric_limits<double>::lowest();
inline constexpr double kNeverPass = std::numeric_limits<double>::max();

/// Round-half-up; every rect-scaling path goes through this.
inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

inline void validate(const Cascade& c) {
  if (c.base_width < 1 || c.base_height < 1) throw Error(ErrorKind::Config, "base window must be positive");
  if (c.stages.empty()) throw Error(ErrorKind::Config, "cascade has no stages");
  for (const auto& stage : c.stages) {
    if (stage.weak.empty()) throw Error(ErrorKind::Config, "stage has no weak classifiers");
    for (const auto& weak : stage.weak) {
      if (weak.feature.size() < 2 || weak.feature.size() > 3) {
        throw Error(ErrorKind::Config, "feature must have 2 or 3 rects");
      }
      for (const auto& r : weak.feature) {
        if (r.x < 0 || r.y < 0 || r.w < 0 || r.h < 0 || r.x + r.w > c.base_width ||
            r.y + r.h > c.base_height) {
          throw Error(ErrorKind::Config, "feature rect outside base window");
        }
      }
    }
  }
}

struct Window {
  int x = 0;
  int y = 0;
  double scale = 1.0;
};

struct WindowResult {
  bool accepted = false;
  double score = 0.0;
};

/// Base-window rect mapped to a scaled window; clipped so rounding never
/// pushes it past the scaled window edge.
inline Rect scale_rect(const WeightedRect& r, double scale, int window_w, int window_h) {
  Rect out{round_half_up(r.x * scale), round_half_up(r.y * scale), round_half_up(r.w * scale),
           round_half_up(r.h * scale)};
  if (out.x > window_w) out.x = window_w;
  if (out.y > window_h) out.y = window_h;
  if (out.x + out.w > window_w) out.w = window_w - out.x;
  if (out.y + out.h > window_h) out.h = window_h - out.y;
  return out;
}

inline int scaled_extent(int base, double scale) { return round_half_up(base * scale); }

inline double window_sigma(std::int64_t sum, std::int64_t squared_sum, std::int64_t area) {
  const double mean = static_cast<double>(sum) / static_cast<double>(area);
  const double mean_sq = static_cast<double>(squared_sum) / static_cast<double>(area);
  const double sigma = std::sqrt(std::max(mean_sq - mean * mean, 0.0));
  return sigma < 1.0 ? 1.0 : sigma;
}

/// Weak-classifier score: pass_value when the variance-normalised feature is
/// at or above split*scale^2, fail_value otherwise. A stage rejects when its
/// sum falls below stage_threshold; score is the margin of the last stage
/// evaluated.
inline WindowResult eval_window(const Cascade& cascade, const IntegralPair& ip, const Window& win) {
  if (!(win.scale >= 1.0)) throw Error(ErrorKind::Value, "window scale must be >= 1");
  const int ww = scaled_extent(cascade.base_width, win.scale);
  const int wh = scaled_extent(cascade.base_height, win.scale);
  if (win.x < 0 || win.y < 0 || win.x + ww > ip.width() || win.y + wh > ip.height()) {
    throw Error(ErrorKind::Bounds, "window outside frame");
  }
  const std::int64_t area = static_cast<std::int64_t>(ww) * wh;
  const double sigma = window_sigma(rect_sum(ip, win.x, win.y, ww, wh),
                                    rect_squared_sum(ip, win.x, win.y, ww, wh), area);
  const double scale_sq = win.scale * win.scale;

  WindowResult result{true, 0.0};
  for (const auto& stage : cascade.stages) {
    double stage_sum = 0.0;
    for (const auto& weak : stage.weak) {
      double feature = 0.0;
      for (const auto& r : weak.feature) {
        const Rect s = scale_rect(r, win.scale, ww, wh);
        feature += r.weight * static_cast<double>(rect_sum(ip, win.x + s.x, win.y + s.y, s.w, s.h));
      }
      stage_sum += (feature / sigma >= weak.split_threshold * scale_sq) ? weak.pass_value
                                                                        : weak.fail_value;
    }
    result.score = stage_sum - stage.stage_threshold;
    if (stage_sum < stage.stage_threshold) {
      result.accepted = false;
      return result;
    }
  }
  return result;
}

// ---- canonical JSON model format ----

namespace detail {

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return kAlwaysPass;
    if (s == "inf" || s == "+inf") return kNeverPass;
    throw Error(ErrorKind::Parse, "bad threshold literal: " + s);
  }
  return j.get<double>();
}

inline nlohmann::json threshold_to_json(double t) {
  if (t <= kAlwaysPass) return "-inf";
  if (t >= kNeverPass) return "inf";
  return t;
}

}  // namespace detail

inline Cascade cascade_from_json(const nlohmann::json& j) {
  Cascade c;
  try {
    const auto& base = j.at("base_window");
    c.base_width = base.at(0).get<int>();
    c.base_height = base.at(1).get<int>();
    for (const auto& js : j.at("stages")) {
      Stage stage;
      stage.stage_threshold = detail::threshold_from_json(js.at("threshold"));
      for (const auto& jw : js.at("weak")) {
        WeakClassifier weak;
        for (const auto& jr : jw.at("rects")) {
          if (jr.size() != 5) throw Error(ErrorKind::Parse, "rect must be [x,y,w,h,weight]");
          weak.feature.push_back({jr[0].get<int>(), jr[1].get<int>(), jr[2].get<int>(),
                                  jr[3].get<int>(), jr[4].get<double>()});
        }
        weak.split_threshold = jw.at("split").get<double>();
        weak.pass_value = jw.at("pass").get<double>();
        weak.fail_value = jw.at("fail").get<double>();
        stage.weak.push_back(std::move(weak));
      }
      c.stages.push_back(std::move(stage));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("cascade JSON: ") + e.what());
  }
  validate(c);
  return c;
}

inline nlohmann::json cascade_to_json(const Cascade& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& stage : c.stages) {
    nlohmann::json weak_list = nlohmann::json::array();
    for (const auto& weak : stage.weak) {
      nlohmann::json rects = nlohmann::json::array();
      for (const auto& r : weak.feature) rects.push_back({r.x, r.y, r.w, r.h, r.weight});
      weak_list.push_back({{"rects", rects},
                           {"split", weak.split_threshold},
                           {"pass", weak.pass_value},
                           {"fail", weak.fail_value}});
    }
    stages.push_back({{"threshold", detail::threshold_to_json(stage.stage_threshold)},
                      {"weak", weak_list}});
  }
  return {{"base_window", {c.base_width, c.base_height}}, {"stages", stages}};
}

inline Cascade load_cascade(const std::filesystem::path& path) {
  const auto text = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return cascade_from_json(j);
}

}  // namespace sar::vision
