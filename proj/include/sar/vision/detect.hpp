#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "sar/vision/cascade.hpp"
#include "sar/vision/frame.hpp"

namespace sar::vision {

struct DetectParams {
  double scale_factor = 1.1;
  int step = 1;
  int min_size = 0;
  int min_neighbors = 3;
};

struct DetectionBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  double score = 0.0;
  int neighbors = 1;
};

struct RawHit {
  Window window;
  Rect box;
  double score = 0.0;
};

inline double iou(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = static_cast<double>(std::max(0, x1 - x0)) * std::max(0, y1 - y0);
  const double uni = static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Scales base*scale_factor^k for k = 0,1,... while the scaled window fits.
inline std::vector<double> scan_scales(const Cascade& cascade, int frame_w, int frame_h,
                                       const DetectParams& params) {
  if (!(params.scale_factor > 1.0)) throw Error(ErrorKind::Value, "scale_factor must be > 1");
  std::vector<double> scales;
  for (double s = 1.0;; s *= params.scale_factor) {
    const int ww = scaled_extent(cascade.base_width, s);
    const int wh = scaled_extent(cascade.base_height, s);
    if (ww > frame_w || wh > frame_h) break;
    if (ww >= params.min_size && wh >= params.min_size) scales.push_back(s);
  }
  return scales;
}

/// Every accepted window, in scan order (scale, then row, then column).
inline std::vector<RawHit> scan_windows(const Cascade& cascade, const IntegralPair& ip,
                                        const DetectParams& params) {
  std::vector<RawHit> hits;
  for (const double s : scan_scales(cascade, ip.width(), ip.height(), params)) {
    const int ww = scaled_extent(cascade.base_width, s);
    const int wh = scaled_extent(cascade.base_height, s);
    const int stride = std::max(1, round_half_up(params.step * s));
    for (int y = 0; y + wh <= ip.height(); y += stride) {
      for (int x = 0; x + ww <= ip.width(); x += stride) {
        const Window win{x, y, s};
        const auto r = eval_window(cascade, ip, win);
        if (r.accepted) hits.push_back({win, Rect{x, y, ww, wh}, r.score});
      }
    }
  }
  return hits;
}

/// Transitive IoU >= 0.5 clustering. Returns, per cluster, the member indices
/// in ascending order; clusters ordered by their first member.
inline std::vector<std::vector<std::size_t>> cluster_hits(const std::vector<RawHit>& hits,
                                                          double min_iou = 0.5) {
  std::vector<std::size_t> parent(hits.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (std::size_t i = 0; i < hits.size(); ++i) {
    for (std::size_t j = i + 1; j < hits.size(); ++j) {
      if (iou(hits[i].box, hits[j].box) >= min_iou) {
        const auto a = find(i);
        const auto b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::ptrdiff_t> slot(hits.size(), -1);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(clusters.size());
      clusters.emplace_back();
    }
    clusters[static_cast<std::size_t>(slot[root])].push_back(i);
  }
  return clusters;
}

/// Mean box per cluster (round-half-up), neighbors = cluster size, score =
/// summed member margins. Sorted by descending score; equal scores keep
/// cluster order.
inline std::vector<DetectionBox> group_hits(const std::vector<RawHit>& hits, int min_neighbors,
                                            int frame_w, int frame_h) {
  std::vector<DetectionBox> boxes;
  for (const auto& members : cluster_hits(hits)) {
    if (static_cast<int>(members.size()) < min_neighbors) continue;
    double sx = 0, sy = 0, sw = 0, sh = 0, score = 0;
    for (const auto i : members) {
      sx += hits[i].box.x;
      sy += hits[i].box.y;
      sw += hits[i].box.w;
      sh += hits[i].box.h;
      score += hits[i].score;
    }
    const double n = static_cast<double>(members.size());
    DetectionBox b;
    b.x = std::clamp(round_half_up(sx / n), 0, frame_w - 1);
    b.y = std::clamp(round_half_up(sy / n), 0, frame_h - 1);
    b.w = std::clamp(round_half_up(sw / n), 1, frame_w - b.x);
    b.h = std::clamp(round_half_up(sh / n), 1, frame_h - b.y);
    b.score = score;
    b.neighbors = static_cast<int>(members.size());
    boxes.push_back(b);
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const DetectionBox& a, const DetectionBox& b) { return a.score > b.score; });
  return boxes;
}

inline std::vector<DetectionBox> detect_faces(const Cascade& cascade, const GrayFrame& frame,
                                              const DetectParams& params = {}) {
  if (frame.width() < cascade.base_width || frame.height() < cascade.base_height) return {};
  const auto ip = compute_integral(frame);
  return group_hits(scan_windows(cascade, ip, params), params.min_neighbors, frame.width(),
                    frame.height());
}

inline nlohmann::json to_json(const DetectionBox& b) {
  nlohmann::json score = std::isfinite(b.score) ? nlohmann::json(b.score) : nlohmann::json(nullptr);
  return {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"score", score}, {"neighbors", b.neighbors}};
}

}  // namespace sar::vision
