#pragma once
// Brute-force reference implementations for the vision kernels. These work
// per pixel and never touch the integral tables.

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "sar/vision/cascade.hpp"
#include "sar/vision/detect.hpp"
#include "sar/vision/frame.hpp"

namespace sar::oracle {

inline vision::GrayFrame random_frame(std::mt19937& rng, int w, int h) {
  std::uniform_int_distribution<int> px(0, 255);
  vision::GrayFrame f(w, h);
  for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(px(rng));
  return f;
}

inline std::int64_t loop_sum(const vision::GrayFrame& f, int x, int y, int w, int h) {
  std::int64_t s = 0;
  for (int yy = y; yy < y + h; ++yy)
    for (int xx = x; xx < x + w; ++xx) s += f.at(xx, yy);
  return s;
}

inline std::int64_t loop_squared_sum(const vision::GrayFrame& f, int x, int y, int w, int h) {
  std::int64_t s = 0;
  for (int yy = y; yy < y + h; ++yy)
    for (int xx = x; xx < x + w; ++xx) s += static_cast<std::int64_t>(f.at(xx, yy)) * f.at(xx, yy);
  return s;
}

struct OracleWindow {
  int x, y;
  double scale;
};

/// Per-pixel cascade evaluator. Rounding uses lround (half away from zero),
/// which equals round-half-up for the non-negative values involved.
inline bool brute_eval(const vision::Cascade& c, const vision::GrayFrame& f, OracleWindow win,
                       double* score = nullptr) {
  const int ww = static_cast<int>(std::lround(c.base_width * win.scale));
  const int wh = static_cast<int>(std::lround(c.base_height * win.scale));
  const std::int64_t n = static_cast<std::int64_t>(ww) * wh;
  const double mean = static_cast<double>(loop_sum(f, win.x, win.y, ww, wh)) / static_cast<double>(n);
  const double mean_sq =
      static_cast<double>(loop_squared_sum(f, win.x, win.y, ww, wh)) / static_cast<double>(n);
  double sigma = std::sqrt(std::max(mean_sq - mean * mean, 0.0));
  if (sigma < 1.0) sigma = 1.0;
  double margin = 0.0;
  for (const auto& stage : c.stages) {
    double total = 0.0;
    for (const auto& weak : stage.weak) {
      double value = 0.0;
      for (const auto& r : weak.feature) {
        int rx = static_cast<int>(std::lround(r.x * win.scale));
        int ry = static_cast<int>(std::lround(r.y * win.scale));
        int rw = static_cast<int>(std::lround(r.w * win.scale));
        int rh = static_cast<int>(std::lround(r.h * win.scale));
        rx = std::min(rx, ww);
        ry = std::min(ry, wh);
        rw = std::min(rw, ww - rx);
        rh = std::min(rh, wh - ry);
        value += r.weight * static_cast<double>(loop_sum(f, win.x + rx, win.y + ry, rw, rh));
      }
      total += (value / sigma >= weak.split_threshold * win.scale * win.scale) ? weak.pass_value
                                                                               : weak.fail_value;
    }
    margin = total - stage.stage_threshold;
    if (total < stage.stage_threshold) {
      if (score) *score = margin;
      return false;
    }
  }
  if (score) *score = margin;
  return true;
}

/// Three stages of two-rect / three-rect Haar-like features on a 12x12 base
/// window. Thresholds put the per-stage pass rate near one half on noise.
inline vision::Cascade three_stage_cascade() {
  using vision::WeakClassifier;
  vision::Cascade c;
  c.base_width = 12;
  c.base_height = 12;
  c.stages.push_back({0.0,
                      {WeakClassifier{{{0, 0, 6, 12, 1.0}, {6, 0, 6, 12, -1.0}}, 0.0, 1.0, -1.0},
                       WeakClassifier{{{0, 0, 12, 6, 1.0}, {0, 6, 12, 6, -1.0}}, 0.0, 1.0, -1.0}}});
  c.stages.push_back(
      {-0.5,
       {WeakClassifier{{{0, 0, 4, 12, 1.0}, {4, 0, 4, 12, -2.0}, {8, 0, 4, 12, 1.0}}, 0.0, 0.5, -1.0},
        WeakClassifier{{{2, 2, 4, 4, 1.0}, {6, 6, 4, 4, -1.0}}, 2.0, 1.0, -0.25}}});
  c.stages.push_back({0.0,
                      {WeakClassifier{{{1, 1, 5, 5, -1.0}, {6, 6, 5, 5, 1.0}}, -1.0, 1.0, -1.0},
                       WeakClassifier{{{0, 3, 12, 3, 2.0}, {0, 6, 12, 3, -2.0}}, 0.5, 0.75, -0.5}}});
  return c;
}

/// Exhaustive scan with the brute evaluator, mirroring detect's scan rules.
inline std::vector<vision::Rect> brute_scan(const vision::Cascade& c, const vision::GrayFrame& f,
                                            const vision::DetectParams& p) {
  std::vector<vision::Rect> out;
  for (double s = 1.0;; s *= p.scale_factor) {
    const int ww = static_cast<int>(std::lround(c.base_width * s));
    const int wh = static_cast<int>(std::lround(c.base_height * s));
    if (ww > f.width() || wh > f.height()) break;
    if (ww < p.min_size || wh < p.min_size) continue;
    const int stride = std::max(1, static_cast<int>(std::lround(p.step * s)));
    for (int y = 0; y + wh <= f.height(); y += stride)
      for (int x = 0; x + ww <= f.width(); x += stride)
        if (brute_eval(c, f, {x, y, s})) out.push_back({x, y, ww, wh});
  }
  return out;
}

/// Connected components of the IoU >= 0.5 graph by breadth-first search.
inline std::vector<std::vector<std::size_t>> brute_components(const std::vector<vision::Rect>& boxes) {
  auto overlap = [](const vision::Rect& a, const vision::Rect& b) {
    double inter = 0;
    for (int y = std::max(a.y, b.y); y < std::min(a.y + a.h, b.y + b.h); ++y)
      for (int x = std::max(a.x, b.x); x < std::min(a.x + a.w, b.x + b.w); ++x) inter += 1;
    return inter / (a.w * a.h + b.w * b.h - inter);
  };
  std::vector<int> comp(boxes.size(), -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < boxes.size(); ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> members{s}, frontier{s};
    comp[s] = static_cast<int>(out.size());
    while (!frontier.empty()) {
      const auto i = frontier.back();
      frontier.pop_back();
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (comp[j] < 0 && overlap(boxes[i], boxes[j]) >= 0.5) {
          comp[j] = comp[s];
          members.push_back(j);
          frontier.push_back(j);
        }
      }
    }
    std::sort(members.begin(), members.end());
    out.push_back(members);
  }
  return out;
}

/// Dark frame with a bright square, and a two-stage cascade keyed to a bright
/// centre surrounded by a darker ring.
inline vision::GrayFrame bright_square_frame(int w, int h, int sx, int sy, int side) {
  vision::GrayFrame f(w, h, 20);
  for (int y = sy; y < sy + side; ++y)
    for (int x = sx; x < sx + side; ++x) f.at(x, y) = 230;
  return f;
}

inline vision::Cascade bright_square_cascade() {
  using vision::WeakClassifier;
  vision::Cascade c;
  c.base_width = 24;
  c.base_height = 24;
  // centre block [6,18) brighter than the left, right, top and bottom strips
  c.stages.push_back({2.0,
                      {WeakClassifier{{{6, 6, 12, 12, 1.0}, {0, 6, 6, 12, -2.0}}, 40.0, 1.0, 0.0},
                       WeakClassifier{{{6, 6, 12, 12, 1.0}, {18, 6, 6, 12, -2.0}}, 40.0, 1.0, 0.0}}});
  c.stages.push_back({2.0,
                      {WeakClassifier{{{6, 6, 12, 12, 1.0}, {6, 0, 12, 6, -2.0}}, 40.0, 1.0, 0.0},
                       WeakClassifier{{{6, 6, 12, 12, 1.0}, {6, 18, 12, 6, -2.0}}, 40.0, 1.0, 0.0}}});
  return c;
}

}  // namespace sar::oracle
