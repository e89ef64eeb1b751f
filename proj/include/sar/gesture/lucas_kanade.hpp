#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sar/error.hpp"
#include "sar/gesture/pyramid.hpp"

namespace sar::gesture {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct FlowParams {
  int window = 15;
  int pyramid_levels = 3;
  int max_iterations = 20;
  double epsilon = 0.01;
  double min_eigen = 1e-4;
};

inline void validate(const FlowParams& p) {
  if (p.window < 3 || p.window % 2 == 0) throw Error(ErrorKind::Config, "flow window must be odd and >= 3");
  if (p.pyramid_levels < 1) throw Error(ErrorKind::Config, "pyramid_levels must be >= 1");
  if (p.max_iterations < 1) throw Error(ErrorKind::Config, "max_iterations must be >= 1");
  if (!(p.epsilon > 0.0) || !(p.min_eigen >= 0.0)) throw Error(ErrorKind::Config, "bad flow tolerances");
}

struct TrackedPoint {
  Point2 point;
  bool alive = false;
};

namespace detail {

/// Bilinear sample with border replication.
inline double sample(const GrayFrame& f, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(f.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(f.height() - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, f.width() - 1);
  const int y1 = std::min(y0 + 1, f.height() - 1);
  const double tx = x - x0;
  const double ty = y - y0;
  const double top = f.at(x0, y0) * (1.0 - tx) + f.at(x1, y0) * tx;
  const double bottom = f.at(x0, y1) * (1.0 - tx) + f.at(x1, y1) * tx;
  return top * (1.0 - ty) + bottom * ty;
}

inline bool window_inside(const GrayFrame& f, const Point2& p, int half) {
  return p.x - half >= 0.0 && p.y - half >= 0.0 && p.x + half <= f.width() - 1.0 &&
         p.y + half <= f.height() - 1.0;
}

struct WindowPatch {
  std::vector<double> intensity;
  std::vector<double> grad_x;
  std::vector<double> grad_y;
  double gxx = 0, gxy = 0, gyy = 0;
};

inline WindowPatch gather(const GrayFrame& f, const Point2& c, int half) {
  WindowPatch w;
  const std::size_t n = static_cast<std::size_t>(2 * half + 1) * static_cast<std::size_t>(2 * half + 1);
  w.intensity.reserve(n);
  w.grad_x.reserve(n);
  w.grad_y.reserve(n);
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const double x = c.x + dx;
      const double y = c.y + dy;
      const double ix = 0.5 * (sample(f, x + 1, y) - sample(f, x - 1, y));
      const double iy = 0.5 * (sample(f, x, y + 1) - sample(f, x, y - 1));
      w.intensity.push_back(sample(f, x, y));
      w.grad_x.push_back(ix);
      w.grad_y.push_back(iy);
      w.gxx += ix * ix;
      w.gxy += ix * iy;
      w.gyy += iy * iy;
    }
  }
  return w;
}

/// Smaller eigenvalue of the structure matrix, normalised by window area and
/// by 255^2 so the threshold is independent of window size and bit depth.
inline double min_eigen_normalized(const WindowPatch& w, std::size_t n) {
  const double a = w.gxx, b = w.gxy, c = w.gyy;
  const double lambda = 0.5 * ((a + c) - std::sqrt((a - c) * (a - c) + 4.0 * b * b));
  return lambda / (static_cast<double>(n) * 255.0 * 255.0);
}

}  // namespace detail

inline double structure_min_eigen(const GrayFrame& f, const Point2& p, int window) {
  const int half = window / 2;
  const auto patch = detail::gather(f, p, half);
  return detail::min_eigen_normalized(patch, patch.intensity.size());
}

/// Coarse-to-fine iterative Lucas-Kanade. At each level the displacement
/// increment solves G * delta = sum(e * grad I) until |delta| < epsilon. A
/// point dies when the level-0 structure matrix is below min_eigen, or when
/// its window (old or new position) leaves the level-0 frame. Badly
/// conditioned coarse levels are skipped rather than killing the point.
inline std::vector<TrackedPoint> lk_track(const Pyramid& prev, const Pyramid& next,
                                          std::span<const Point2> points, const FlowParams& params) {
  validate(params);
  if (prev.size() != next.size() || prev.empty()) throw Error(ErrorKind::Shape, "pyramid depth mismatch");
  for (std::size_t l = 0; l < prev.size(); ++l) {
    if (prev[l].width() != next[l].width() || prev[l].height() != next[l].height()) {
      throw Error(ErrorKind::Shape, "pyramid level shape mismatch");
    }
  }
  const int levels = std::min(params.pyramid_levels, static_cast<int>(prev.size()));
  const int half = params.window / 2;
  std::vector<TrackedPoint> out;
  out.reserve(points.size());

  for (const auto& pt : points) {
    if (!detail::window_inside(prev[0], pt, half)) {
      out.push_back({pt, false});
      continue;
    }
    double gx = 0.0, gy = 0.0;  // guess carried between levels, in level units
    bool alive = true;
    for (int level = levels - 1; level >= 0; --level) {
      const double scale = 1.0 / static_cast<double>(1 << level);
      const Point2 p{pt.x * scale, pt.y * scale};
      const GrayFrame& img_prev = prev[static_cast<std::size_t>(level)];
      const GrayFrame& img_next = next[static_cast<std::size_t>(level)];
      const auto patch = detail::gather(img_prev, p, half);
      const std::size_t n = patch.intensity.size();
      double vx = 0.0, vy = 0.0;
      const double eig = detail::min_eigen_normalized(patch, n);
      if (eig < params.min_eigen) {
        if (level == 0) alive = false;
      } else {
        const double det = patch.gxx * patch.gyy - patch.gxy * patch.gxy;
        for (int it = 0; it < params.max_iterations; ++it) {
          double bx = 0.0, by = 0.0;
          std::size_t k = 0;
          for (int dy = -half; dy <= half; ++dy) {
            for (int dx = -half; dx <= half; ++dx, ++k) {
              const double j = detail::sample(img_next, p.x + gx + vx + dx, p.y + gy + vy + dy);
              const double e = patch.intensity[k] - j;
              bx += e * patch.grad_x[k];
              by += e * patch.grad_y[k];
            }
          }
          const double ddx = (patch.gyy * bx - patch.gxy * by) / det;
          const double ddy = (patch.gxx * by - patch.gxy * bx) / det;
          vx += ddx;
          vy += ddy;
          if (ddx * ddx + ddy * ddy < params.epsilon * params.epsilon) break;
        }
      }
      if (level > 0) {
        gx = 2.0 * (gx + vx);
        gy = 2.0 * (gy + vy);
      } else {
        gx += vx;
        gy += vy;
      }
    }
    const Point2 moved{pt.x + gx, pt.y + gy};
    if (!std::isfinite(moved.x) || !std::isfinite(moved.y) || !detail::window_inside(next[0], moved, half)) {
      alive = false;
    }
    out.push_back({moved, alive});
  }
  return out;
}

}  // namespace sar::gesture
