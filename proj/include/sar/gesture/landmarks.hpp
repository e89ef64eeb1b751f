#pragma once

#include <vector>

#include "sar/gesture/lucas_kanade.hpp"
#include "sar/vision/frame.hpp"

namespace sar::gesture {

/// grid x grid lattice inset 20% from every edge of the box; grid 1 gives
/// the centre. Degenerate boxes give no points.
inline std::vector<Point2> seed_landmarks(const vision::Rect& box, int grid = 5) {
  if (box.w <= 0 || box.h <= 0 || grid < 1) return {};
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid));
  if (grid == 1) {
    pts.push_back({box.x + box.w / 2.0, box.y + box.h / 2.0});
    return pts;
  }
  const double x0 = box.x + 0.2 * box.w;
  const double y0 = box.y + 0.2 * box.h;
  const double dx = 0.6 * box.w / (grid - 1);
  const double dy = 0.6 * box.h / (grid - 1);
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) pts.push_back({x0 + i * dx, y0 + j * dy});
  return pts;
}

}  // namespace sar::gesture
