#pragma once

#include <vector>

#include "sar/error.hpp"
#include "sar/vision/frame.hpp"

namespace sar::gesture {

using vision::GrayFrame;
using Pyramid = std::vector<GrayFrame>;

/// Level 0 is the input; each further level is a 2x2 box average with floored
/// dimensions and round-half-up on the mean.
inline Pyramid build_pyramid(const GrayFrame& frame, int levels) {
  if (levels < 1) throw Error(ErrorKind::Value, "pyramid needs at least one level");
  const int need = 1 << (levels - 1);
  if (frame.width() < need || frame.height() < need) {
    throw Error(ErrorKind::Size, "frame too small for requested pyramid depth");
  }
  Pyramid pyr;
  pyr.reserve(static_cast<std::size_t>(levels));
  pyr.push_back(frame);
  for (int level = 1; level < levels; ++level) {
    const GrayFrame& src = pyr.back();
    GrayFrame dst(src.width() / 2, src.height() / 2, 0, frame.timestamp_ms());
    for (int y = 0; y < dst.height(); ++y) {
      for (int x = 0; x < dst.width(); ++x) {
        const int s = src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) + src.at(2 * x, 2 * y + 1) +
                      src.at(2 * x + 1, 2 * y + 1);
        dst.at(x, y) = static_cast<std::uint8_t>((s + 2) / 4);
      }
    }
    pyr.push_back(std::move(dst));
  }
  return pyr;
}

}  // namespace sar::gesture
