#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "sar/gesture/classifier.hpp"
#include "sar/vision/frame.hpp"

namespace sar::gesture {

/// Smooth band-limited texture: a sum of random plane waves with
/// wavelengths between 7 and 20 px, sampled at continuous coordinates.
class WaveTexture {
 public:
  explicit WaveTexture(std::uint32_t seed, int waves = 14, double contrast = 1.0) : contrast_(contrast) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> wavelength(7.0, 20.0);
    for (int i = 0; i < waves; ++i) {
      const double a = angle(rng);
      const double k = 2.0 * std::numbers::pi / wavelength(rng);
      waves_.push_back({k * std::cos(a), k * std::sin(a), angle(rng)});
    }
  }

  [[nodiscard]] double operator()(double x, double y) const {
    double v = 0.0;
    for (const auto& w : waves_) v += std::sin(w.kx * x + w.ky * y + w.phase);
    const double unit = v / std::sqrt(0.5 * static_cast<double>(waves_.size()));
    return std::clamp(128.0 + contrast_ * 45.0 * unit, 0.0, 255.0);
  }

 private:
  struct Wave {
    double kx, ky, phase;
  };
  std::vector<Wave> waves_;
  double contrast_;
};

/// Raster of a continuous texture shifted by (dx, dy): pixel(x,y) = tex(x-dx, y-dy).
template <class Texture>
vision::GrayFrame render_texture(const Texture& tex, int w, int h, double dx = 0.0, double dy = 0.0,
                                 std::int64_t t = 0) {
  vision::GrayFrame f(w, h, 0, t);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      f.at(x, y) = static_cast<std::uint8_t>(std::floor(tex(x - dx, y - dy) + 0.5));
  return f;
}

struct BurstParams {
  int frame_width = 128;
  int frame_height = 128;
  int head_size = 64;
  double peak_to_peak_px = 8.0;
  double cycles = 2.0;
  std::int64_t duration_ms = 1500;
  std::int64_t frame_interval_ms = 50;
  std::int64_t t0 = 0;
  std::uint32_t seed = 7;
};

struct FrameBurst {
  std::vector<vision::GrayFrame> frames;
  vision::Rect face;  // head box in the first frame
};

/// Frames of a textured head oscillating over a static textured background:
/// vertically for Nod, horizontally for Shake, not at all for None.
inline FrameBurst render_head_burst(GestureKind kind, const BurstParams& p = {}) {
  const WaveTexture head(p.seed, 14, 1.0);
  const WaveTexture background(p.seed + 1000, 10, 0.35);
  const int hx = (p.frame_width - p.head_size) / 2;
  const int hy = (p.frame_height - p.head_size) / 2;
  FrameBurst burst;
  burst.face = {hx, hy, p.head_size, p.head_size};
  const double amp = 0.5 * p.peak_to_peak_px;
  for (std::int64_t t = 0; t <= p.duration_ms; t += p.frame_interval_ms) {
    const double phase = 2.0 * std::numbers::pi * p.cycles * static_cast<double>(t) / static_cast<double>(p.duration_ms);
    const double offset = amp * std::sin(phase);
    const double ox = kind == GestureKind::Shake ? offset : 0.0;
    const double oy = kind == GestureKind::Nod ? offset : 0.0;
    vision::GrayFrame f(p.frame_width, p.frame_height, 0, p.t0 + t);
    for (int y = 0; y < p.frame_height; ++y) {
      for (int x = 0; x < p.frame_width; ++x) {
        const double u = x - ox;
        const double v = y - oy;
        const bool on_head = u >= hx && u < hx + p.head_size && v >= hy && v < hy + p.head_size;
        const double value = on_head ? head(u, v) : background(x, y);
        f.at(x, y) = static_cast<std::uint8_t>(std::floor(value + 0.5));
      }
    }
    burst.frames.push_back(std::move(f));
  }
  return burst;
}

}  // namespace sar::gesture
