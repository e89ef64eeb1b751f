#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sar/error.hpp"

namespace sar::vision {

inline constexpr int kMaxFrameDim = 4096;

/// Row-major 8-bit grayscale raster.
class GrayFrame {
 public:
  GrayFrame() = default;

  GrayFrame(int width, int height, std::uint8_t fill = 0, std::int64_t timestamp_ms = 0)
      : width_(width), height_(height), timestamp_ms_(timestamp_ms) {
    check_dims(width, height);
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  GrayFrame(int width, int height, std::vector<std::uint8_t> pixels, std::int64_t timestamp_ms = 0)
      : width_(width), height_(height), pixels_(std::move(pixels)), timestamp_ms_(timestamp_ms) {
    check_dims(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorKind::Shape, "pixel buffer length does not equal width*height");
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] bool empty() const noexcept { return pixels_.empty(); }
  [[nodiscard]] std::int64_t timestamp_ms() const noexcept { return timestamp_ms_; }
  void set_timestamp_ms(std::int64_t t) noexcept { timestamp_ms_ = t; }

  [[nodiscard]] std::uint8_t at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                   static_cast<std::size_t>(x)];
  }
  std::uint8_t& at(int x, int y) {
    return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                   static_cast<std::size_t>(x)];
  }

  [[nodiscard]] std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  [[nodiscard]] std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  friend bool operator==(const GrayFrame& a, const GrayFrame& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
  }

 private:
  static void check_dims(int width, int height) {
    if (width < 1 || height < 1 || width > kMaxFrameDim || height > kMaxFrameDim) {
      throw Error(ErrorKind::Size, "frame dimensions must be in 1..4096");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::int64_t timestamp_ms_ = 0;
};

/// Summed-area tables over intensities and squared intensities. Both are
/// (width+1)x(height+1) with an all-zero first row and column.
class IntegralPair {
 public:
  IntegralPair() = default;
  IntegralPair(int width, int height)
      : width_(width),
        height_(height),
        sums_(static_cast<std::size_t>(width + 1) * static_cast<std::size_t>(height + 1), 0),
        squared_(sums_.size(), 0) {}

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }

  [[nodiscard]] std::int64_t sum(int x, int y) const { return sums_[index(x, y)]; }
  [[nodiscard]] std::int64_t squared_sum(int x, int y) const { return squared_[index(x, y)]; }

  std::int64_t& sum_ref(int x, int y) { return sums_[index(x, y)]; }
  std::int64_t& squared_ref(int x, int y) { return squared_[index(x, y)]; }

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_ + 1) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> sums_;
  std::vector<std::int64_t> squared_;
};

inline IntegralPair compute_integral(const GrayFrame& frame) {
  IntegralPair ip(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    std::int64_t row = 0;
    std::int64_t row_sq = 0;
    for (int x = 0; x < frame.width(); ++x) {
      const std::int64_t v = frame.at(x, y);
      row += v;
      row_sq += v * v;
      ip.sum_ref(x + 1, y + 1) = ip.sum(x + 1, y) + row;
      ip.squared_ref(x + 1, y + 1) = ip.squared_sum(x + 1, y) + row_sq;
    }
  }
  return ip;
}

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

inline void check_rect(const IntegralPair& ip, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > ip.width() || y + h > ip.height()) {
    throw Error(ErrorKind::Bounds, "rectangle outside frame");
  }
}

inline std::int64_t rect_sum(const IntegralPair& ip, int x, int y, int w, int h) {
  check_rect(ip, x, y, w, h);
  return ip.sum(x + w, y + h) - ip.sum(x, y + h) - ip.sum(x + w, y) + ip.sum(x, y);
}

inline std::int64_t rect_squared_sum(const IntegralPair& ip, int x, int y, int w, int h) {
  check_rect(ip, x, y, w, h);
  return ip.squared_sum(x + w, y + h) - ip.squared_sum(x, y + h) - ip.squared_sum(x + w, y) +
         ip.squared_sum(x, y);
}

}  // namespace sar::vision
