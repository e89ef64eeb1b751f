#pragma once

#include <optional>
#include <vector>

#include "sar/gesture/classifier.hpp"
#include "sar/gesture/landmarks.hpp"
#include "sar/gesture/lucas_kanade.hpp"
#include "sar/gesture/pyramid.hpp"

namespace sar::gesture {

/// Frame-to-frame landmark tracker feeding the gesture classifier. Owned by
/// one session loop; not thread-safe.
class HeadGestureTracker {
 public:
  HeadGestureTracker(FlowParams flow = {}, GestureParams gesture = {}, int grid = 5)
      : flow_(flow), gesture_(gesture), grid_(grid) {
    validate(flow_);
    validate(gesture_);
  }

  /// Advance by one frame. `face` is the newest detection, if any; it seeds
  /// the first generation of points and re-seeds whenever the live fraction
  /// drops below min_live_fraction.
  void push_frame(const GrayFrame& frame, const std::optional<vision::Rect>& face) {
    auto pyr = build_pyramid(frame, flow_.pyramid_levels);
    const auto t = frame.timestamp_ms();
    if (prev_ && !current_.empty()) {
      std::vector<Point2> pts;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < current_.size(); ++i) {
        if (current_[i].samples.back().alive) {
          pts.push_back({current_[i].samples.back().x, current_[i].samples.back().y});
          idx.push_back(i);
        }
      }
      const auto tracked = lk_track(*prev_, pyr, pts, flow_);
      std::vector<bool> updated(current_.size(), false);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        current_[idx[k]].samples.push_back({t, tracked[k].point.x, tracked[k].point.y, tracked[k].alive});
        updated[idx[k]] = true;
      }
      for (std::size_t i = 0; i < current_.size(); ++i) {
        if (!updated[i]) {
          const auto& last = current_[i].samples.back();
          current_[i].samples.push_back({t, last.x, last.y, false});
        }
      }
    }
    if (face && (current_.empty() || live_fraction() < gesture_.min_live_fraction)) {
      reseed(*face, t);
    }
    prev_ = std::move(pyr);
  }

  [[nodiscard]] double live_fraction() const {
    if (current_.empty()) return 0.0;
    std::size_t alive = 0;
    for (const auto& tr : current_) alive += tr.samples.back().alive ? 1 : 0;
    return static_cast<double>(alive) / static_cast<double>(current_.size());
  }

  [[nodiscard]] const std::vector<Trajectory>& trajectories() const noexcept { return current_; }
  [[nodiscard]] int generation() const noexcept { return generation_; }

  [[nodiscard]] GestureVerdict classify() const { return classify_gesture(current_, gesture_); }

 private:
  void reseed(const vision::Rect& face, std::int64_t t) {
    current_.clear();
    for (const auto& p : seed_landmarks(face, grid_)) {
      current_.push_back({next_id_++, {{t, p.x, p.y, true}}});
    }
    ++generation_;
  }

  FlowParams flow_;
  GestureParams gesture_;
  int grid_;
  std::optional<Pyramid> prev_;
  std::vector<Trajectory> current_;
  int next_id_ = 0;
  int generation_ = 0;
};

}  // namespace sar::gesture
