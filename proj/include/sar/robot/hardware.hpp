#pragma once

#include <algorithm>
#include <cstdint>

#include "sar/robot/types.hpp"

namespace sar::robot {

inline bool hug_gate(const HardwareState& hw, const HugConfig& cfg, bool consent) {
  return consent && hw.distance_cm <= cfg.hug_distance_cm;
}

struct ArmTargets {
  double left = 0.0;
  double right = 0.0;
};

inline double move_toward(double angle, double target, double max_step) {
  target = std::clamp(target, HardwareState::kArmMin, HardwareState::kArmMax);
  const double next = angle < target ? std::min(angle + max_step, target) : std::max(angle - max_step, target);
  return std::clamp(next, HardwareState::kArmMin, HardwareState::kArmMax);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Rate-limited servo motion toward the targets, hug timer, and optional
/// +-2 cm range noise drawn from the generator state carried in hw.
inline HardwareState tick_hardware(HardwareState hw, std::int64_t dt_ms, ArmTargets targets, bool hugging) {
  if (dt_ms <= 0) throw Error(ErrorKind::Value, "tick_hardware needs dt > 0");
  const double max_step = hw.arm_rate * static_cast<double>(dt_ms) / 1000.0;
  hw.left_arm_deg = move_toward(hw.left_arm_deg, targets.left, max_step);
  hw.right_arm_deg = move_toward(hw.right_arm_deg, targets.right, max_step);
  if (hugging) hw.hug_elapsed_ms += dt_ms;
  if (hw.distance_noise) {
    const double u = static_cast<double>(splitmix64(hw.noise_state) >> 11) * 0x1.0p-53;  // [0,1)
    hw.distance_cm = std::clamp(hw.true_distance_cm + (4.0 * u - 2.0), 0.0, HardwareState::kDistanceMax);
  }
  return hw;
}

inline HardwareState set_distance(HardwareState hw, double cm) {
  hw.true_distance_cm = std::clamp(cm, 0.0, HardwareState::kDistanceMax);
  hw.distance_cm = hw.true_distance_cm;
  return hw;
}

}  // namespace sar::robot
