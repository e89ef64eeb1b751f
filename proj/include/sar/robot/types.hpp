#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sar/emotion/emotion.hpp"
#include "sar/error.hpp"
#include "sar/gesture/classifier.hpp"
#include "sar/vision/frame.hpp"

namespace sar::robot {

enum class RobotState {
  Idle,
  FaceSearch,
  Greeting,
  Assessing,
  Conversing,
  OfferingHug,
  AwaitingConsent,
  Hugging,
  SnackOffer,
  Farewell
};

inline constexpr std::array<std::string_view, 10> kStateNames{"Idle",       "FaceSearch",  "Greeting",        "Assessing",
                                                              "Conversing", "OfferingHug", "AwaitingConsent", "Hugging",
                                                              "SnackOffer", "Farewell"};

inline std::string to_string(RobotState s) { return std::string(kStateNames[static_cast<std::size_t>(s)]); }

inline RobotState state_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i)
    if (kStateNames[i] == s) return static_cast<RobotState>(i);
  throw Error(ErrorKind::Parse, "unknown robot state: " + std::string(s));
}

// Events ---------------------------------------------------------------------

struct FaceDetected {
  vision::Rect box;
  std::optional<std::string> identity;  // nullopt: unknown face
  friend bool operator==(const FaceDetected&, const FaceDetected&) = default;
};
struct FaceLost {
  friend bool operator==(const FaceLost&, const FaceLost&) = default;
};
struct EmotionObserved {
  emotion::DominantEmotion emotion;
  friend bool operator==(const EmotionObserved&, const EmotionObserved&) = default;
};
struct GestureObserved {
  gesture::GestureVerdict verdict;
  friend bool operator==(const GestureObserved&, const GestureObserved&) = default;
};
struct UserUtterance {
  std::string text;
  friend bool operator==(const UserUtterance&, const UserUtterance&) = default;
};
struct RobotTurnReady {
  std::string text;
  friend bool operator==(const RobotTurnReady&, const RobotTurnReady&) = default;
};
struct DistanceChanged {
  double cm = 0.0;
  friend bool operator==(const DistanceChanged&, const DistanceChanged&) = default;
};
struct Tick {
  std::int64_t dt_ms = 0;
  friend bool operator==(const Tick&, const Tick&) = default;
};
enum class OperatorCommandKind { Reset, End };
struct OperatorCommand {
  OperatorCommandKind command = OperatorCommandKind::Reset;
  friend bool operator==(const OperatorCommand&, const OperatorCommand&) = default;
};

using EventBody = std::variant<FaceDetected, FaceLost, EmotionObserved, GestureObserved, UserUtterance, RobotTurnReady,
                               DistanceChanged, Tick, OperatorCommand>;

/// Wire names, indexed like EventBody alternatives.
inline constexpr std::array<std::string_view, 9> kEventKinds{
    "face_detected", "face_lost", "emotion", "gesture", "user_utterance", "robot_turn_ready", "distance", "tick",
    "operator"};

struct SimEvent {
  std::int64_t t = 0;
  EventBody body;

  [[nodiscard]] std::string_view kind() const { return kEventKinds[body.index()]; }
  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

inline void validate(const SimEvent& e) {
  if (e.t < 0) throw Error(ErrorKind::Value, "event timestamp must be >= 0");
  if (const auto* tick = std::get_if<Tick>(&e.body); tick && tick->dt_ms <= 0) {
    throw Error(ErrorKind::Value, "tick dt_ms must be > 0");
  }
  if (const auto* d = std::get_if<DistanceChanged>(&e.body); d && !std::isfinite(d->cm)) {
    throw Error(ErrorKind::Value, "distance must be finite");
  }
}

// Actions --------------------------------------------------------------------

struct Speak {
  std::string line;  // line id, e.g. "greeting"; "llm" for generated turns
  std::string text;
  friend bool operator==(const Speak&, const Speak&) = default;
};
struct RequestLlmTurn {
  friend bool operator==(const RequestLlmTurn&, const RequestLlmTurn&) = default;
};
struct MoveArms {
  double target_deg = 0.0;
  friend bool operator==(const MoveArms&, const MoveArms&) = default;
};
struct DispenseSnack {
  friend bool operator==(const DispenseSnack&, const DispenseSnack&) = default;
};

using Action = std::variant<Speak, RequestLlmTurn, MoveArms, DispenseSnack>;

// Hardware and configuration -------------------------------------------------

struct HardwareState {
  static constexpr double kArmMin = 0.0;
  static constexpr double kArmMax = 120.0;
  static constexpr double kDistanceMax = 400.0;

  double left_arm_deg = 0.0;
  double right_arm_deg = 0.0;
  double arm_target_deg = 0.0;
  double arm_rate = 60.0;  // deg/s
  double distance_cm = kDistanceMax;       // as measured, noise included
  double true_distance_cm = kDistanceMax;  // last DistanceChanged
  int snack_count = 5;
  std::int64_t hug_elapsed_ms = 0;
  bool distance_noise = false;
  std::uint64_t noise_state = 0x9e3779b97f4a7c15ULL;

  friend bool operator==(const HardwareState&, const HardwareState&) = default;
};

struct HugConfig {
  double hug_distance_cm = 40.0;
  std::int64_t hug_duration_ms = 3000;
  double arm_close_deg = 85.0;
  double abort_distance_cm = 60.0;
  std::int64_t consent_timeout_ms = 10000;
  // interaction timing beyond the hug itself
  double sad_tau = 0.5;
  int sad_consecutive = 3;
  std::int64_t assess_dwell_ms = 5000;
  std::int64_t face_lost_timeout_ms = 5000;
  std::int64_t conflict_window_ms = 1500;
};

inline void validate(const HugConfig& c) {
  const bool positive = c.hug_distance_cm > 0 && c.hug_duration_ms > 0 && c.arm_close_deg > 0 &&
                        c.abort_distance_cm > 0 && c.consent_timeout_ms > 0 && c.assess_dwell_ms > 0 &&
                        c.face_lost_timeout_ms > 0 && c.conflict_window_ms >= 0 && c.sad_consecutive > 0;
  if (!positive) throw Error(ErrorKind::Config, "hug config values must be positive");
  if (!(c.abort_distance_cm > c.hug_distance_cm)) {
    throw Error(ErrorKind::Config, "abort_distance_cm must exceed hug_distance_cm");
  }
  if (c.arm_close_deg > HardwareState::kArmMax) throw Error(ErrorKind::Config, "arm_close_deg above 120");
  if (!(c.sad_tau >= 0 && c.sad_tau <= 1)) throw Error(ErrorKind::Config, "sad_tau outside [0,1]");
}

// JSON -----------------------------------------------------------------------

inline nlohmann::json to_json(const SimEvent& e) {
  nlohmann::json j{{"type", std::string(e.kind())}, {"t", e.t}};
  std::visit(
      [&j](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, FaceDetected>) {
          j["box"] = {b.box.x, b.box.y, b.box.w, b.box.h};
          j["identity"] = b.identity ? nlohmann::json(*b.identity) : nlohmann::json(nullptr);
        } else if constexpr (std::is_same_v<T, EmotionObserved>) {
          j["label"] = emotion::to_string(b.emotion.label);
          j["score"] = b.emotion.score;
        } else if constexpr (std::is_same_v<T, GestureObserved>) {
          j["kind"] = gesture::to_string(b.verdict.kind);
          j["confidence"] = b.verdict.confidence;
          j["window"] = {b.verdict.t_start, b.verdict.t_end};
        } else if constexpr (std::is_same_v<T, UserUtterance> || std::is_same_v<T, RobotTurnReady>) {
          j["text"] = b.text;
        } else if constexpr (std::is_same_v<T, DistanceChanged>) {
          j["cm"] = b.cm;
        } else if constexpr (std::is_same_v<T, Tick>) {
          j["dt_ms"] = b.dt_ms;
        } else if constexpr (std::is_same_v<T, OperatorCommand>) {
          j["command"] = b.command == OperatorCommandKind::Reset ? "reset" : "end";
        }
      },
      e.body);
  return j;
}

/// `default_t` is used when the record carries no "t".
inline SimEvent event_from_json(const nlohmann::json& j, std::int64_t default_t = 0) {
  try {
    SimEvent e;
    e.t = j.value("t", default_t);
    const auto type = j.at("type").get<std::string>();
    if (type == "face_detected") {
      FaceDetected f;
      if (j.contains("box")) {
        const auto& b = j["box"];
        f.box = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      }
      if (j.contains("identity") && j["identity"].is_string()) f.identity = j["identity"].get<std::string>();
      e.body = f;
    } else if (type == "face_lost") {
      e.body = FaceLost{};
    } else if (type == "emotion") {
      e.body = EmotionObserved{{emotion::emotion_from_string(j.at("label").get<std::string>()), j.at("score").get<double>()}};
    } else if (type == "gesture") {
      e.body = GestureObserved{gesture::verdict_from_json(j)};
    } else if (type == "user_utterance") {
      e.body = UserUtterance{j.at("text").get<std::string>()};
    } else if (type == "robot_turn_ready") {
      e.body = RobotTurnReady{j.at("text").get<std::string>()};
    } else if (type == "distance") {
      e.body = DistanceChanged{j.at("cm").get<double>()};
    } else if (type == "tick") {
      e.body = Tick{j.at("dt_ms").get<std::int64_t>()};
    } else if (type == "operator") {
      const auto cmd = j.at("command").get<std::string>();
      if (cmd != "reset" && cmd != "end") throw Error(ErrorKind::Parse, "operator command must be reset or end");
      e.body = OperatorCommand{cmd == "reset" ? OperatorCommandKind::Reset : OperatorCommandKind::End};
    } else {
      throw Error(ErrorKind::Parse, "unknown event type: " + type);
    }
    validate(e);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::Parse, std::string("bad event: ") + ex.what());
  }
}

inline nlohmann::json to_json(const Action& a) {
  return std::visit(
      [](const auto& b) -> nlohmann::json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Speak>) {
          return {{"type", "speak"}, {"line", b.line}, {"text", b.text}};
        } else if constexpr (std::is_same_v<T, RequestLlmTurn>) {
          return {{"type", "request_llm_turn"}};
        } else if constexpr (std::is_same_v<T, MoveArms>) {
          return {{"type", "move_arms"}, {"deg", b.target_deg}};
        } else {
          return {{"type", "dispense_snack"}};
        }
      },
      a);
}

inline Action action_from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "speak") return Speak{j.at("line").get<std::string>(), j.at("text").get<std::string>()};
    if (type == "request_llm_turn") return RequestLlmTurn{};
    if (type == "move_arms") return MoveArms{j.at("deg").get<double>()};
    if (type == "dispense_snack") return DispenseSnack{};
    throw Error(ErrorKind::Parse, "unknown action type: " + type);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::Parse, std::string("bad action: ") + ex.what());
  }
}

inline nlohmann::json to_json(const std::vector<Action>& actions) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : actions) arr.push_back(to_json(a));
  return arr;
}

inline nlohmann::json to_json(const HardwareState& hw) {
  return {{"left_arm_deg", hw.left_arm_deg},
          {"right_arm_deg", hw.right_arm_deg},
          {"arm_target_deg", hw.arm_target_deg},
          {"arm_rate", hw.arm_rate},
          {"distance_cm", hw.distance_cm},
          {"true_distance_cm", hw.true_distance_cm},
          {"snack_count", hw.snack_count},
          {"hug_elapsed_ms", hw.hug_elapsed_ms},
          {"distance_noise", hw.distance_noise},
          {"noise_state", hw.noise_state}};
}

inline HardwareState hardware_from_json(const nlohmann::json& j) {
  HardwareState hw;
  hw.left_arm_deg = j.value("left_arm_deg", hw.left_arm_deg);
  hw.right_arm_deg = j.value("right_arm_deg", hw.right_arm_deg);
  hw.arm_target_deg = j.value("arm_target_deg", hw.arm_target_deg);
  hw.arm_rate = j.value("arm_rate", hw.arm_rate);
  hw.distance_cm = j.value("distance_cm", hw.distance_cm);
  hw.true_distance_cm = j.value("true_distance_cm", hw.true_distance_cm);
  hw.snack_count = j.value("snack_count", hw.snack_count);
  hw.hug_elapsed_ms = j.value("hug_elapsed_ms", hw.hug_elapsed_ms);
  hw.distance_noise = j.value("distance_noise", hw.distance_noise);
  hw.noise_state = j.value("noise_state", hw.noise_state);
  if (hw.snack_count < 0 || !(hw.arm_rate > 0)) throw Error(ErrorKind::Config, "invalid hardware state");
  return hw;
}

inline nlohmann::json to_json(const HugConfig& c) {
  return {{"hug_distance_cm", c.hug_distance_cm},       {"hug_duration_ms", c.hug_duration_ms},
          {"arm_close_deg", c.arm_close_deg},           {"abort_distance_cm", c.abort_distance_cm},
          {"consent_timeout_ms", c.consent_timeout_ms}, {"sad_tau", c.sad_tau},
          {"sad_consecutive", c.sad_consecutive},       {"assess_dwell_ms", c.assess_dwell_ms},
          {"face_lost_timeout_ms", c.face_lost_timeout_ms}, {"conflict_window_ms", c.conflict_window_ms}};
}

inline HugConfig hug_config_from_json(const nlohmann::json& j) {
  HugConfig c;
  c.hug_distance_cm = j.value("hug_distance_cm", c.hug_distance_cm);
  c.hug_duration_ms = j.value("hug_duration_ms", c.hug_duration_ms);
  c.arm_close_deg = j.value("arm_close_deg", c.arm_close_deg);
  c.abort_distance_cm = j.value("abort_distance_cm", c.abort_distance_cm);
  c.consent_timeout_ms = j.value("consent_timeout_ms", c.consent_timeout_ms);
  c.sad_tau = j.value("sad_tau", c.sad_tau);
  c.sad_consecutive = j.value("sad_consecutive", c.sad_consecutive);
  c.assess_dwell_ms = j.value("assess_dwell_ms", c.assess_dwell_ms);
  c.face_lost_timeout_ms = j.value("face_lost_timeout_ms", c.face_lost_timeout_ms);
  c.conflict_window_ms = j.value("conflict_window_ms", c.conflict_window_ms);
  validate(c);
  return c;
}

}  // namespace sar::robot
