#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/dialogue/types.hpp"
#include "sar/emotion/emotion.hpp"
#include "sar/error.hpp"
#include "sar/gesture/classifier.hpp"
#include "sar/gesture/lucas_kanade.hpp"
#include "sar/robot/types.hpp"
#include "sar/vision/detect.hpp"

namespace sar::session {

enum class DialogueMode { Async, Inline };

/// Single JSON file; relative paths resolve against the file's directory.
struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> cascade_path;
  std::optional<std::filesystem::path> lbph_path;
  std::string emotion_classifier = "heuristic";  // heuristic | scripted
  std::optional<std::filesystem::path> scripted_scores_path;
  dialogue::LlmEndpoint llm;
  robot::HugConfig hug;
  robot::HardwareState hardware;
  gesture::FlowParams flow;
  gesture::GestureParams gesture;
  vision::DetectParams detect;
  std::optional<std::filesystem::path> log_dir;
  std::optional<std::filesystem::path> static_dir;
  DialogueMode dialogue_mode = DialogueMode::Async;
  double guard_threshold = 0.6;
  std::size_t max_sessions = 64;
  std::string persona = "companion";
  std::size_t history_limit = 20;
  int io_threads = 2;
};

inline gesture::FlowParams flow_from_json(const nlohmann::json& j) {
  gesture::FlowParams p;
  p.window = j.value("window", p.window);
  p.pyramid_levels = j.value("pyramid_levels", p.pyramid_levels);
  p.max_iterations = j.value("max_iterations", p.max_iterations);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.min_eigen = j.value("min_eigen", p.min_eigen);
  gesture::validate(p);
  return p;
}

inline gesture::GestureParams gesture_params_from_json(const nlohmann::json& j) {
  gesture::GestureParams p;
  p.window_ms = j.value("window_ms", p.window_ms);
  p.min_amplitude = j.value("min_amplitude", p.min_amplitude);
  p.min_reversals = j.value("min_reversals", p.min_reversals);
  p.axis_ratio = j.value("axis_ratio", p.axis_ratio);
  p.min_live_fraction = j.value("min_live_fraction", p.min_live_fraction);
  p.velocity_deadband = j.value("velocity_deadband", p.velocity_deadband);
  gesture::validate(p);
  return p;
}

inline vision::DetectParams detect_params_from_json(const nlohmann::json& j) {
  vision::DetectParams p;
  p.scale_factor = j.value("scale_factor", p.scale_factor);
  p.step = j.value("step", p.step);
  p.min_size = j.value("min_size", p.min_size);
  p.min_neighbors = j.value("min_neighbors", p.min_neighbors);
  if (!(p.scale_factor > 1.0) || p.step < 1 || p.min_size < 0 || p.min_neighbors < 1) {
    throw Error(ErrorKind::Config, "invalid detect parameters");
  }
  return p;
}

namespace detail {

inline std::optional<std::filesystem::path> path_field(const nlohmann::json& j, const char* key,
                                                       const std::filesystem::path& base) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  std::filesystem::path p = j[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

inline void require_file(const std::optional<std::filesystem::path>& p, const char* what) {
  if (p && !std::filesystem::is_regular_file(*p)) {
    throw Error(ErrorKind::Config, std::string(what) + " not found: " + p->string());
  }
}

}  // namespace detail

inline ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  try {
    ServiceConfig c;
    c.bind = j.value("bind", c.bind);
    c.port = j.value("port", c.port);
    c.cascade_path = detail::path_field(j, "cascade_model", base);
    c.lbph_path = detail::path_field(j, "lbph_model", base);
    if (j.contains("emotion")) {
      const auto& e = j["emotion"];
      c.emotion_classifier = e.value("classifier", c.emotion_classifier);
      c.scripted_scores_path = detail::path_field(e, "scripted_file", base);
    }
    if (j.contains("llm")) c.llm = dialogue::endpoint_from_json(j["llm"]);
    if (j.contains("hug")) c.hug = robot::hug_config_from_json(j["hug"]);
    if (j.contains("hardware")) c.hardware = robot::hardware_from_json(j["hardware"]);
    if (j.contains("flow")) c.flow = flow_from_json(j["flow"]);
    if (j.contains("gesture")) c.gesture = gesture_params_from_json(j["gesture"]);
    if (j.contains("detect")) c.detect = detect_params_from_json(j["detect"]);
    c.log_dir = detail::path_field(j, "log_dir", base);
    c.static_dir = detail::path_field(j, "static_dir", base);
    const auto mode = j.value("dialogue_mode", std::string("async"));
    if (mode != "async" && mode != "inline") throw Error(ErrorKind::Config, "dialogue_mode must be async or inline");
    c.dialogue_mode = mode == "async" ? DialogueMode::Async : DialogueMode::Inline;
    c.guard_threshold = j.value("guard_threshold", c.guard_threshold);
    c.max_sessions = j.value("max_sessions", c.max_sessions);
    c.persona = j.value("persona", c.persona);
    c.history_limit = j.value("history_limit", c.history_limit);
    c.io_threads = j.value("io_threads", c.io_threads);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad config: ") + e.what());
  }
}

/// Checks that everything the config names exists and parses.
inline void validate(const ServiceConfig& c) {
  if (c.port < 0 || c.port > 65535) throw Error(ErrorKind::Config, "port out of range");
  if (c.max_sessions == 0) throw Error(ErrorKind::Config, "max_sessions must be positive");
  if (c.history_limit == 0) throw Error(ErrorKind::Config, "history_limit must be positive");
  if (c.io_threads < 1) throw Error(ErrorKind::Config, "io_threads must be positive");
  if (!(c.guard_threshold >= 0.0 && c.guard_threshold <= 1.0)) {
    throw Error(ErrorKind::Config, "guard_threshold must be in [0,1]");
  }
  if (c.emotion_classifier != "heuristic" && c.emotion_classifier != "scripted") {
    throw Error(ErrorKind::Config, "emotion classifier must be heuristic or scripted");
  }
  if (c.emotion_classifier == "scripted" && !c.scripted_scores_path) {
    throw Error(ErrorKind::Config, "scripted classifier needs emotion.scripted_file");
  }
  detail::require_file(c.cascade_path, "cascade model");
  detail::require_file(c.lbph_path, "lbph model");
  detail::require_file(c.scripted_scores_path, "scripted scores file");
  if (c.static_dir && !std::filesystem::is_directory(*c.static_dir)) {
    throw Error(ErrorKind::Config, "static_dir not found: " + c.static_dir->string());
  }
  dialogue::validate(c.llm);
  robot::validate(c.hug);
  gesture::validate(c.flow);
  gesture::validate(c.gesture);
}

inline ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Config, "config is not valid JSON: " + path.string());
  auto c = config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  validate(c);
  return c;
}

inline std::vector<emotion::EmotionScores> load_scripted_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot read scripted scores: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Parse, "scripted scores file is not JSON");
  return emotion::scripted_scores_from_json(j);
}

}  // namespace sar::session
