#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/emotion/emotion.hpp"
#include "sar/error.hpp"

namespace sar::dialogue {

enum class Role { User, Robot, System };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::User: return "user";
    case Role::Robot: return "robot";
    case Role::System: return "system";
  }
  return "system";
}

inline Role role_from_string(const std::string& s) {
  if (s == "user") return Role::User;
  if (s == "robot") return Role::Robot;
  if (s == "system") return Role::System;
  throw Error(ErrorKind::Parse, "unknown role: " + s);
}

struct Utterance {
  Role role = Role::User;
  std::string text;
  std::int64_t t = 0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

inline nlohmann::json to_json(const Utterance& u) { return {{"role", to_string(u.role)}, {"text", u.text}, {"t", u.t}}; }

inline Utterance utterance_from_json(const nlohmann::json& j) {
  return {role_from_string(j.at("role").get<std::string>()), j.at("text").get<std::string>(),
          j.value("t", std::int64_t{0})};
}

struct DialogueContext {
  static constexpr std::size_t kDefaultMaxHistory = 20;

  std::deque<Utterance> history;
  std::size_t max_history = kDefaultMaxHistory;
  std::optional<std::string> user_name;
  emotion::DominantEmotion current_emotion{};
  std::string persona = "companion";

  /// Appends in time order and evicts from the front past max_history.
  void push(Utterance u) {
    if (u.role != Role::System && u.text.empty()) throw Error(ErrorKind::Value, "empty utterance");
    if (!history.empty() && u.t < history.back().t) throw Error(ErrorKind::Value, "utterance out of time order");
    history.push_back(std::move(u));
    while (history.size() > max_history) history.pop_front();
  }

  [[nodiscard]] std::int64_t last_t() const { return history.empty() ? 0 : history.back().t; }
};

inline nlohmann::json to_json(const DialogueContext& ctx) {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& u : ctx.history) h.push_back(to_json(u));
  return {{"history", h},
          {"user_name", ctx.user_name ? nlohmann::json(*ctx.user_name) : nlohmann::json(nullptr)},
          {"emotion", emotion::to_json(ctx.current_emotion)},
          {"persona", ctx.persona}};
}

struct TurnMetrics {
  std::int64_t t_request = 0;
  std::int64_t t_response = 0;
  bool regenerated = false;
  bool degraded = false;

  [[nodiscard]] std::int64_t latency_ms() const noexcept { return t_response - t_request; }
};

inline nlohmann::json to_json(const TurnMetrics& m) {
  return {{"t_request", m.t_request},
          {"t_response", m.t_response},
          {"latency_ms", m.latency_ms()},
          {"regenerated", m.regenerated},
          {"degraded", m.degraded}};
}

/// Options for the built-in stub service selected by base_url "stub:".
struct StubOptions {
  std::string delay_model = "constant:0";
  std::uint64_t seed = 1;
  std::vector<std::string> replies;  // consumed first, then deterministic lines
};

struct LlmEndpoint {
  std::string base_url = "stub:";
  std::string model_name = "stub-model";
  std::string api_key_ref = "LLM_API_KEY";  // name of the environment variable, never the key
  std::int64_t timeout_ms = 20000;
  StubOptions stub;

  [[nodiscard]] bool is_stub() const { return base_url.rfind("stub:", 0) == 0; }
};

inline void validate(const LlmEndpoint& e) {
  if (e.timeout_ms <= 0) throw Error(ErrorKind::Config, "llm timeout_ms must be positive");
  if (e.base_url.empty()) throw Error(ErrorKind::Config, "llm base_url is empty");
  if (!e.is_stub() && e.api_key_ref.empty()) throw Error(ErrorKind::Config, "llm api_key_ref is empty");
}

inline nlohmann::json to_json(const LlmEndpoint& e) {
  return {{"base_url", e.base_url},
          {"model", e.model_name},
          {"api_key_ref", e.api_key_ref},
          {"timeout_ms", e.timeout_ms},
          {"stub", {{"delay_model", e.stub.delay_model}, {"seed", e.stub.seed}, {"replies", e.stub.replies}}}};
}

inline LlmEndpoint endpoint_from_json(const nlohmann::json& j) {
  LlmEndpoint e;
  e.base_url = j.value("base_url", e.base_url);
  e.model_name = j.value("model", e.model_name);
  e.api_key_ref = j.value("api_key_ref", e.api_key_ref);
  e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
  if (j.contains("api_key")) throw Error(ErrorKind::Config, "put the key in the environment and name it in api_key_ref");
  if (j.contains("stub")) {
    const auto& s = j["stub"];
    e.stub.delay_model = s.value("delay_model", e.stub.delay_model);
    e.stub.seed = s.value("seed", e.stub.seed);
    e.stub.replies = s.value("replies", e.stub.replies);
  }
  validate(e);
  return e;
}

}  // namespace sar::dialogue
