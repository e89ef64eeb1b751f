#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/dialogue/types.hpp"

namespace sar::dialogue {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
};

inline nlohmann::json to_json(const ChatRequest& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", r.model}, {"messages", msgs}};
}

inline constexpr std::size_t kPromptCharBudget = 8000;

/// Persona templates; {user_name} and {emotion} are filled per turn.
inline const std::map<std::string, std::string>& personas() {
  static const std::map<std::string, std::string> table{
      {"companion",
       "You are a gentle companion robot talking with {user_name}. They currently look {emotion}. "
       "Answer warmly in one or two short spoken sentences, and ask at most one question."},
      {"cheerful",
       "You are an upbeat robot friend chatting with {user_name}, who seems {emotion}. "
       "Keep replies short, kind and encouraging."},
  };
  return table;
}

inline std::string fill_slots(std::string text, const std::string& user_name, const std::string& emotion) {
  const auto replace = [&text](const std::string& slot, const std::string& value) {
    for (std::size_t pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + value.size())) {
      text.replace(pos, slot.size(), value);
    }
  };
  replace("{user_name}", user_name);
  replace("{emotion}", emotion);
  return text;
}

inline std::string chat_role(Role r) {
  switch (r) {
    case Role::User: return "user";
    case Role::Robot: return "assistant";
    case Role::System: return "system";
  }
  return "system";
}

/// System persona followed by the history in order. History is dropped
/// oldest-first until the total content length fits the char budget.
inline std::vector<ChatMessage> build_prompt(const DialogueContext& ctx, std::size_t char_budget = kPromptCharBudget) {
  const auto it = personas().find(ctx.persona);
  if (it == personas().end()) throw Error(ErrorKind::Config, "unknown persona: " + ctx.persona);
  std::vector<ChatMessage> out;
  out.push_back({"system", fill_slots(it->second, ctx.user_name.value_or("a new friend"),
                                      emotion::to_string(ctx.current_emotion.label))});
  std::size_t used = out.front().content.size();
  std::size_t first = ctx.history.size();
  while (first > 0 && used + ctx.history[first - 1].text.size() <= char_budget) {
    --first;
    used += ctx.history[first].text.size();
  }
  for (std::size_t i = first; i < ctx.history.size(); ++i) {
    out.push_back({chat_role(ctx.history[i].role), ctx.history[i].text});
  }
  return out;
}

}  // namespace sar::dialogue
