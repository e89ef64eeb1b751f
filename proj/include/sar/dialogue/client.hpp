#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sar/dialogue/prompt.hpp"
#include "sar/dialogue/repetition.hpp"
#include "sar/dialogue/transport.hpp"
#include "sar/dialogue/types.hpp"

namespace sar::dialogue {

inline std::int64_t steady_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

/// Offline line for each dominant emotion.
inline std::string fallback_line(emotion::Emotion e) {
  using emotion::Emotion;
  switch (e) {
    case Emotion::Sad: return "I'm sorry you're feeling down. I'm right here with you.";
    case Emotion::Angry: return "That sounds really frustrating. Take your time, I'm listening.";
    case Emotion::Fear: return "You're safe here with me. We can take it slowly.";
    case Emotion::Happy: return "I love seeing you happy! Tell me more.";
    case Emotion::Surprise: return "Oh, that sounds surprising! What happened?";
    case Emotion::Disgust: return "That doesn't sound pleasant at all. Do you want to talk about it?";
    case Emotion::Neutral: return "I'm listening. What would you like to talk about?";
  }
  return "I'm listening.";
}

inline constexpr const char* kAntiRepetitionNote =
    "Your previous draft repeated something you already said. Reply with a different sentence and new content.";

struct Completion {
  std::string text;
  TurnMetrics metrics;
  int attempts = 0;
  std::string error;  // last failure, empty when the call succeeded
};

struct TurnResult {
  Utterance utterance;
  TurnMetrics metrics;
  int calls = 0;
  double repetition = 0.0;  // score of the first draft
};

class DialogueClient {
 public:
  DialogueClient(LlmEndpoint endpoint, std::unique_ptr<Transport> transport)
      : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
    validate(endpoint_);
    if (!transport_) throw Error(ErrorKind::Config, "dialogue client needs a transport");
  }

  [[nodiscard]] const LlmEndpoint& endpoint() const noexcept { return endpoint_; }
  [[nodiscard]] Transport& transport() noexcept { return *transport_; }

  static constexpr int kMaxCallsPerTurn = 2;

  /// One request with a single retry on transport failure or timeout (when
  /// max_attempts allows). A malformed body is not retried. Failures yield
  /// the fallback line with degraded set.
  Completion complete(const std::vector<ChatMessage>& messages, emotion::Emotion mood, int max_attempts = 2) {
    Completion c;
    const auto body = to_json(ChatRequest{endpoint_.model_name, messages});
    c.metrics.t_request = steady_now_ms();
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      ++c.attempts;
      try {
        c.text = parse_completion(transport_->post(body, std::chrono::milliseconds(endpoint_.timeout_ms)));
        c.error.clear();
        break;
      } catch (const Error& e) {
        c.error = e.what();
        if (e.kind() == ErrorKind::Protocol) break;
      }
    }
    if (!c.error.empty()) {
      c.text = fallback_line(mood);
      c.metrics.degraded = true;
    }
    c.metrics.t_response = steady_now_ms();
    return c;
  }

  /// Produces the next robot line without touching ctx, so it can run off
  /// the session loop against a snapshot. Retry and regeneration share a
  /// budget of kMaxCallsPerTurn posts; a regeneration that fails keeps the
  /// first draft.
  TurnResult generate_turn(const DialogueContext& ctx, double guard_threshold = 0.6) {
    auto messages = build_prompt(ctx);
    auto first = complete(messages, ctx.current_emotion.label, kMaxCallsPerTurn);
    TurnResult r;
    r.calls = first.attempts;
    r.metrics = first.metrics;
    r.repetition = repetition_score(first.text, ctx);
    std::string text = first.text;
    if (!first.metrics.degraded && r.repetition > guard_threshold && r.calls < kMaxCallsPerTurn) {
      messages.push_back({"system", kAntiRepetitionNote});
      auto second = complete(messages, ctx.current_emotion.label, kMaxCallsPerTurn - r.calls);
      r.calls += second.attempts;
      if (!second.metrics.degraded) text = second.text;
      r.metrics.t_response = second.metrics.t_response;
      r.metrics.regenerated = true;
    }
    r.utterance = {Role::Robot, std::move(text), ctx.last_t()};
    return r;
  }

  /// generate_turn, then append the robot line to the history.
  TurnResult respond(DialogueContext& ctx, double guard_threshold = 0.6) {
    auto r = generate_turn(ctx, guard_threshold);
    ctx.push(r.utterance);
    return r;
  }

 private:
  LlmEndpoint endpoint_;
  std::unique_ptr<Transport> transport_;
};

}  // namespace sar::dialogue
