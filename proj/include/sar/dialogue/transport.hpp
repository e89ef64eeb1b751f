#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>
#include <random>
#include <string>
#include <thread>

#include <json.hpp>

#include "sar/dialogue/prompt.hpp"
#include "sar/error.hpp"

namespace sar::dialogue {

/// Sends one chat-completion request body and returns the raw response body.
/// Throws Error{Transport} or Error{Timeout}.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string post(const nlohmann::json& body, std::chrono::milliseconds timeout) = 0;
};

/// Extracts choices[0].message.content; anything else is a protocol error.
inline std::string parse_completion(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Protocol, "completion body is not JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    auto text = content.get<std::string>();
    if (text.empty()) throw Error(ErrorKind::Protocol, "completion content is empty");
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("unexpected completion shape: ") + e.what());
  }
}

inline std::string completion_body(const std::string& text) {
  return nlohmann::json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

/// "constant:MS" | "uniform:LO,HI" | "none"
class DelayModel {
 public:
  DelayModel() = default;

  static DelayModel parse(const std::string& spec) {
    DelayModel m;
    if (spec.empty() || spec == "none") return m;
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::Config, "bad delay model: " + spec);
    const auto kind = spec.substr(0, colon);
    const auto args = spec.substr(colon + 1);
    try {
      if (kind == "constant") {
        m.lo_ = m.hi_ = std::stoll(args);
      } else if (kind == "uniform") {
        const auto comma = args.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::Config, "uniform delay needs LO,HI");
        m.lo_ = std::stoll(args.substr(0, comma));
        m.hi_ = std::stoll(args.substr(comma + 1));
      } else {
        throw Error(ErrorKind::Config, "unknown delay model: " + kind);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Config, "bad delay model numbers: " + spec);
    }
    if (m.lo_ < 0 || m.hi_ < m.lo_) throw Error(ErrorKind::Config, "delay bounds must satisfy 0 <= LO <= HI");
    return m;
  }

  template <class Rng>
  std::int64_t sample(Rng& rng) const {
    if (lo_ == hi_) return lo_;
    return std::uniform_int_distribution<std::int64_t>(lo_, hi_)(rng);
  }

  [[nodiscard]] std::int64_t lo() const noexcept { return lo_; }
  [[nodiscard]] std::int64_t hi() const noexcept { return hi_; }

 private:
  std::int64_t lo_ = 0;
  std::int64_t hi_ = 0;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// In-process stand-in for the chat service. Replies come from the scripted
/// queue first, then from a fixed pool indexed by a hash of the request, so
/// identical requests get identical text. Delays are really slept.
class StubTransport final : public Transport {
 public:
  enum class Fault { None, Unreachable, Malformed };

  explicit StubTransport(StubOptions opts = {})
      : delay_(DelayModel::parse(opts.delay_model)), rng_(opts.seed), script_(opts.replies.begin(), opts.replies.end()) {}

  static const std::vector<std::string>& pool() {
    static const std::vector<std::string> lines{
        "That sounds like a lot to carry. Would you like to tell me more about it?",
        "I am here with you. What would help you feel a little better right now?",
        "Thank you for sharing that with me. How long have you been feeling this way?",
        "It is okay to feel like this sometimes. Shall we take a slow breath together?",
        "I hear you. What is one small thing that went well today?",
        "You are not alone in this. Is there someone you like to talk to when things are hard?",
        "That makes sense to me. What do you usually enjoy doing to relax?",
        "I am glad you told me. Would a hug or a little snack cheer you up?",
    };
    return lines;
  }

  std::string post(const nlohmann::json& body, std::chrono::milliseconds timeout) override {
    std::int64_t delay = 0;
    Fault fault = Fault::None;
    std::string text;
    {
      std::lock_guard lock(mu_);
      ++calls_;
      delay = delay_.sample(rng_);
      if (!faults_.empty()) {
        fault = faults_.front();
        faults_.pop_front();
      }
      if (fault == Fault::None) {
        if (!script_.empty()) {
          text = script_.front();
          script_.pop_front();
        } else {
          text = pool()[fnv1a(body.at("messages").dump()) % pool().size()];
        }
      }
    }
    if (fault == Fault::Unreachable) throw Error(ErrorKind::Transport, "stub endpoint unreachable");
    if (delay > timeout.count()) {
      std::this_thread::sleep_for(timeout);
      throw Error(ErrorKind::Timeout, "stub reply exceeded timeout");
    }
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    if (fault == Fault::Malformed) return R"({"choices":[]})";
    return completion_body(text);
  }

  /// Each queued fault applies to one upcoming call.
  void inject(Fault f, int times = 1) {
    std::lock_guard lock(mu_);
    for (int i = 0; i < times; ++i) faults_.push_back(f);
  }

  void set_delay_model(const DelayModel& m) {
    std::lock_guard lock(mu_);
    delay_ = m;
  }

  [[nodiscard]] int calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  mutable std::mutex mu_;
  DelayModel delay_;
  std::mt19937_64 rng_;
  std::deque<std::string> script_;
  std::deque<Fault> faults_;
  int calls_ = 0;
};

}  // namespace sar::dialogue
