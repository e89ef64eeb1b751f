#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sar/error.hpp"
#include "sar/vision/frame.hpp"

namespace sar::emotion {

/// Declared in alphabetical order; that order is also the tie-break order.
enum class Emotion { Angry, Disgust, Fear, Happy, Neutral, Sad, Surprise };

inline constexpr std::size_t kEmotionCount = 7;
inline constexpr std::array<std::string_view, kEmotionCount> kLabels{"angry",   "disgust", "fear",    "happy",
                                                                     "neutral", "sad",     "surprise"};

inline std::string to_string(Emotion e) { return std::string(kLabels[static_cast<std::size_t>(e)]); }

inline Emotion emotion_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kEmotionCount; ++i)
    if (kLabels[i] == s) return static_cast<Emotion>(i);
  throw Error(ErrorKind::Parse, "unknown emotion label: " + std::string(s));
}

using RawScores = std::array<double, kEmotionCount>;

/// Probability vector over the seven labels; only constructible through
/// normalize_scores or from_normalized, which check the invariants.
class EmotionScores {
 public:
  EmotionScores() { values_.fill(1.0 / kEmotionCount); }

  static EmotionScores from_normalized(const RawScores& v) {
    double total = 0.0;
    for (const double x : v) {
      if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::Value, "emotion score outside [0,1]");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorKind::Value, "emotion scores must sum to 1");
    EmotionScores s;
    s.values_ = v;
    return s;
  }

  [[nodiscard]] double operator[](Emotion e) const { return values_[static_cast<std::size_t>(e)]; }
  [[nodiscard]] const RawScores& values() const noexcept { return values_; }

  friend bool operator==(const EmotionScores&, const EmotionScores&) = default;

 private:
  RawScores values_{};
};

inline EmotionScores normalize_scores(const RawScores& raw) {
  double total = 0.0;
  for (const double x : raw) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::Value, "raw emotion scores must be finite and >= 0");
    total += x;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::Value, "raw emotion scores are all zero");
  RawScores out{};
  for (std::size_t i = 0; i < kEmotionCount; ++i) out[i] = raw[i] / total;
  return EmotionScores::from_normalized(out);
}

/// Map form; every label must be present.
inline EmotionScores normalize_scores(const std::map<std::string, double>& raw) {
  if (raw.size() != kEmotionCount) throw Error(ErrorKind::Value, "raw scores need exactly the seven labels");
  RawScores v{};
  for (const auto& [label, x] : raw) v[static_cast<std::size_t>(emotion_from_string(label))] = x;
  return normalize_scores(v);
}

struct DominantEmotion {
  Emotion label = Emotion::Neutral;
  double score = 0.0;

  friend bool operator==(const DominantEmotion&, const DominantEmotion&) = default;
};

inline DominantEmotion dominant_emotion(const EmotionScores& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kEmotionCount; ++i)
    if (s.values()[i] > s.values()[best]) best = i;
  return {static_cast<Emotion>(best), s.values()[best]};
}

/// Debounced sadness detector. Fires on every frame once `consecutive`
/// qualifying frames (sad with score >= tau) have been seen in a row; any
/// other frame resets the run.
class SadnessTrigger {
 public:
  explicit SadnessTrigger(double tau = 0.5, int consecutive = 3) : tau_(tau), consecutive_(consecutive) {
    if (!(tau >= 0.0 && tau <= 1.0) || consecutive < 1) throw Error(ErrorKind::Config, "invalid sadness trigger");
  }

  bool update(const DominantEmotion& d) {
    run_ = (d.label == Emotion::Sad && d.score >= tau_) ? run_ + 1 : 0;
    return run_ >= consecutive_;
  }

  void reset() noexcept { run_ = 0; }
  [[nodiscard]] int run() const noexcept { return run_; }
  [[nodiscard]] double tau() const noexcept { return tau_; }
  [[nodiscard]] int consecutive() const noexcept { return consecutive_; }

 private:
  double tau_;
  int consecutive_;
  int run_ = 0;
};

class EmotionClassifier {
 public:
  virtual ~EmotionClassifier() = default;
  virtual EmotionScores classify(const vision::GrayFrame& face) = 0;
};

/// Replays injected scores in order, one per classify call.
class ScriptedClassifier final : public EmotionClassifier {
 public:
  explicit ScriptedClassifier(std::vector<EmotionScores> queue) : queue_(queue.begin(), queue.end()) {}

  EmotionScores classify(const vision::GrayFrame&) override {
    if (queue_.empty()) throw Error(ErrorKind::State, "scripted emotion queue exhausted");
    auto s = queue_.front();
    queue_.pop_front();
    return s;
  }

  [[nodiscard]] std::size_t remaining() const noexcept { return queue_.size(); }

 private:
  std::deque<EmotionScores> queue_;
};

/// Demo classifier. Mean intensity picks a band (dark < 85 <= mid < 170 <= bright),
/// standard deviation picks flat (< 24) or textured, and the pair indexes a
/// fixed table. Not a model of anything.
class HeuristicStub final : public EmotionClassifier {
 public:
  static constexpr double kDarkBelow = 85.0;
  static constexpr double kBrightFrom = 170.0;
  static constexpr double kTexturedFrom = 24.0;

  //                                               angry disgust fear happy neutral sad surprise
  static constexpr std::array<RawScores, 6> kTable{{{0.05, 0.05, 0.10, 0.05, 0.15, 0.55, 0.05},   // dark, flat
                                                    {0.25, 0.10, 0.20, 0.05, 0.10, 0.25, 0.05},   // dark, textured
                                                    {0.05, 0.05, 0.05, 0.10, 0.65, 0.05, 0.05},   // mid, flat
                                                    {0.05, 0.05, 0.05, 0.45, 0.25, 0.05, 0.10},   // mid, textured
                                                    {0.05, 0.05, 0.05, 0.30, 0.40, 0.05, 0.10},   // bright, flat
                                                    {0.05, 0.05, 0.15, 0.25, 0.10, 0.05, 0.35}}};  // bright, textured

  static std::size_t band(const vision::GrayFrame& face) {
    double sum = 0.0, sq = 0.0;
    for (const auto p : face.pixels()) {
      sum += p;
      sq += static_cast<double>(p) * p;
    }
    const double n = static_cast<double>(face.pixels().size());
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(sq / n - mean * mean, 0.0));
    const std::size_t level = mean < kDarkBelow ? 0 : (mean < kBrightFrom ? 1 : 2);
    return 2 * level + (sd >= kTexturedFrom ? 1 : 0);
  }

  EmotionScores classify(const vision::GrayFrame& face) override { return normalize_scores(kTable[band(face)]); }
};

inline nlohmann::json to_json(const EmotionScores& s) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kEmotionCount; ++i) j[std::string(kLabels[i])] = s.values()[i];
  return j;
}

inline nlohmann::json to_json(const DominantEmotion& d) { return {{"label", to_string(d.label)}, {"score", d.score}}; }

/// A record is either a 7-element array in label order or an object keyed by
/// label. Values are raw and get normalized.
inline EmotionScores scores_from_json(const nlohmann::json& j) {
  try {
    if (j.is_array()) {
      if (j.size() != kEmotionCount) throw Error(ErrorKind::Parse, "score array needs 7 values");
      RawScores v{};
      for (std::size_t i = 0; i < kEmotionCount; ++i) v[i] = j[i].get<double>();
      return normalize_scores(v);
    }
    if (j.is_object()) return normalize_scores(j.get<std::map<std::string, double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad score record: ") + e.what());
  }
  throw Error(ErrorKind::Parse, "score record must be an array or object");
}

inline DominantEmotion dominant_from_json(const nlohmann::json& j) {
  return {emotion_from_string(j.at("label").get<std::string>()), j.at("score").get<double>()};
}

inline std::vector<EmotionScores> scripted_scores_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "scripted scores file must be a JSON list");
  std::vector<EmotionScores> out;
  for (const auto& rec : j) out.push_back(scores_from_json(rec));
  return out;
}

}  // namespace sar::emotion
