#include <gtest/gtest.h>

#include <random>

#include "sar/emotion/emotion.hpp"
#include "support/emotion_oracles.hpp"

using namespace sar;
using namespace sar::emotion;
using oracle::oracle_argmax;
using oracle::oracle_trigger;
using oracle::random_raw;

TEST(Normalize, EqualRawGivesUniform) {
  RawScores r;
  r.fill(1.0);
  const auto s = normalize_scores(r);
  for (const double v : s.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 7.0);
}

TEST(Normalize, SingleLabel) {
  const auto s = normalize_scores(std::map<std::string, double>{
      {"angry", 0}, {"disgust", 0}, {"fear", 0}, {"happy", 0}, {"neutral", 0}, {"sad", 3}, {"surprise", 0}});
  EXPECT_EQ(s[Emotion::Sad], 1.0);
  EXPECT_EQ(s[Emotion::Happy], 0.0);
}

TEST(Normalize, RandomMatchesScalarDivision) {
  std::mt19937 rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto raw = random_raw(rng, false);
    const auto s = normalize_scores(raw);
    double total = 0, sum = 0;
    for (const double x : raw) total += x;
    for (std::size_t k = 0; k < kEmotionCount; ++k) {
      EXPECT_NEAR(s.values()[k], raw[k] / total, 1e-15);
      sum += s.values()[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Normalize, RejectsZeroNegativeAndIncomplete) {
  RawScores zero{};
  EXPECT_THROW(normalize_scores(zero), Error);
  RawScores neg{1, 1, 1, 1, 1, 1, -0.5};
  EXPECT_THROW(normalize_scores(neg), Error);
  RawScores nan{1, 1, 1, 1, 1, 1, std::nan("")};
  EXPECT_THROW(normalize_scores(nan), Error);
  EXPECT_THROW(normalize_scores(std::map<std::string, double>{{"sad", 1}}), Error);
  try {
    normalize_scores(zero);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Value);
  }
  EXPECT_THROW(EmotionScores::from_normalized({0.5, 0.5, 0.5, 0, 0, 0, 0}), Error);
}

TEST(Dominant, ClearMaximum) {
  const auto s = normalize_scores(RawScores{0.02, 0.01, 0.02, 0.02, 0.02, 0.9, 0.01});
  const auto d = dominant_emotion(s);
  EXPECT_EQ(d.label, Emotion::Sad);
  EXPECT_DOUBLE_EQ(d.score, 0.9);
}

TEST(Dominant, UniformTieGoesToAngry) {
  RawScores r;
  r.fill(1.0);
  const auto d = dominant_emotion(normalize_scores(r));
  EXPECT_EQ(d.label, Emotion::Angry);
  EXPECT_DOUBLE_EQ(d.score, 1.0 / 7.0);
}

TEST(Dominant, RandomMatchesMaxScanOracle) {
  std::mt19937 rng(12);
  int ties = 0;
  for (int i = 0; i < 1000; ++i) {
    const bool with_ties = i % 2 == 0;
    const auto s = normalize_scores(random_raw(rng, with_ties));
    const auto d = dominant_emotion(s);
    const auto [name, score] = oracle_argmax(s);
    EXPECT_EQ(to_string(d.label), name);
    EXPECT_EQ(d.score, score);
    ties += std::count(s.values().begin(), s.values().end(), score) > 1;
  }
  EXPECT_GT(ties, 50);  // the tie branch was actually exercised
}

TEST(Dominant, InvariantUnderRescaling) {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> k(0.01, 100.0);
  for (int i = 0; i < 300; ++i) {
    auto raw = random_raw(rng, i % 3 == 0);
    const auto d = dominant_emotion(normalize_scores(raw));
    const double c = k(rng);
    for (auto& x : raw) x *= c;
    EXPECT_EQ(dominant_emotion(normalize_scores(raw)).label, d.label);
  }
}

TEST(Dominant, SmallBoostOfMaxKeepsLabel) {
  std::mt19937 rng(14);
  for (int i = 0; i < 300; ++i) {
    auto raw = random_raw(rng, false);
    const auto d = dominant_emotion(normalize_scores(raw));
    raw[static_cast<std::size_t>(d.label)] += 0.5;
    EXPECT_EQ(dominant_emotion(normalize_scores(raw)).label, d.label);
  }
}

TEST(Sadness, ThreeInARowFires) {
  SadnessTrigger t;
  EXPECT_FALSE(t.update({Emotion::Sad, 0.9}));
  EXPECT_FALSE(t.update({Emotion::Sad, 0.9}));
  EXPECT_TRUE(t.update({Emotion::Sad, 0.9}));
}

TEST(Sadness, InterruptionResets) {
  SadnessTrigger t;
  for (const auto& d : {DominantEmotion{Emotion::Sad, 0.9}, DominantEmotion{Emotion::Happy, 0.8},
                        DominantEmotion{Emotion::Sad, 0.9}, DominantEmotion{Emotion::Sad, 0.9}}) {
    EXPECT_FALSE(t.update(d));
  }
}

TEST(Sadness, BelowTauDoesNotQualify) {
  SadnessTrigger t(0.5, 2);
  EXPECT_FALSE(t.update({Emotion::Sad, 0.49}));
  EXPECT_FALSE(t.update({Emotion::Sad, 0.5}));
  EXPECT_TRUE(t.update({Emotion::Sad, 0.5}));
  EXPECT_THROW(SadnessTrigger(0.5, 0), Error);
}

TEST(Sadness, RandomStreamsMatchReferenceAutomaton) {
  std::mt19937 rng(15);
  std::uniform_int_distribution<int> label(0, 6);
  std::uniform_real_distribution<double> score(0.2, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double tau = 0.3 + 0.1 * (trial % 5);
    const int n = 1 + trial % 4;
    std::vector<DominantEmotion> stream;
    for (int i = 0; i < 60; ++i) {
      // bias towards sad so long runs occur
      const auto l = (rng() % 2) ? Emotion::Sad : static_cast<Emotion>(label(rng));
      stream.push_back({l, score(rng)});
    }
    SadnessTrigger t(tau, n);
    const auto expect = oracle_trigger(stream, tau, n);
    for (std::size_t i = 0; i < stream.size(); ++i) EXPECT_EQ(t.update(stream[i]), expect[i]) << trial << ":" << i;
  }
}

TEST(Scripted, ReplaysExactlyThenFails) {
  std::vector<EmotionScores> q{normalize_scores(RawScores{1, 0, 0, 0, 0, 0, 0}),
                               normalize_scores(RawScores{0, 0, 0, 0, 0, 1, 0})};
  ScriptedClassifier c(q);
  const vision::GrayFrame f(8, 8);
  EXPECT_EQ(c.classify(f), q[0]);
  EXPECT_EQ(c.classify(f), q[1]);
  EXPECT_EQ(c.remaining(), 0u);
  try {
    c.classify(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
}

TEST(Heuristic, BandsAndDeterminism) {
  HeuristicStub h;
  const vision::GrayFrame dark(16, 16, 30), mid(16, 16, 128), bright(16, 16, 220);
  EXPECT_EQ(dominant_emotion(h.classify(dark)).label, Emotion::Sad);
  EXPECT_EQ(dominant_emotion(h.classify(mid)).label, Emotion::Neutral);
  EXPECT_EQ(dominant_emotion(h.classify(bright)).label, Emotion::Neutral);
  vision::GrayFrame checker(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) checker.at(x, y) = (x + y) % 2 ? 88 : 168;  // mean 128, sd 40
  EXPECT_EQ(HeuristicStub::band(checker), 3u);
  EXPECT_EQ(dominant_emotion(h.classify(checker)).label, Emotion::Happy);
  EXPECT_EQ(h.classify(checker), h.classify(checker));
}

TEST(Json, RecordsInBothForms) {
  const auto a = scores_from_json(nlohmann::json::parse("[0,0,0,0,0,2,2]"));
  EXPECT_DOUBLE_EQ(a[Emotion::Sad], 0.5);
  EXPECT_DOUBLE_EQ(a[Emotion::Surprise], 0.5);
  const auto b = scores_from_json(to_json(a));
  EXPECT_EQ(a, b);
  const auto list = scripted_scores_from_json(nlohmann::json::parse(
      R"([[1,1,1,1,1,1,1], {"angry":0,"disgust":0,"fear":0,"happy":1,"neutral":0,"sad":0,"surprise":0}])"));
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(dominant_emotion(list[1]).label, Emotion::Happy);
  EXPECT_THROW(scores_from_json(nlohmann::json::parse("[1,2]")), Error);
  EXPECT_THROW(scores_from_json(nlohmann::json::parse(R"({"sad":"x"})")), Error);
  EXPECT_THROW(scripted_scores_from_json(nlohmann::json::parse("{}")), Error);
  const DominantEmotion d{Emotion::Fear, 0.4};
  EXPECT_EQ(dominant_from_json(to_json(d)), d);
}
