#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sar/dialogue/transport.hpp"
#include "sar/session/config.hpp"
#include "sar/session/session.hpp"
#include "sar/session/stats.hpp"

namespace sar::session {

struct BenchOptions {
  int turns = 25;
  std::string delay_model = "uniform:5000,10000";
  int concurrency = 1;
  std::uint64_t seed = 1;
  bool force_live = false;
};

struct BenchResult {
  std::vector<std::int64_t> latencies_ms;  // per turn, as recorded by the session
  std::vector<std::int64_t> wall_ms;       // user utterance in, robot line out
  int regenerated = 0;
  int degraded = 0;
};

inline nlohmann::json to_json(const BenchResult& r) {
  auto j = latency_summary(r.latencies_ms);
  j["latencies_ms"] = r.latencies_ms;
  j["regenerated"] = r.regenerated;
  j["degraded"] = r.degraded;
  if (!r.wall_ms.empty()) j["wall_p50_ms"] = percentile(r.wall_ms, 50);
  return j;
}

/// Lines the benchmark user says, chosen so none reads as yes or no.
inline const std::vector<std::string>& bench_script() {
  static const std::vector<std::string> lines{
      "I had a long day at school today.",
      "My friend moved to another city last month.",
      "I keep thinking about the test on Friday.",
      "The weather has been grey all week.",
      "I tried to draw a picture of my cat.",
      "Sometimes I feel tired in the afternoon.",
      "We had pasta for dinner again.",
      "I want to learn how to play the piano.",
  };
  return lines;
}

/// Drives scripted conversations through real sessions (inline dialogue
/// mode, so each user line blocks until the robot answers) and collects the
/// per-turn latency every session records. Turns are split across
/// `concurrency` independent sessions, each with its own stub seed.
inline BenchResult run_bench(ServiceConfig cfg, const BenchOptions& opt) {
  if (opt.turns < 1) throw Error(ErrorKind::Value, "bench needs at least one turn");
  if (opt.concurrency < 1) throw Error(ErrorKind::Value, "bench concurrency must be >= 1");
  if (!cfg.llm.is_stub() && !opt.force_live) {
    throw Error(ErrorKind::Config, "bench refuses a live LLM endpoint; pass --force-live to allow it");
  }
  (void)dialogue::DelayModel::parse(opt.delay_model);
  cfg.llm.stub.delay_model = opt.delay_model;
  cfg.dialogue_mode = DialogueMode::Inline;
  cfg.log_dir.reset();
  cfg.emotion_classifier = "heuristic";
  cfg.scripted_scores_path.reset();
  const int workers = std::min(opt.concurrency, opt.turns);
  cfg.max_sessions = static_cast<std::size_t>(workers);

  const auto base = std::make_shared<const ServiceConfig>(cfg);
  const auto models = std::make_shared<const Models>();
  BenchResult result;
  std::mutex mu;
  std::vector<std::thread> pool;
  std::vector<std::string> failures;
  for (int w = 0; w < workers; ++w) {
    const int quota = opt.turns / workers + (w < opt.turns % workers ? 1 : 0);
    pool.emplace_back([&, w, quota] {
      try {
        auto wcfg = std::make_shared<ServiceConfig>(*base);
        wcfg->llm.stub.seed = opt.seed + static_cast<std::uint64_t>(w) * 7919;
        Session s("bench-" + std::to_string(w), wcfg, models);
        std::int64_t t = 0;
        s.submit_event({t, robot::FaceDetected{{40, 40, 64, 64}, std::nullopt}});
        s.submit_event({t, robot::FaceDetected{{40, 40, 64, 64}, std::nullopt}});
        std::vector<std::int64_t> wall;
        for (int i = 0; i < quota; ++i) {
          t += 1000;
          const auto& line = bench_script()[static_cast<std::size_t>(i + w) % bench_script().size()];
          const auto start = dialogue::steady_now_ms();
          s.submit_event({t, robot::UserUtterance{line}});
          wall.push_back(dialogue::steady_now_ms() - start);
        }
        const auto m = s.metrics();
        std::lock_guard lock(mu);
        for (const auto& tm : m) {
          result.latencies_ms.push_back(tm.latency_ms());
          result.regenerated += tm.regenerated ? 1 : 0;
          result.degraded += tm.degraded ? 1 : 0;
        }
        result.wall_ms.insert(result.wall_ms.end(), wall.begin(), wall.end());
        if (static_cast<int>(m.size()) != quota) {
          failures.push_back("worker " + std::to_string(w) + " completed " + std::to_string(m.size()) + " of " +
                             std::to_string(quota) + " turns");
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        failures.push_back(e.what());
      }
    });
  }
  for (auto& th : pool) th.join();
  if (!failures.empty()) throw Error(ErrorKind::State, "bench failed: " + failures.front());
  return result;
}

}  // namespace sar::session
