#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sar/dialogue/client.hpp"
#include "sar/dialogue/http_transport.hpp"
#include "sar/emotion/emotion.hpp"
#include "sar/face/lbph.hpp"
#include "sar/gesture/synthetic.hpp"
#include "sar/gesture/tracker.hpp"
#include "sar/robot/machine.hpp"
#include "sar/session/config.hpp"
#include "sar/session/log.hpp"
#include "sar/session/stats.hpp"
#include "sar/vision/cascade.hpp"
#include "sar/vision/detect.hpp"

namespace sar::session {

/// Models loaded once at startup and shared read-only by every session.
struct Models {
  std::optional<vision::Cascade> cascade;
  std::optional<face::LbphModel> lbph;
  std::vector<emotion::EmotionScores> scripted_scores;
};

inline Models load_models(const ServiceConfig& cfg) {
  Models m;
  if (cfg.cascade_path) m.cascade = vision::load_cascade(*cfg.cascade_path);
  if (cfg.lbph_path) m.lbph = face::load_lbph(*cfg.lbph_path);
  if (cfg.scripted_scores_path) m.scripted_scores = load_scripted_scores(*cfg.scripted_scores_path);
  return m;
}

inline std::int64_t wall_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

using Subscriber = std::function<void(const nlohmann::json&)>;

/// One interaction. Every mutation goes through the session mutex, so
/// events are applied one at a time in arrival order. LLM turns run on
/// worker threads against a copy of the dialogue context and come back as
/// robot_turn_ready events.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const ServiceConfig> cfg, std::shared_ptr<const Models> models)
      : id_(std::move(id)),
        cfg_(std::move(cfg)),
        models_(std::move(models)),
        created_t_(wall_now_ms()),
        started_(std::chrono::steady_clock::now()),
        tracker_(cfg_->flow, cfg_->gesture),
        client_(cfg_->llm, dialogue::make_transport(cfg_->llm)) {
    world_.hw = cfg_->hardware;
    initial_hw_ = cfg_->hardware;
    ctx_.max_history = cfg_->history_limit;
    ctx_.persona = cfg_->persona;
    if (cfg_->emotion_classifier == "scripted") {
      classifier_ = std::make_unique<emotion::ScriptedClassifier>(models_->scripted_scores);
    } else {
      classifier_ = std::make_unique<emotion::HeuristicStub>();
    }
    if (cfg_->log_dir) {
      std::filesystem::create_directories(*cfg_->log_dir);
      log_.emplace(*cfg_->log_dir / (id_ + ".jsonl"));
      log_->write(to_json(header()));
    }
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  ~Session() { join_workers(); }

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] std::int64_t created_t() const noexcept { return created_t_; }

  /// Milliseconds since the session was created; the default event time.
  [[nodiscard]] std::int64_t clock_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started_).count();
  }

  /// Applies one wire event. Besides SimEvents this accepts two requests the
  /// console uses: synthetic_gesture (renders a head burst and runs it
  /// through the tracker) and emotion_sample (asks the classifier). A
  /// repeated idempotency key returns the first response without applying
  /// anything.
  nlohmann::json submit(const nlohmann::json& body, const std::optional<std::string>& idempotency_key = {}) {
    std::unique_lock lock(mu_);
    if (idempotency_key) {
      if (const auto it = idempotent_.find(*idempotency_key); it != idempotent_.end()) return it->second;
    }
    if (ended_) throw Error(ErrorKind::Gone, "session " + id_ + " has ended");
    if (!body.is_object()) throw Error(ErrorKind::Parse, "event must be a JSON object");
    const auto type = body.value("type", std::string{});
    nlohmann::json response;
    if (type == "synthetic_gesture") {
      response = synthetic_gesture_locked(body);
    } else if (type == "emotion_sample") {
      response = emotion_sample_locked(body);
    } else {
      const auto e = robot::event_from_json(body, clock_ms());
      response = {{"record", to_json(apply_locked(e))}};
    }
    if (idempotency_key) remember_locked(*idempotency_key, response);
    lock.unlock();
    return response;
  }

  /// Same as submit() for an already decoded event.
  LogRecord submit_event(const robot::SimEvent& e) {
    std::lock_guard lock(mu_);
    if (ended_) throw Error(ErrorKind::Gone, "session " + id_ + " has ended");
    return apply_locked(e);
  }

  /// Runs one camera frame through detection, identity, emotion, and the
  /// head tracker, and applies whatever events they produce.
  nlohmann::json submit_frame(vision::GrayFrame frame) {
    std::lock_guard lock(mu_);
    if (ended_) throw Error(ErrorKind::Gone, "session " + id_ + " has ended");
    if (!models_->cascade) throw Error(ErrorKind::State, "no cascade model configured");
    // the tracker needs strictly increasing frame times
    const std::int64_t t = std::max({frame.timestamp_ms(), last_t_, last_frame_t_ + 1});
    frame.set_timestamp_ms(t);
    last_frame_t_ = t;
    const auto boxes = vision::detect_faces(*models_->cascade, frame, cfg_->detect);
    nlohmann::json records = nlohmann::json::array();
    nlohmann::json detection = nullptr;
    std::optional<vision::Rect> face_box;
    if (!boxes.empty()) {
      const auto& b = boxes.front();
      face_box = vision::Rect{b.x, b.y, b.w, b.h};
      detection = vision::to_json(b);
      const auto face = face::crop(frame, *face_box);
      robot::FaceDetected fd{*face_box, std::nullopt};
      if (models_->lbph && models_->lbph->trained()) {
        const auto p = models_->lbph->predict(face);
        fd.identity = p.label;
        detection["identity"] = p.label ? nlohmann::json(*p.label) : nlohmann::json(nullptr);
        detection["distance"] = p.distance;
      }
      records.push_back(to_json(apply_locked({t, fd})));
      const auto dom = emotion::dominant_emotion(classifier_->classify(face));
      records.push_back(to_json(apply_locked({t, robot::EmotionObserved{dom}})));
    } else if (world_.machine.mem.face_present) {
      records.push_back(to_json(apply_locked({t, robot::FaceLost{}})));
    }
    tracker_.push_frame(frame, face_box);
    nlohmann::json verdict = nullptr;
    try {
      const auto v = tracker_.classify();
      verdict = gesture::to_json(v);
      if (v.kind != gesture::GestureKind::None) {
        records.push_back(to_json(apply_locked({t, robot::GestureObserved{v}})));
        tracker_ = gesture::HeadGestureTracker(cfg_->flow, cfg_->gesture);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientData) throw;
    }
    return {{"detection", detection}, {"gesture", verdict}, {"records", records}};
  }

  void subscribe(int token, Subscriber fn) {
    std::lock_guard lock(mu_);
    subscribers_[token] = std::move(fn);
  }

  void unsubscribe(int token) {
    std::lock_guard lock(mu_);
    subscribers_.erase(token);
  }

  /// Registers a subscriber and returns the snapshot it should render
  /// first; both happen under one lock so no update is missed or doubled.
  nlohmann::json subscribe_with_snapshot(int token, Subscriber fn) {
    std::lock_guard lock(mu_);
    subscribers_[token] = std::move(fn);
    return snapshot_locked();
  }

  [[nodiscard]] nlohmann::json snapshot() const {
    std::lock_guard lock(mu_);
    return snapshot_locked();
  }

  [[nodiscard]] nlohmann::json metrics_json() const {
    std::lock_guard lock(mu_);
    nlohmann::json turns = nlohmann::json::array();
    std::vector<std::int64_t> lat;
    for (const auto& m : metrics_) {
      turns.push_back(dialogue::to_json(m));
      lat.push_back(m.latency_ms());
    }
    return {{"id", id_}, {"turns", turns}, {"summary", latency_summary(lat)}};
  }

  [[nodiscard]] std::vector<dialogue::TurnMetrics> metrics() const {
    std::lock_guard lock(mu_);
    return metrics_;
  }

  [[nodiscard]] std::vector<LogRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  [[nodiscard]] LogHeader header() const {
    return {id_, robot::to_json(cfg_->hug), robot::to_json(initial_hw_)};
  }

  /// The log as JSONL, header first.
  [[nodiscard]] std::string log_text() const {
    std::lock_guard lock(mu_);
    std::string out = to_json(header()).dump() + "\n";
    for (const auto& r : records_) out += to_json(r).dump() + "\n";
    return out;
  }

  [[nodiscard]] robot::World world() const {
    std::lock_guard lock(mu_);
    return world_;
  }

  [[nodiscard]] dialogue::DialogueContext context() const {
    std::lock_guard lock(mu_);
    return ctx_;
  }

  [[nodiscard]] std::vector<dialogue::Utterance> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }

  [[nodiscard]] bool ended() const {
    std::lock_guard lock(mu_);
    return ended_;
  }

  [[nodiscard]] std::size_t pending_turns() const {
    std::lock_guard lock(mu_);
    return inflight_;
  }

  /// Blocks until no LLM turn is in flight; false on timeout.
  bool wait_idle(std::chrono::milliseconds timeout = std::chrono::milliseconds(60000)) {
    std::unique_lock lock(mu_);
    return idle_cv_.wait_for(lock, timeout, [&] { return inflight_ == 0; });
  }

  [[nodiscard]] dialogue::DialogueClient& client() noexcept { return client_; }

  /// Scripted classifier entries left, or nullopt for the heuristic one.
  [[nodiscard]] std::optional<std::size_t> scripted_remaining() const {
    std::lock_guard lock(mu_);
    if (const auto* s = dynamic_cast<const emotion::ScriptedClassifier*>(classifier_.get())) return s->remaining();
    return std::nullopt;
  }

  void join_workers() {
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(workers_);
    }
    for (auto& w : workers) {
      if (w.joinable()) w.join();
    }
  }

 private:
  static constexpr std::size_t kIdempotencyMemory = 512;

  LogRecord apply_locked(const robot::SimEvent& e) {
    std::vector<robot::SimEvent> queue{e};
    LogRecord first;
    for (std::size_t i = 0; i < queue.size(); ++i) {
      auto [record, turn_requested] = apply_one_locked(queue[i]);
      if (i == 0) first = record;
      if (!turn_requested) continue;
      if (cfg_->dialogue_mode == DialogueMode::Inline) {
        auto r = client_.generate_turn(ctx_, cfg_->guard_threshold);
        metrics_.push_back(r.metrics);
        queue.push_back({last_t_, robot::RobotTurnReady{r.utterance.text}});
      } else {
        start_worker_locked();
      }
    }
    return first;
  }

  std::pair<LogRecord, bool> apply_one_locked(const robot::SimEvent& e) {
    const std::size_t transcript_before = transcript_.size();
    const std::int64_t t_ctx = std::max(ctx_.last_t(), e.t);
    if (const auto* u = std::get_if<robot::UserUtterance>(&e.body)) {
      if (!u->text.empty()) push_utterance_locked({dialogue::Role::User, u->text, t_ctx});
    } else if (const auto* f = std::get_if<robot::FaceDetected>(&e.body)) {
      if (f->identity) ctx_.user_name = f->identity;
    } else if (const auto* em = std::get_if<robot::EmotionObserved>(&e.body)) {
      ctx_.current_emotion = em->emotion;
      last_emotion_ = em->emotion;
    } else if (const auto* g = std::get_if<robot::GestureObserved>(&e.body)) {
      last_gesture_ = g->verdict;
    } else if (const auto* op = std::get_if<robot::OperatorCommand>(&e.body);
               op && op->command == robot::OperatorCommandKind::Reset) {
      ctx_.user_name.reset();
      ctx_.current_emotion = {};
    }

    const auto r = robot::advance(world_, e, cfg_->hug);
    world_ = r.world;
    last_t_ = std::max(last_t_, e.t);
    bool turn_requested = false;
    for (const auto& a : r.actions) {
      if (const auto* s = std::get_if<robot::Speak>(&a)) {
        push_utterance_locked({dialogue::Role::Robot, s->text, std::max(ctx_.last_t(), e.t)});
      } else if (std::holds_alternative<robot::RequestLlmTurn>(a)) {
        turn_requested = true;
      }
    }

    LogRecord rec{next_seq_++, e.t, robot::to_json(e), robot::to_string(world_.machine.mode), robot::to_json(r.actions)};
    records_.push_back(rec);
    if (log_) log_->write(to_json(rec));
    if (const auto* op = std::get_if<robot::OperatorCommand>(&e.body);
        op && op->command == robot::OperatorCommandKind::End) {
      ended_ = true;
    }

    nlohmann::json delta = nlohmann::json::array();
    for (std::size_t i = transcript_before; i < transcript_.size(); ++i) delta.push_back(dialogue::to_json(transcript_[i]));
    publish_locked({{"type", "update"},
                    {"id", id_},
                    {"seq", rec.seq},
                    {"event", rec.event},
                    {"actions", rec.actions},
                    {"state", rec.state_after},
                    {"hw", robot::to_json(world_.hw)},
                    {"transcript_delta", delta},
                    {"verdicts", verdicts_locked()},
                    {"ended", ended_}});
    return {rec, turn_requested};
  }

  void push_utterance_locked(dialogue::Utterance u) {
    transcript_.push_back(u);
    ctx_.push(std::move(u));
  }

  void start_worker_locked() {
    ++inflight_;
    auto ctx = ctx_;
    workers_.emplace_back([this, ctx = std::move(ctx)] {
      dialogue::TurnResult r;
      std::string failure;
      try {
        r = client_.generate_turn(ctx, cfg_->guard_threshold);
      } catch (const std::exception& ex) {
        failure = ex.what();
      }
      std::lock_guard lock(mu_);
      if (failure.empty()) {
        metrics_.push_back(r.metrics);
        publish_locked({{"type", "metrics"}, {"id", id_}, {"turn", dialogue::to_json(r.metrics)}});
        if (!ended_) {
          try {
            apply_locked({std::max(last_t_, clock_ms()), robot::RobotTurnReady{r.utterance.text}});
          } catch (const std::exception& ex) {
            failure = ex.what();
          }
        }
      }
      if (!failure.empty()) publish_locked({{"type", "error"}, {"id", id_}, {"message", failure}});
      --inflight_;
      idle_cv_.notify_all();
    });
  }

  nlohmann::json synthetic_gesture_locked(const nlohmann::json& body) {
    const auto kind = gesture::gesture_kind_from_string(body.value("kind", std::string("nod")));
    const std::int64_t t = std::max(body.value("t", clock_ms()), last_t_);
    gesture::BurstParams p;
    p.duration_ms = std::max<std::int64_t>(cfg_->gesture.window_ms, 1);
    p.t0 = std::max<std::int64_t>(t - p.duration_ms, 0);
    p.peak_to_peak_px = body.value("peak_to_peak_px", p.peak_to_peak_px);
    p.seed = body.value("seed", p.seed);
    const auto burst = gesture::render_head_burst(kind, p);
    gesture::HeadGestureTracker tracker(cfg_->flow, cfg_->gesture);
    for (const auto& f : burst.frames) tracker.push_frame(f, burst.face);
    const auto verdict = tracker.classify();
    const auto rec = apply_locked({burst.frames.back().timestamp_ms(), robot::GestureObserved{verdict}});
    return {{"verdict", gesture::to_json(verdict)}, {"frames", burst.frames.size()}, {"record", to_json(rec)}};
  }

  nlohmann::json emotion_sample_locked(const nlohmann::json& body) {
    const std::int64_t t = std::max(body.value("t", clock_ms()), last_t_);
    // the heuristic classifier needs pixels; a flat patch of the requested brightness stands in for a face crop
    const int level = std::clamp(body.value("intensity", 128), 0, 255);
    const vision::GrayFrame patch(64, 64, static_cast<std::uint8_t>(level), t);
    const auto scores = classifier_->classify(patch);
    const auto dom = emotion::dominant_emotion(scores);
    const auto rec = apply_locked({t, robot::EmotionObserved{dom}});
    return {{"scores", emotion::to_json(scores)}, {"dominant", emotion::to_json(dom)}, {"record", to_json(rec)}};
  }

  void remember_locked(const std::string& key, const nlohmann::json& response) {
    idempotent_[key] = response;
    idempotent_order_.push_back(key);
    while (idempotent_order_.size() > kIdempotencyMemory) {
      idempotent_.erase(idempotent_order_.front());
      idempotent_order_.pop_front();
    }
  }

  void publish_locked(const nlohmann::json& msg) {
    for (const auto& [token, fn] : subscribers_) {
      try {
        fn(msg);
      } catch (...) {
        // a broken consumer must not stall the session loop
      }
    }
  }

  [[nodiscard]] nlohmann::json verdicts_locked() const {
    return {{"gesture", last_gesture_ ? gesture::to_json(*last_gesture_) : nlohmann::json(nullptr)},
            {"emotion", last_emotion_ ? emotion::to_json(*last_emotion_) : nlohmann::json(nullptr)}};
  }

  [[nodiscard]] nlohmann::json snapshot_locked() const {
    nlohmann::json transcript = nlohmann::json::array();
    for (const auto& u : transcript_) transcript.push_back(dialogue::to_json(u));
    nlohmann::json classifier{{"kind", cfg_->emotion_classifier}};
    if (const auto* s = dynamic_cast<const emotion::ScriptedClassifier*>(classifier_.get())) {
      classifier["remaining"] = s->remaining();
    }
    return {{"type", "snapshot"},
            {"id", id_},
            {"created_t", created_t_},
            {"state", robot::to_string(world_.machine.mode)},
            {"hw", robot::to_json(world_.hw)},
            {"memory", robot::to_json(world_.machine.mem)},
            {"dialogue", dialogue::to_json(ctx_)},
            {"transcript", transcript},
            {"verdicts", verdicts_locked()},
            {"seq", next_seq_ - 1},
            {"events", records_.size()},
            {"pending_turns", inflight_},
            {"turns", metrics_.size()},
            {"classifier", classifier},
            {"llm", dialogue::to_json(cfg_->llm)},
            {"ended", ended_}};
  }

  const std::string id_;
  const std::shared_ptr<const ServiceConfig> cfg_;
  const std::shared_ptr<const Models> models_;
  const std::int64_t created_t_;
  const std::chrono::steady_clock::time_point started_;

  mutable std::mutex mu_;
  std::condition_variable idle_cv_;
  robot::World world_;
  robot::HardwareState initial_hw_;
  dialogue::DialogueContext ctx_;
  std::vector<LogRecord> records_;
  std::vector<dialogue::TurnMetrics> metrics_;
  std::vector<dialogue::Utterance> transcript_;
  std::optional<gesture::GestureVerdict> last_gesture_;
  std::optional<emotion::DominantEmotion> last_emotion_;
  std::unique_ptr<emotion::EmotionClassifier> classifier_;
  gesture::HeadGestureTracker tracker_;
  dialogue::DialogueClient client_;
  std::optional<LogWriter> log_;
  std::unordered_map<std::string, nlohmann::json> idempotent_;
  std::deque<std::string> idempotent_order_;
  std::map<int, Subscriber> subscribers_;
  std::vector<std::thread> workers_;
  std::size_t inflight_ = 0;
  std::uint64_t next_seq_ = 1;
  std::int64_t last_t_ = 0;
  std::int64_t last_frame_t_ = -1;
  bool ended_ = false;
};

/// Owns every live session. Creation and lookup are thread-safe; per-event
/// work happens on the session under its own lock.
class SessionManager {
 public:
  explicit SessionManager(ServiceConfig cfg)
      : cfg_(std::make_shared<const ServiceConfig>(std::move(cfg))),
        models_(std::make_shared<const Models>(load_models(*cfg_))) {
    validate(*cfg_);
    (void)dialogue::make_transport(cfg_->llm);  // missing key fails at startup
  }

  ~SessionManager() {
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) s->join_workers();
  }

  [[nodiscard]] const ServiceConfig& config() const noexcept { return *cfg_; }
  [[nodiscard]] const Models& models() const noexcept { return *models_; }

  std::shared_ptr<Session> create() {
    std::lock_guard lock(mu_);
    std::size_t live = 0;
    for (const auto& [id, s] : sessions_) live += s->ended() ? 0 : 1;
    if (live >= cfg_->max_sessions) {
      throw Error(ErrorKind::Limit, "session limit of " + std::to_string(cfg_->max_sessions) + " reached");
    }
    std::string id;
    do {
      id = new_id();
    } while (sessions_.count(id) != 0);
    auto s = std::make_shared<Session>(id, cfg_, models_);
    sessions_.emplace(id, s);
    order_.push_back(id);
    return s;
  }

  [[nodiscard]] std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "no session " + id);
    return it->second;
  }

  [[nodiscard]] std::vector<std::string> ids() const {
    std::lock_guard lock(mu_);
    return order_;
  }

  int next_token() { return ++token_; }

 private:
  std::string new_id() {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 16; ++i) id += kHex[rng_() % 16];
    return id;
  }

  std::shared_ptr<const ServiceConfig> cfg_;
  std::shared_ptr<const Models> models_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::vector<std::string> order_;
  std::mt19937_64 rng_{std::random_device{}()};
  std::atomic<int> token_{0};
};

}  // namespace sar::session
