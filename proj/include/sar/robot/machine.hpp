#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sar/robot/hardware.hpp"
#include "sar/robot/lexicon.hpp"
#include "sar/robot/types.hpp"

namespace sar::robot {

/// Everything the automaton remembers between events besides its mode.
struct Memory {
  std::optional<std::string> identity;
  bool face_present = false;
  std::int64_t face_lost_ms = 0;
  std::int64_t state_ms = 0;  // time spent in the current mode, from ticks
  int sad_run = 0;
  bool turn_pending = false;
  bool consent_pending = false;
  std::optional<std::int64_t> last_speech_t;  // last utterance that carried a yes/no
  int hugs_completed = 0;
  emotion::DominantEmotion last_emotion{};

  friend bool operator==(const Memory&, const Memory&) = default;
};

struct Machine {
  RobotState mode = RobotState::Idle;
  Memory mem;

  friend bool operator==(const Machine&, const Machine&) = default;
};

/// One row of the transition table. `state` "*" matches any mode and is
/// tried before mode rows; `next` "=" stays put. All guards must hold.
struct Row {
  std::string state;
  std::string event;
  std::vector<std::string> guards;
  std::string next;
  std::vector<std::string> actions;
  std::vector<std::string> effects;
};

inline const std::vector<Row>& transition_table() {
  static const std::vector<Row> rows{
      {"*", "operator", {"reset"}, "Idle", {"move_arms:open"}, {"reset_memory"}},
      {"*", "operator", {"end"}, "Farewell", {"move_arms:open", "speak:farewell"}, {}},
      {"*", "robot_turn_ready", {"turn_pending"}, "=", {"speak:llm"}, {}},
      {"*", "tick", {"face_lost_timeout"}, "Farewell", {"move_arms:open", "speak:farewell"}, {}},

      {"Idle", "face_detected", {}, "FaceSearch", {}, {}},

      {"FaceSearch", "face_detected", {}, "Greeting", {"speak:greeting"}, {}},
      {"FaceSearch", "tick", {"face_present"}, "Greeting", {"speak:greeting"}, {}},
      {"FaceSearch", "user_utterance", {}, "Greeting", {"speak:greeting"}, {}},
      {"FaceSearch", "face_lost", {}, "Idle", {}, {}},

      {"Greeting", "emotion", {"sad_trigger"}, "OfferingHug", {"speak:offer_hug"}, {}},
      {"Greeting", "emotion", {"sad_building"}, "Assessing", {}, {}},
      {"Greeting", "emotion", {}, "Conversing", {}, {}},
      {"Greeting", "user_utterance", {"no_turn_pending"}, "Conversing", {"request_llm_turn"}, {}},
      {"Greeting", "tick", {}, "Assessing", {}, {}},

      {"Assessing", "emotion", {"sad_trigger"}, "OfferingHug", {"speak:offer_hug"}, {}},
      {"Assessing", "emotion", {"sad_building"}, "=", {}, {}},
      {"Assessing", "emotion", {}, "Conversing", {}, {}},
      {"Assessing", "tick", {"dwell_elapsed"}, "Conversing", {}, {}},
      {"Assessing", "user_utterance", {"no_turn_pending"}, "Conversing", {"request_llm_turn"}, {}},

      {"Conversing", "emotion", {"sad_trigger"}, "OfferingHug", {"speak:offer_hug"}, {}},
      {"Conversing", "user_utterance", {"no_turn_pending"}, "=", {"request_llm_turn"}, {}},

      {"OfferingHug", "tick", {}, "AwaitingConsent", {}, {}},
      {"OfferingHug", "gesture", {"nod", "gate"}, "AwaitingConsent", {}, {"consent"}},
      {"OfferingHug", "gesture", {"nod"}, "AwaitingConsent", {"speak:come_closer"}, {"consent"}},
      {"OfferingHug", "user_utterance", {"affirmative", "gate"}, "AwaitingConsent", {}, {"consent"}},
      {"OfferingHug", "user_utterance", {"affirmative"}, "AwaitingConsent", {"speak:come_closer"}, {"consent"}},
      {"OfferingHug", "gesture", {"shake"}, "Conversing", {"speak:comfort"}, {}},
      {"OfferingHug", "user_utterance", {"negative"}, "Conversing", {"speak:comfort"}, {}},
      {"OfferingHug", "user_utterance", {"no_turn_pending"}, "Conversing", {"request_llm_turn"}, {}},
      {"OfferingHug", "user_utterance", {}, "Conversing", {}, {}},

      {"AwaitingConsent", "gesture", {"nod", "gate"}, "Hugging", {"move_arms:close"}, {}},
      {"AwaitingConsent", "gesture", {"nod"}, "=", {"speak:come_closer"}, {"consent"}},
      {"AwaitingConsent", "user_utterance", {"affirmative", "gate"}, "Hugging", {"move_arms:close"}, {}},
      {"AwaitingConsent", "user_utterance", {"affirmative"}, "=", {"speak:come_closer"}, {"consent"}},
      {"AwaitingConsent", "gesture", {"shake"}, "Conversing", {"speak:comfort"}, {}},
      {"AwaitingConsent", "user_utterance", {"negative"}, "Conversing", {"speak:comfort"}, {}},
      {"AwaitingConsent", "user_utterance", {"no_turn_pending"}, "Conversing", {"request_llm_turn"}, {}},
      {"AwaitingConsent", "user_utterance", {}, "Conversing", {}, {}},
      {"AwaitingConsent", "distance", {"consent_pending", "gate"}, "Hugging", {"move_arms:close"}, {}},
      {"AwaitingConsent", "tick", {"consent_timeout"}, "Conversing", {"speak:consent_timeout"}, {}},
      {"AwaitingConsent", "tick", {"consent_pending", "gate"}, "Hugging", {"move_arms:close"}, {}},

      {"Hugging", "tick", {"abort_distance"}, "Conversing", {"move_arms:open", "speak:hug_abort"}, {}},
      {"Hugging", "tick", {"hug_done", "snacks_left"}, "SnackOffer", {"move_arms:open", "speak:snack_offer"},
       {"hug_completed"}},
      {"Hugging", "tick", {"hug_done"}, "Conversing", {"move_arms:open", "speak:hug_thanks"}, {"hug_completed"}},
      {"Hugging", "gesture", {"shake"}, "Conversing", {"move_arms:open", "speak:hug_release"}, {}},
      {"Hugging", "user_utterance", {"negative"}, "Conversing", {"move_arms:open", "speak:hug_release"}, {}},
      {"Hugging", "user_utterance", {"neutral", "no_turn_pending"}, "=", {"request_llm_turn"}, {}},

      {"SnackOffer", "gesture", {"nod"}, "Conversing", {"dispense_snack", "speak:snack_given"}, {}},
      {"SnackOffer", "user_utterance", {"affirmative"}, "Conversing", {"dispense_snack", "speak:snack_given"}, {}},
      {"SnackOffer", "gesture", {"shake"}, "Conversing", {"speak:snack_declined"}, {}},
      {"SnackOffer", "user_utterance", {"negative"}, "Conversing", {"speak:snack_declined"}, {}},
      {"SnackOffer", "user_utterance", {"no_turn_pending"}, "Conversing", {"request_llm_turn"}, {}},
      {"SnackOffer", "tick", {"consent_timeout"}, "Conversing", {}, {}},

      {"Farewell", "tick", {}, "Idle", {}, {}},
  };
  return rows;
}

struct GuardDoc {
  std::string_view name;
  std::string_view meaning;
};

inline constexpr std::array<GuardDoc, 19> kGuards{{
    {"reset", "operator command is reset"},
    {"end", "operator command is end"},
    {"turn_pending", "an LLM turn was requested and not yet spoken"},
    {"no_turn_pending", "no LLM turn in flight"},
    {"face_lost_timeout", "mode is not Idle/Farewell and the face has been absent > face_lost_timeout_ms"},
    {"face_present", "a face is currently detected"},
    {"sad_trigger", "this emotion frame completes sad_consecutive frames of sad >= sad_tau"},
    {"sad_building", "this emotion frame qualifies but the run is still short"},
    {"dwell_elapsed", "time in mode >= assess_dwell_ms"},
    {"consent_timeout", "time in mode >= consent_timeout_ms"},
    {"nod", "gesture is a nod and no yes/no utterance came within conflict_window_ms before it"},
    {"shake", "gesture is a shake and no yes/no utterance came within conflict_window_ms before it"},
    {"affirmative", "utterance classifies as yes"},
    {"negative", "utterance classifies as no"},
    {"neutral", "utterance is neither yes nor no"},
    {"gate", "distance_cm <= hug_distance_cm"},
    {"consent_pending", "consent was given while the user was too far away"},
    {"abort_distance", "distance_cm > abort_distance_cm"},
    {"hug_done", "hug_elapsed_ms >= hug_duration_ms"},
}};
// snacks_left is documented in the table JSON alongside these.

/// Effects applied whenever a row moves into a different mode.
inline std::vector<std::string> entry_effects(RobotState s) {
  switch (s) {
    case RobotState::Idle: return {"reset_memory"};
    case RobotState::OfferingHug: return {"reset_sad_run"};
    case RobotState::AwaitingConsent: return {"clear_consent"};
    case RobotState::Hugging: return {"reset_hug_timer"};
    case RobotState::Farewell: return {"clear_turn", "clear_consent"};
    default: return {};
  }
}

inline nlohmann::json transition_table_json() {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : transition_table()) {
    rows.push_back({{"state", r.state},
                    {"event", r.event},
                    {"guard", r.guards},
                    {"next", r.next},
                    {"actions", r.actions},
                    {"effects", r.effects}});
  }
  nlohmann::json guards = nlohmann::json::object();
  for (const auto& g : kGuards) guards[std::string(g.name)] = g.meaning;
  guards["snacks_left"] = "snack_count > 0";
  nlohmann::json entry = nlohmann::json::object();
  nlohmann::json states = nlohmann::json::array();
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    states.push_back(kStateNames[i]);
    const auto fx = entry_effects(static_cast<RobotState>(i));
    if (!fx.empty()) entry[std::string(kStateNames[i])] = fx;
  }
  return {{"states", states},
          {"events", kEventKinds},
          {"guards", guards},
          {"entry", entry},
          {"time_in_mode", "ticks add dt to state_ms; a change of mode resets it to 0"},
          {"rows", rows}};
}

inline std::string line_text(std::string_view line, const Memory& mem) {
  const auto& name = mem.identity;
  if (line == "greeting") {
    return name ? "Hello " + *name + "! It's lovely to see you again." : "Hello there! I'm your robot friend. How are you today?";
  }
  if (line == "farewell") return name ? "Goodbye " + *name + ", take care!" : "Goodbye, take care!";
  if (line == "offer_hug") return "You look a little sad. Would you like a hug?";
  if (line == "come_closer") return "Please come a little closer so I can give you a hug.";
  if (line == "comfort") return "That's okay. I'm here for you, and we can just talk.";
  if (line == "consent_timeout") return "No problem, the offer stands whenever you want it.";
  if (line == "hug_abort") return "Oh, you moved away, so I've opened my arms. Sorry about that!";
  if (line == "hug_release") return "Okay, letting go now.";
  if (line == "hug_thanks") return "I hope that hug helped a little.";
  if (line == "snack_offer") return "Would you like a snack?";
  if (line == "snack_given") return "Here you go, enjoy your snack!";
  if (line == "snack_declined") return "Alright, maybe another time.";
  throw Error(ErrorKind::Value, "unknown line id: " + std::string(line));
}

/// Returns the abort transition when the user has backed off mid-hug.
struct AbortTransition {
  RobotState next = RobotState::Conversing;
  std::vector<Action> actions;
};

inline std::optional<AbortTransition> hug_abort_check(RobotState state, const HardwareState& hw, const HugConfig& cfg) {
  if (state != RobotState::Hugging || !(hw.distance_cm > cfg.abort_distance_cm)) return std::nullopt;
  return AbortTransition{RobotState::Conversing, {MoveArms{0.0}, Speak{"hug_abort", line_text("hug_abort", {})}}};
}

/// Per-event facts derived during bookkeeping, read by guards.
struct Cues {
  bool sad_fired = false;
  bool sad_qualifying = false;
  Intent intent = Intent::Neutral;
  bool gesture_ignored = false;
};

struct StepResult {
  Machine next;
  std::vector<Action> actions;
  int row = -1;  // index into transition_table(), -1 for a no-op
};

namespace detail {

inline Cues bookkeeping(Memory& mem, RobotState mode, const SimEvent& e, const HugConfig& cfg) {
  Cues cues;
  if (const auto* f = std::get_if<FaceDetected>(&e.body)) {
    mem.face_present = true;
    mem.face_lost_ms = 0;
    if (f->identity) mem.identity = f->identity;
  } else if (std::holds_alternative<FaceLost>(e.body)) {
    mem.face_present = false;
    mem.face_lost_ms = 0;
  } else if (const auto* em = std::get_if<EmotionObserved>(&e.body)) {
    mem.last_emotion = em->emotion;
    cues.sad_qualifying = em->emotion.label == emotion::Emotion::Sad && em->emotion.score >= cfg.sad_tau;
    mem.sad_run = cues.sad_qualifying ? mem.sad_run + 1 : 0;
    cues.sad_fired = mem.sad_run >= cfg.sad_consecutive;
  } else if (const auto* u = std::get_if<UserUtterance>(&e.body)) {
    cues.intent = classify_intent(u->text);
    if (cues.intent != Intent::Neutral) mem.last_speech_t = e.t;
  } else if (std::holds_alternative<GestureObserved>(e.body)) {
    cues.gesture_ignored =
        mem.last_speech_t && e.t >= *mem.last_speech_t && e.t - *mem.last_speech_t <= cfg.conflict_window_ms;
  } else if (const auto* tick = std::get_if<Tick>(&e.body)) {
    mem.state_ms += tick->dt_ms;
    if (!mem.face_present && mode != RobotState::Idle) mem.face_lost_ms += tick->dt_ms;
  }
  return cues;
}

inline bool guard(std::string_view g, const Machine& m, const SimEvent& e, const HardwareState& hw,
                  const HugConfig& cfg, const Cues& cues) {
  const auto* op = std::get_if<OperatorCommand>(&e.body);
  const auto* gest = std::get_if<GestureObserved>(&e.body);
  if (g == "reset") return op && op->command == OperatorCommandKind::Reset;
  if (g == "end") return op && op->command == OperatorCommandKind::End;
  if (g == "turn_pending") return m.mem.turn_pending;
  if (g == "no_turn_pending") return !m.mem.turn_pending;
  if (g == "face_lost_timeout") {
    return m.mode != RobotState::Idle && m.mode != RobotState::Farewell && !m.mem.face_present &&
           m.mem.face_lost_ms > cfg.face_lost_timeout_ms;
  }
  if (g == "face_present") return m.mem.face_present;
  if (g == "sad_trigger") return cues.sad_fired;
  if (g == "sad_building") return cues.sad_qualifying && !cues.sad_fired;
  if (g == "dwell_elapsed") return m.mem.state_ms >= cfg.assess_dwell_ms;
  if (g == "consent_timeout") return m.mem.state_ms >= cfg.consent_timeout_ms;
  if (g == "nod") return gest && gest->verdict.kind == gesture::GestureKind::Nod && !cues.gesture_ignored;
  if (g == "shake") return gest && gest->verdict.kind == gesture::GestureKind::Shake && !cues.gesture_ignored;
  if (g == "affirmative") return cues.intent == Intent::Affirmative;
  if (g == "negative") return cues.intent == Intent::Negative;
  if (g == "neutral") return cues.intent == Intent::Neutral;
  if (g == "gate") return hug_gate(hw, cfg, true);
  if (g == "consent_pending") return m.mem.consent_pending;
  if (g == "abort_distance") return hug_abort_check(m.mode, hw, cfg).has_value();
  if (g == "hug_done") return hw.hug_elapsed_ms >= cfg.hug_duration_ms;
  if (g == "snacks_left") return hw.snack_count > 0;
  throw Error(ErrorKind::Config, "unknown guard: " + std::string(g));
}

inline void apply_effect(std::string_view fx, Memory& mem) {
  if (fx == "reset_memory") {
    mem = Memory{};
  } else if (fx == "reset_sad_run") {
    mem.sad_run = 0;
  } else if (fx == "clear_consent") {
    mem.consent_pending = false;
  } else if (fx == "clear_turn") {
    mem.turn_pending = false;
  } else if (fx == "consent") {
    mem.consent_pending = true;
  } else if (fx == "hug_completed") {
    ++mem.hugs_completed;
  } else if (fx != "reset_hug_timer") {  // hardware side, applied by advance
    throw Error(ErrorKind::Config, "unknown effect: " + std::string(fx));
  }
}

inline Action make_action(std::string_view tmpl, const Memory& mem, const SimEvent& e, const HugConfig& cfg) {
  if (tmpl == "move_arms:close") return MoveArms{cfg.arm_close_deg};
  if (tmpl == "move_arms:open") return MoveArms{0.0};
  if (tmpl == "request_llm_turn") return RequestLlmTurn{};
  if (tmpl == "dispense_snack") return DispenseSnack{};
  if (tmpl == "speak:llm") return Speak{"llm", std::get<RobotTurnReady>(e.body).text};
  if (tmpl.substr(0, 6) == "speak:") {
    const auto line = tmpl.substr(6);
    return Speak{std::string(line), line_text(line, mem)};
  }
  throw Error(ErrorKind::Config, "unknown action template: " + std::string(tmpl));
}

}  // namespace detail

/// Pure transition: bookkeeping, then the first matching table row. No
/// matching row is a no-op (row = -1).
inline StepResult step(const Machine& m, const SimEvent& e, const HardwareState& hw, const HugConfig& cfg) {
  StepResult r{m, {}, -1};
  const Cues cues = detail::bookkeeping(r.next.mem, m.mode, e, cfg);
  const auto& rows = transition_table();
  const auto mode_name = kStateNames[static_cast<std::size_t>(m.mode)];
  const auto matches = [&](const Row& row) {
    if (row.event != e.kind()) return false;
    for (const auto& g : row.guards)
      if (!detail::guard(g, r.next, e, hw, cfg, cues)) return false;
    return true;
  };
  for (int pass = 0; pass < 2 && r.row < 0; ++pass) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const bool scope = pass == 0 ? rows[i].state == "*" : rows[i].state == mode_name;
      if (scope && matches(rows[i])) {
        r.row = static_cast<int>(i);
        break;
      }
    }
  }
  if (r.row < 0) return r;

  const Row& row = rows[static_cast<std::size_t>(r.row)];
  const RobotState next = row.next == "=" ? m.mode : state_from_string(row.next);
  // texts use memory as it was before entry effects (the farewell still knows the name)
  for (const auto& a : row.actions) {
    r.actions.push_back(detail::make_action(a, r.next.mem, e, cfg));
    if (a == "request_llm_turn") r.next.mem.turn_pending = true;
    if (a == "speak:llm") r.next.mem.turn_pending = false;
  }
  if (next != m.mode) {
    r.next.mem.state_ms = 0;
    for (const auto& fx : entry_effects(next)) detail::apply_effect(fx, r.next.mem);
  }
  for (const auto& fx : row.effects) detail::apply_effect(fx, r.next.mem);
  r.next.mode = next;
  return r;
}

struct World {
  Machine machine;
  HardwareState hw;

  friend bool operator==(const World&, const World&) = default;
};

struct AdvanceResult {
  World world;
  std::vector<Action> actions;
  int row = -1;
};

/// Sensor updates, then step, then the actions' effect on the hardware.
inline AdvanceResult advance(const World& w, const SimEvent& e, const HugConfig& cfg) {
  validate(e);
  HardwareState hw = w.hw;
  if (const auto* d = std::get_if<DistanceChanged>(&e.body)) hw = set_distance(hw, d->cm);
  if (const auto* t = std::get_if<Tick>(&e.body)) {
    hw = tick_hardware(hw, t->dt_ms, {hw.arm_target_deg, hw.arm_target_deg}, w.machine.mode == RobotState::Hugging);
  }
  auto s = step(w.machine, e, hw, cfg);
  if (s.next.mode == RobotState::Hugging && w.machine.mode != RobotState::Hugging) hw.hug_elapsed_ms = 0;
  for (const auto& a : s.actions) {
    if (const auto* arms = std::get_if<MoveArms>(&a)) {
      hw.arm_target_deg = std::clamp(arms->target_deg, HardwareState::kArmMin, HardwareState::kArmMax);
    } else if (std::holds_alternative<DispenseSnack>(a)) {
      hw.snack_count = std::max(0, hw.snack_count - 1);
    }
  }
  return {World{std::move(s.next), hw}, std::move(s.actions), s.row};
}

inline nlohmann::json to_json(const Memory& m) {
  return {{"identity", m.identity ? nlohmann::json(*m.identity) : nlohmann::json(nullptr)},
          {"face_present", m.face_present},
          {"face_lost_ms", m.face_lost_ms},
          {"state_ms", m.state_ms},
          {"sad_run", m.sad_run},
          {"turn_pending", m.turn_pending},
          {"consent_pending", m.consent_pending},
          {"last_speech_t", m.last_speech_t ? nlohmann::json(*m.last_speech_t) : nlohmann::json(nullptr)},
          {"hugs_completed", m.hugs_completed},
          {"last_emotion", emotion::to_json(m.last_emotion)}};
}

inline nlohmann::json to_json(const World& w) {
  return {{"state", to_string(w.machine.mode)}, {"memory", to_json(w.machine.mem)}, {"hw", to_json(w.hw)}};
}

}  // namespace sar::robot
