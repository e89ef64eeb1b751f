#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sar/robot/machine.hpp"
#include "sar/session/log.hpp"

namespace sar::session {

struct Divergence {
  std::size_t index = 0;  // position among the log's records
  std::uint64_t seq = 0;
  std::string field;
  nlohmann::json recorded;
  nlohmann::json recomputed;
};

inline nlohmann::json to_json(const Divergence& d) {
  return {{"index", d.index}, {"seq", d.seq}, {"field", d.field}, {"recorded", d.recorded}, {"recomputed", d.recomputed}};
}

struct ReplayResult {
  robot::World world;
  std::vector<Divergence> divergences;
  std::vector<std::string> warnings;
  std::size_t applied = 0;
};

/// Re-applies every logged event through the pure automaton and compares
/// the recomputed state and actions with what was recorded. A header, when
/// present, overrides the supplied initial conditions.
inline ReplayResult replay(const LogFile& log, robot::HugConfig cfg = {}, robot::HardwareState hw = {}) {
  if (log.header) {
    if (!log.header->hug.empty()) cfg = robot::hug_config_from_json(log.header->hug);
    if (!log.header->hw.empty()) hw = robot::hardware_from_json(log.header->hw);
  }
  ReplayResult out;
  out.world.hw = hw;
  out.warnings = log.warnings;
  std::uint64_t last_seq = 0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    if (i > 0 && rec.seq <= last_seq) out.divergences.push_back({i, rec.seq, "seq", last_seq, rec.seq});
    last_seq = rec.seq;
    const auto r = robot::advance(out.world, robot::event_from_json(rec.event), cfg);
    out.world = r.world;
    ++out.applied;
    const auto state = robot::to_string(r.world.machine.mode);
    if (state != rec.state_after) out.divergences.push_back({i, rec.seq, "state_after", rec.state_after, state});
    const auto actions = robot::to_json(r.actions);
    if (actions != rec.actions) out.divergences.push_back({i, rec.seq, "actions", rec.actions, actions});
  }
  return out;
}

inline nlohmann::json replay_report(const ReplayResult& r) {
  nlohmann::json div = nlohmann::json::array();
  for (const auto& d : r.divergences) div.push_back(to_json(d));
  return {{"applied", r.applied}, {"final", robot::to_json(r.world)}, {"divergences", div}, {"warnings", r.warnings}};
}

}  // namespace sar::session
