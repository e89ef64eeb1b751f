#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/error.hpp"
#include "sar/robot/types.hpp"

namespace sar::session {

/// One applied event: {"seq","t","event","state_after","actions"}.
struct LogRecord {
  std::uint64_t seq = 0;
  std::int64_t t = 0;
  nlohmann::json event;
  std::string state_after;
  nlohmann::json actions = nlohmann::json::array();

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

inline nlohmann::json to_json(const LogRecord& r) {
  return {{"seq", r.seq}, {"t", r.t}, {"event", r.event}, {"state_after", r.state_after}, {"actions", r.actions}};
}

/// Optional first line carrying the initial conditions a replay needs.
struct LogHeader {
  std::string session_id;
  nlohmann::json hug;
  nlohmann::json hw;
};

inline nlohmann::json to_json(const LogHeader& h) {
  return {{"session", {{"id", h.session_id}, {"hug", h.hug}, {"hw", h.hw}}}};
}

struct LogFile {
  std::optional<LogHeader> header;
  std::vector<LogRecord> records;
  std::vector<std::string> warnings;
};

/// Parses JSONL text. A final line without its newline that fails to parse
/// is a torn write: it is dropped with a warning. Any other bad line is a
/// parse error naming the line.
inline LogFile parse_log(const std::string& text) {
  LogFile out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : text.size();
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (!terminated) {
        out.warnings.push_back("line " + std::to_string(line_no) + ": truncated final record dropped");
        break;
      }
      throw Error(ErrorKind::Parse, "log line " + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      if (j.contains("session")) {
        if (!out.records.empty() || out.header) throw Error(ErrorKind::Parse, "header must be the first record");
        const auto& s = j["session"];
        out.header = LogHeader{s.value("id", std::string{}), s.value("hug", nlohmann::json::object()),
                               s.value("hw", nlohmann::json::object())};
        continue;
      }
      LogRecord r;
      r.seq = j.at("seq").get<std::uint64_t>();
      r.t = j.at("t").get<std::int64_t>();
      r.event = j.at("event");
      (void)robot::event_from_json(r.event);  // validates the event now, with a line number
      r.state_after = j.at("state_after").get<std::string>();
      r.actions = j.at("actions");
      if (!r.actions.is_array()) throw Error(ErrorKind::Parse, "actions must be an array");
      out.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, "log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, "log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline LogFile read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open log: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str());
}

/// Append-only JSONL file, flushed after every line.
class LogWriter {
 public:
  explicit LogWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw Error(ErrorKind::Config, "cannot open log for writing: " + path.string());
  }

  void write(const nlohmann::json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorKind::State, "log write failed: " + path_.string());
  }

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace sar::session
