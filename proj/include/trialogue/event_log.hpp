#pragma once

// Replay logs: a header line carrying the session config, then one
// EngineEvent per line. Format reference: docs/event-log.md.

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialogue/config_json.hpp"
#include "trialogue/events.hpp"

namespace trialogue {

struct EventLog {
  SessionConfig config;
  std::vector<EngineEvent> events;
};

class EventLogError : public std::runtime_error {
 public:
  EventLogError(std::size_t line, const std::string& what)
      : std::runtime_error("event log line " + std::to_string(line) + ": " + what) {}
};

inline std::string event_log_header(const SessionConfig& cfg) {
  nlohmann::ordered_json j;
  j["type"] = "session";
  j["config"] = config_to_json(cfg);
  return j.dump();
}

inline void write_event_log(std::ostream& out, const SessionConfig& cfg, const std::vector<EngineEvent>& events) {
  out << event_log_header(cfg) << '\n';
  for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

inline EventLog read_event_log(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("type", std::string{}) != "session") throw std::invalid_argument("first line must be the session header");
        log.config = config_from_json(j.at("config"));
        have_header = true;
        continue;
      }
      log.events.push_back(event_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw EventLogError(lineno, e.what());
    } catch (const std::invalid_argument& e) {
      throw EventLogError(lineno, e.what());
    }
  }
  if (!have_header) throw EventLogError(lineno, "missing session header");
  return log;
}

}  // namespace trialogue
