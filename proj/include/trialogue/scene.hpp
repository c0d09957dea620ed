#pragma once

// Operator-authored scene files. A researcher writes the scene label and the
// objects present at the venue; the session pretends to detect them during
// a short "Detecting Environment..." phase before the conversation opens.
//
// File format (UTF-8 JSON):
//   {"scene_label": "university library",
//    "objects": ["bookshelf", "novel", "desk"],
//    "detection_delay_ms": 2000}            // optional, default 2000

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialogue/domain.hpp"
#include "trialogue/scheduler.hpp"

namespace trialogue {

inline constexpr std::int64_t kDefaultDetectionDelayMs = 2000;

class SceneParseError : public std::runtime_error {
 public:
  SceneParseError(std::size_t line, std::string field, const std::string& what)
      : std::runtime_error(format(line, field, what)), line_(line), field_(std::move(field)) {}

  std::size_t line() const { return line_; }  // 0 when the error is not tied to a position
  const std::string& field() const { return field_; }

 private:
  static std::string format(std::size_t line, const std::string& field, const std::string& what) {
    std::string s = "scene file";
    if (line) s += " line " + std::to_string(line);
    if (!field.empty()) s += " field '" + field + "'";
    return s + ": " + what;
  }

  std::size_t line_;
  std::string field_;
};

class SceneValidationError : public std::runtime_error {
 public:
  explicit SceneValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid scene:";
    for (const auto& x : v) s += " " + x + ";";
    return s;
  }

  std::vector<std::string> violations_;
};

inline std::vector<std::string> validate_scene(const SceneContext& s) {
  std::vector<std::string> out;
  if (s.scene_label.empty()) out.emplace_back("scene_label must be non-empty");
  if (s.detection_delay_ms < 0) out.emplace_back("detection_delay_ms ≥ 0");
  if (s.detection_delay_ms > kMaxDetectionDelayMs) out.emplace_back("detection_delay_ms ≤ 30000");
  return out;
}

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t byte) {
  if (byte > text.size()) byte = text.size();
  std::size_t line = 1;
  for (std::size_t i = 0; i + 1 < byte; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

// Line of the first occurrence of "key" in the raw text; 0 if absent.
inline std::size_t line_of_key(std::string_view text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string_view::npos ? 0 : line_of_offset(text, pos + 1);
}

}  // namespace detail

inline SceneContext parse_scene(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw SceneParseError(detail::line_of_offset(text, e.byte), "", e.what());
  }
  if (!j.is_object()) throw SceneParseError(1, "", "top level must be a single JSON object");

  SceneContext s;
  s.detection_delay_ms = kDefaultDetectionDelayMs;
  for (const auto& [key, value] : j.items()) {
    const auto line = detail::line_of_key(text, key);
    if (key == "scene_label") {
      if (!value.is_string()) throw SceneParseError(line, key, "must be a string");
      s.scene_label = value.get<std::string>();
    } else if (key == "objects") {
      if (!value.is_array()) throw SceneParseError(line, key, "must be an array of strings");
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_string()) throw SceneParseError(line, key + "[" + std::to_string(i) + "]", "must be a string");
        s.objects.push_back(value[i].get<std::string>());
      }
    } else if (key == "detection_delay_ms") {
      if (!value.is_number_integer()) throw SceneParseError(line, key, "must be an integer");
      s.detection_delay_ms = value.get<std::int64_t>();
    } else {
      throw SceneParseError(line, key, "unknown field");
    }
  }
  auto violations = validate_scene(s);
  if (!violations.empty()) throw SceneValidationError(std::move(violations));
  return s;
}

inline SceneContext load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneParseError(0, "", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

// Simulated detection: exactly one SceneReady, detection_delay_ms from now.
inline void run_detection(const SceneContext& scene, Scheduler& clock) {
  clock.post_after(scene.detection_delay_ms, ev::SceneReady{scene}, TimerSlot::detection);
}

}  // namespace trialogue
