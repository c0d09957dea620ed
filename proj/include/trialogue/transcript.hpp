#pragma once

// JSON Lines transcript codec. One Utterance per line with the field order
//   seq, speaker, text, audio_ref, started_at_ms, ended_at_ms, annotations
// This is the contract between the session service and the analytics CLI.

#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "trialogue/domain.hpp"

namespace trialogue {

class TranscriptParseError : public std::runtime_error {
 public:
  TranscriptParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline nlohmann::ordered_json utterance_to_json(const Utterance& u) {
  nlohmann::ordered_json j;
  j["seq"] = u.seq;
  j["speaker"] = u.speaker.str();
  j["text"] = u.text;
  j["audio_ref"] = u.audio_ref ? nlohmann::ordered_json(*u.audio_ref) : nlohmann::ordered_json(nullptr);
  j["started_at_ms"] = u.started_at_ms;
  j["ended_at_ms"] = u.ended_at_ms;
  auto tags = nlohmann::ordered_json::array();
  for (auto t : u.annotations) tags.push_back(std::string{to_string(t)});
  j["annotations"] = std::move(tags);
  return j;
}

// Single line, no trailing newline.
inline std::string encode_utterance(const Utterance& u) { return utterance_to_json(u).dump(); }

namespace detail {

template <typename Json>
const Json& require_field(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + name + "'");
  return *it;
}

inline void require_type(bool ok, const char* name, const char* expected) {
  if (!ok) throw std::invalid_argument(std::string("field '") + name + "' must be " + expected);
}

}  // namespace detail

// Throws std::invalid_argument naming the offending field.
template <typename Json>
Utterance utterance_from_json(const Json& j) {
  using detail::require_field;
  using detail::require_type;
  if (!j.is_object()) throw std::invalid_argument("utterance must be a JSON object");

  Utterance u;
  const auto& seq = require_field(j, "seq");
  require_type(seq.is_number_unsigned() || (seq.is_number_integer() && seq.template get<std::int64_t>() >= 0),
               "seq", "a non-negative integer");
  u.seq = seq.template get<std::uint64_t>();

  const auto& speaker = require_field(j, "speaker");
  require_type(speaker.is_string(), "speaker", "a string");
  auto sp = SpeakerId::parse(speaker.template get<std::string>());
  if (!sp) throw std::invalid_argument("field 'speaker' must be \"user\", \"agent:1\" or \"agent:2\"");
  u.speaker = *sp;

  const auto& text = require_field(j, "text");
  require_type(text.is_string(), "text", "a string");
  u.text = text.template get<std::string>();

  const auto& audio = require_field(j, "audio_ref");
  require_type(audio.is_null() || audio.is_string(), "audio_ref", "a string or null");
  if (audio.is_string()) u.audio_ref = audio.template get<std::string>();

  const auto& started = require_field(j, "started_at_ms");
  require_type(started.is_number_integer(), "started_at_ms", "an integer");
  u.started_at_ms = started.template get<std::int64_t>();

  const auto& ended = require_field(j, "ended_at_ms");
  require_type(ended.is_number_integer(), "ended_at_ms", "an integer");
  u.ended_at_ms = ended.template get<std::int64_t>();

  const auto& tags = require_field(j, "annotations");
  require_type(tags.is_array(), "annotations", "an array");
  for (const auto& t : tags) {
    require_type(t.is_string(), "annotations", "an array of strings");
    auto tag = parse_annotation(t.template get<std::string>());
    if (!tag) throw std::invalid_argument("unknown annotation '" + t.template get<std::string>() + "'");
    u.annotations.push_back(*tag);
  }
  return u;
}

inline Utterance decode_utterance(std::string_view line) {
  auto j = nlohmann::json::parse(line.begin(), line.end());
  return utterance_from_json(j);
}

inline std::string encode_transcript(const ConversationHistory& h) {
  std::string out;
  for (const auto& u : h.entries()) {
    out += encode_utterance(u);
    out += '\n';
  }
  return out;
}

namespace detail {

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace detail

// Blank lines are skipped. Every line must decode and append cleanly;
// failures throw TranscriptParseError carrying the 1-based line number.
inline ConversationHistory decode_transcript(std::istream& in) {
  ConversationHistory h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    try {
      h = append_utterance(std::move(h), decode_utterance(line));
    } catch (const nlohmann::json::exception& e) {
      throw TranscriptParseError(lineno, e.what());
    } catch (const std::invalid_argument& e) {
      throw TranscriptParseError(lineno, e.what());
    }
  }
  return h;
}

inline ConversationHistory decode_transcript(std::string_view text) {
  std::istringstream in{std::string(text)};
  return decode_transcript(in);
}

}  // namespace trialogue
