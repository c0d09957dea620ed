#pragma once

// Shared value types for a three-party conversation session: one learner and
// two agent personas. Nothing in this header performs I/O.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trialogue {

enum class AgentId : int { first = 1, second = 2 };

constexpr int to_int(AgentId a) noexcept { return static_cast<int>(a); }

constexpr AgentId other(AgentId a) noexcept {
  return a == AgentId::first ? AgentId::second : AgentId::first;
}

inline std::optional<AgentId> agent_from_int(int v) noexcept {
  if (v == 1) return AgentId::first;
  if (v == 2) return AgentId::second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Language and proficiency

struct LanguageInfo {
  std::string_view code;
  std::string_view english_name;
};

inline constexpr std::array<LanguageInfo, 10> kLanguageAllowList{{
    {"de", "German"},
    {"en", "English"},
    {"es", "Spanish"},
    {"fr", "French"},
    {"it", "Italian"},
    {"ja", "Japanese"},
    {"ko", "Korean"},
    {"nl", "Dutch"},
    {"pt", "Portuguese"},
    {"zh", "Chinese"},
}};

struct LanguageTag {
  std::string code;

  bool operator==(const LanguageTag&) const = default;
};

inline std::optional<std::string_view> language_name(const LanguageTag& tag) {
  for (const auto& info : kLanguageAllowList) {
    if (info.code == tag.code) return info.english_name;
  }
  return std::nullopt;
}

enum class ProficiencyLevel { beginner, intermediate, advanced };

inline std::string_view to_string(ProficiencyLevel level) {
  switch (level) {
    case ProficiencyLevel::beginner: return "beginner";
    case ProficiencyLevel::intermediate: return "intermediate";
    case ProficiencyLevel::advanced: return "advanced";
  }
  return "intermediate";
}

inline std::optional<ProficiencyLevel> parse_level(std::string_view s) {
  if (s == "beginner") return ProficiencyLevel::beginner;
  if (s == "intermediate") return ProficiencyLevel::intermediate;
  if (s == "advanced") return ProficiencyLevel::advanced;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Session configuration

struct AgentPersona {
  int agent_id = 1;  // kept raw so validation can report bad ids
  std::string display_name;
  std::string personality;
  std::string voice_id;

  bool operator==(const AgentPersona&) const = default;
};

inline std::array<AgentPersona, 2> default_personas() {
  return {{
      {1, "Marta", "Playful and curious; loves books and asks lots of questions.", "nova"},
      {2, "Omar", "Warm and helpful; enjoys telling short stories about his day.", "onyx"},
  }};
}

inline constexpr std::int64_t kMaxDetectionDelayMs = 30000;

struct SceneContext {
  std::string scene_label;
  std::vector<std::string> objects;
  std::int64_t detection_delay_ms = 2000;

  bool operator==(const SceneContext&) const = default;
};

struct TimingParams {
  std::int64_t gap_ms = 3000;
  std::int64_t max_user_speech_ms = 60000;

  bool operator==(const TimingParams&) const = default;
};

struct SessionConfig {
  LanguageTag language{"es"};
  ProficiencyLevel level = ProficiencyLevel::intermediate;
  std::array<AgentPersona, 2> personas = default_personas();
  SceneContext scene;
  TimingParams timing;
  std::string user_display_name = "Learner";
  AgentId opening_agent = AgentId::first;

  // Persona lookup by id; assumes a validated config.
  const AgentPersona& persona(AgentId id) const {
    for (const auto& p : personas) {
      if (p.agent_id == to_int(id)) return p;
    }
    throw std::out_of_range("no persona with agent_id " + std::to_string(to_int(id)));
  }

  bool operator==(const SessionConfig&) const = default;
};

// Every invariant violation in cfg; empty means valid.
inline std::vector<std::string> validate_config(const SessionConfig& cfg) {
  std::vector<std::string> out;

  const auto& code = cfg.language.code;
  if (code.empty()) {
    out.emplace_back("language must be non-empty");
  } else if (std::any_of(code.begin(), code.end(),
                         [](unsigned char c) { return c >= 'A' && c <= 'Z'; })) {
    out.emplace_back("language must be lowercase");
  } else if (!language_name(cfg.language)) {
    out.emplace_back("language '" + code + "' is not in the allow-list");
  }

  const int id_a = cfg.personas[0].agent_id;
  const int id_b = cfg.personas[1].agent_id;
  if (!((id_a == 1 && id_b == 2) || (id_a == 2 && id_b == 1))) {
    out.emplace_back("personas must have ids {1,2}");
  }
  for (const auto& p : cfg.personas) {
    if (p.display_name.empty()) {
      out.emplace_back("persona " + std::to_string(p.agent_id) + " display_name must be non-empty");
    }
  }
  if (cfg.personas[0].voice_id == cfg.personas[1].voice_id) {
    out.emplace_back("personas must have distinct voice_id");
  }

  if (cfg.scene.scene_label.empty()) out.emplace_back("scene_label must be non-empty");
  if (cfg.scene.detection_delay_ms < 0) out.emplace_back("detection_delay_ms ≥ 0");
  if (cfg.scene.detection_delay_ms > kMaxDetectionDelayMs) out.emplace_back("detection_delay_ms ≤ 30000");

  if (cfg.timing.gap_ms < 100) out.emplace_back("gap_ms ≥ 100");
  if (cfg.timing.max_user_speech_ms < 1000) out.emplace_back("max_user_speech_ms ≥ 1000");

  return out;
}

// ---------------------------------------------------------------------------
// Utterances and history

class SpeakerId {
 public:
  enum class Kind { user, agent };

  static SpeakerId user() { return SpeakerId{Kind::user, std::nullopt}; }
  static SpeakerId agent(AgentId a) { return SpeakerId{Kind::agent, a}; }

  Kind kind() const { return kind_; }
  bool is_user() const { return kind_ == Kind::user; }
  bool is_agent() const { return kind_ == Kind::agent; }
  std::optional<AgentId> agent_id() const { return agent_; }

  // "user" | "agent:1" | "agent:2"
  std::string str() const {
    if (is_user()) return "user";
    return "agent:" + std::to_string(to_int(*agent_));
  }

  static std::optional<SpeakerId> parse(std::string_view s) {
    if (s == "user") return user();
    if (s == "agent:1") return agent(AgentId::first);
    if (s == "agent:2") return agent(AgentId::second);
    return std::nullopt;
  }

  bool operator==(const SpeakerId&) const = default;

 private:
  SpeakerId(Kind k, std::optional<AgentId> a) : kind_(k), agent_(a) {}

  Kind kind_;
  std::optional<AgentId> agent_;
};

enum class AnnotationTag { elaborative_clause, negotiation_of_meaning, backchannel };

inline std::string_view to_string(AnnotationTag tag) {
  switch (tag) {
    case AnnotationTag::elaborative_clause: return "elaborative_clause";
    case AnnotationTag::negotiation_of_meaning: return "negotiation_of_meaning";
    case AnnotationTag::backchannel: return "backchannel";
  }
  return "";
}

inline std::optional<AnnotationTag> parse_annotation(std::string_view s) {
  if (s == "elaborative_clause") return AnnotationTag::elaborative_clause;
  if (s == "negotiation_of_meaning") return AnnotationTag::negotiation_of_meaning;
  if (s == "backchannel") return AnnotationTag::backchannel;
  return std::nullopt;
}

struct Utterance {
  std::uint64_t seq = 0;
  SpeakerId speaker = SpeakerId::user();
  std::string text;
  std::optional<std::string> audio_ref;
  std::int64_t started_at_ms = 0;
  std::int64_t ended_at_ms = 0;
  std::vector<AnnotationTag> annotations;

  bool operator==(const Utterance&) const = default;
};

class HistoryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Append-only record of committed utterances. seq runs 0..size()-1.
class ConversationHistory {
 public:
  ConversationHistory() = default;

  std::span<const Utterance> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Utterance& operator[](std::size_t i) const { return entries_.at(i); }
  const Utterance& back() const { return entries_.back(); }

  std::optional<AgentId> last_agent_speaker() const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->speaker.is_agent()) return it->speaker.agent_id();
    }
    return std::nullopt;
  }

  std::size_t count_by(const SpeakerId& who) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [&](const Utterance& u) { return u.speaker == who; }));
  }

  bool operator==(const ConversationHistory&) const = default;

 private:
  friend ConversationHistory append_utterance(ConversationHistory h, Utterance u);

  std::vector<Utterance> entries_;
};

// Throws HistoryError on non-contiguous seq, retrograde start time, or an
// otherwise malformed utterance. Pass h by rvalue to avoid the copy.
inline ConversationHistory append_utterance(ConversationHistory h, Utterance u) {
  if (u.seq != h.size()) {
    throw HistoryError("non-contiguous seq: expected " + std::to_string(h.size()) + ", got " +
                       std::to_string(u.seq));
  }
  if (!h.empty() && u.started_at_ms < h.back().started_at_ms) {
    throw HistoryError("retrograde started_at_ms at seq " + std::to_string(u.seq));
  }
  if (u.ended_at_ms < u.started_at_ms) {
    throw HistoryError("ended_at_ms precedes started_at_ms at seq " + std::to_string(u.seq));
  }
  if (u.text.empty()) {
    throw HistoryError("committed utterance text must be non-empty (seq " + std::to_string(u.seq) + ")");
  }
  h.entries_.push_back(std::move(u));
  return h;
}

// ---------------------------------------------------------------------------
// Session phase

class SessionState {
 public:
  enum class Phase {
    initializing,
    agent_speaking,
    gap,
    moderator_selecting,
    generating_response,
    user_speaking,
    transcribing,
    closed,
  };

  SessionState() = default;

  static SessionState initializing() { return SessionState{Phase::initializing, std::nullopt}; }
  static SessionState agent_speaking(AgentId a) { return SessionState{Phase::agent_speaking, a}; }
  static SessionState gap() { return SessionState{Phase::gap, std::nullopt}; }
  static SessionState moderator_selecting() { return SessionState{Phase::moderator_selecting, std::nullopt}; }
  static SessionState generating_response(AgentId a) { return SessionState{Phase::generating_response, a}; }
  static SessionState user_speaking() { return SessionState{Phase::user_speaking, std::nullopt}; }
  static SessionState transcribing() { return SessionState{Phase::transcribing, std::nullopt}; }
  static SessionState closed() { return SessionState{Phase::closed, std::nullopt}; }

  Phase phase() const { return phase_; }
  std::optional<AgentId> agent() const { return agent_; }
  bool is(Phase p) const { return phase_ == p; }

  std::string_view name() const {
    switch (phase_) {
      case Phase::initializing: return "Initializing";
      case Phase::agent_speaking: return "AgentSpeaking";
      case Phase::gap: return "Gap";
      case Phase::moderator_selecting: return "ModeratorSelecting";
      case Phase::generating_response: return "GeneratingResponse";
      case Phase::user_speaking: return "UserSpeaking";
      case Phase::transcribing: return "Transcribing";
      case Phase::closed: return "Closed";
    }
    return "";
  }

  // e.g. "AgentSpeaking(1)", "Gap"
  std::string str() const {
    std::string s{name()};
    if (agent_) s += "(" + std::to_string(to_int(*agent_)) + ")";
    return s;
  }

  bool operator==(const SessionState&) const = default;

 private:
  SessionState(Phase p, std::optional<AgentId> a) : phase_(p), agent_(a) {}

  Phase phase_ = Phase::initializing;
  std::optional<AgentId> agent_;
};

}  // namespace trialogue
