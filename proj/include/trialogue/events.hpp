#pragma once

// Engine inputs (events), outputs (effects) and the pre-generation slot.
// Events are also the unit of the replay log; see docs/event-log.md.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialogue/config_json.hpp"
#include "trialogue/domain.hpp"
#include "trialogue/util.hpp"

namespace trialogue {

enum class ProviderStage { chat, stt, tts };

inline std::string_view to_string(ProviderStage s) {
  switch (s) {
    case ProviderStage::chat: return "chat";
    case ProviderStage::stt: return "stt";
    case ProviderStage::tts: return "tts";
  }
  return "";
}

inline std::optional<ProviderStage> parse_stage(std::string_view s) {
  if (s == "chat") return ProviderStage::chat;
  if (s == "stt") return ProviderStage::stt;
  if (s == "tts") return ProviderStage::tts;
  return std::nullopt;
}

struct AudioBlob {
  std::string id;         // opaque name; mock STT scripts key on it
  std::string container;  // "mp3", "webm", ...
  std::string bytes;

  bool operator==(const AudioBlob&) const = default;
};

// What a push-to-talk release carries: recorded audio, or a typed text
// fallback used when no audio stack is available.
struct UserSpeech {
  std::optional<AudioBlob> audio;
  std::optional<std::string> text;

  bool empty() const { return !text && (!audio || audio->bytes.empty()); }
  bool operator==(const UserSpeech&) const = default;
};

namespace ev {

struct SceneReady {
  SceneContext scene;
  bool operator==(const SceneReady&) const = default;
};
struct AgentPlaybackComplete {
  AgentId agent;
  bool operator==(const AgentPlaybackComplete&) const = default;
};
struct GapElapsed {
  std::uint64_t timer_id;
  bool operator==(const GapElapsed&) const = default;
};
struct PttPressed {
  bool operator==(const PttPressed&) const = default;
};
struct PttReleased {
  UserSpeech speech;
  bool operator==(const PttReleased&) const = default;
};
struct TranscriptReady {
  std::uint64_t request_id;
  std::string text;
  bool operator==(const TranscriptReady&) const = default;
};
struct ModeratorDecision {
  std::uint64_t request_id;
  AgentId agent;
  std::string raw_output;
  bool operator==(const ModeratorDecision&) const = default;
};
struct ResponseReady {
  std::uint64_t request_id = 0;
  AgentId agent = AgentId::first;
  std::string text;
  std::optional<std::string> audio_ref;  // absent when synthesis failed
  std::int64_t duration_ms = 0;
  std::uint64_t for_seq = 0;             // history length the text was generated against
  std::optional<std::string> tts_error;
  bool operator==(const ResponseReady&) const = default;
};
struct ProviderFailed {
  std::uint64_t request_id;
  ProviderStage stage;
  std::string detail;
  bool operator==(const ProviderFailed&) const = default;
};
struct CloseRequested {
  bool operator==(const CloseRequested&) const = default;
};

}  // namespace ev

struct EngineEvent {
  using Payload = std::variant<ev::SceneReady, ev::AgentPlaybackComplete, ev::GapElapsed, ev::PttPressed,
                               ev::PttReleased, ev::TranscriptReady, ev::ModeratorDecision, ev::ResponseReady,
                               ev::ProviderFailed, ev::CloseRequested>;

  std::int64_t at_ms = 0;  // session clock
  Payload payload;

  template <typename T>
  const T* as() const { return std::get_if<T>(&payload); }

  bool operator==(const EngineEvent&) const = default;
};

inline std::string_view event_name(const EngineEvent& e) {
  return std::visit(
      [](const auto& p) -> std::string_view {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ev::SceneReady>) return "SceneReady";
        else if constexpr (std::is_same_v<T, ev::AgentPlaybackComplete>) return "AgentPlaybackComplete";
        else if constexpr (std::is_same_v<T, ev::GapElapsed>) return "GapElapsed";
        else if constexpr (std::is_same_v<T, ev::PttPressed>) return "PttPressed";
        else if constexpr (std::is_same_v<T, ev::PttReleased>) return "PttReleased";
        else if constexpr (std::is_same_v<T, ev::TranscriptReady>) return "TranscriptReady";
        else if constexpr (std::is_same_v<T, ev::ModeratorDecision>) return "ModeratorDecision";
        else if constexpr (std::is_same_v<T, ev::ResponseReady>) return "ResponseReady";
        else if constexpr (std::is_same_v<T, ev::ProviderFailed>) return "ProviderFailed";
        else return "CloseRequested";
      },
      e.payload);
}

// ---------------------------------------------------------------------------
// Effects

namespace fx {

struct StartDetection {
  bool operator==(const StartDetection&) const = default;
};
// The engine owns a single timer: the inter-turn gap, or during
// UserSpeaking the cap on a push-to-talk hold.
struct StartGapTimer {
  std::uint64_t timer_id;
  std::int64_t duration_ms;
  bool operator==(const StartGapTimer&) const = default;
};
struct CancelGapTimer {
  std::uint64_t timer_id;
  bool operator==(const CancelGapTimer&) const = default;
};
struct RequestTranscription {
  std::uint64_t request_id;
  UserSpeech speech;
  bool operator==(const RequestTranscription&) const = default;
};
struct RequestModerator {
  std::uint64_t request_id;
  ConversationHistory history;
  bool operator==(const RequestModerator&) const = default;
};
struct RequestAgentResponse {
  std::uint64_t request_id;
  AgentId agent;
  ConversationHistory history;
  std::uint64_t valid_for_seq = 0;
  bool pregen = false;
  bool operator==(const RequestAgentResponse&) const = default;
};
struct EmitUtterance {
  Utterance utterance;
  bool operator==(const EmitUtterance&) const = default;
};
struct EmitStateChange {
  SessionState state;
  bool operator==(const EmitStateChange&) const = default;
};
struct PlayAudio {
  AgentId agent;
  std::optional<std::string> audio_ref;  // absent: caption-only turn, still timed
  std::int64_t duration_ms = 0;
  bool operator==(const PlayAudio&) const = default;
};
struct StopAudio {
  bool operator==(const StopAudio&) const = default;
};
struct ReportError {
  std::string stage;
  std::string detail;
  bool operator==(const ReportError&) const = default;
};
struct CloseSession {
  bool operator==(const CloseSession&) const = default;
};

}  // namespace fx

using EngineEffect = std::variant<fx::StartDetection, fx::StartGapTimer, fx::CancelGapTimer, fx::RequestTranscription,
                                  fx::RequestModerator, fx::RequestAgentResponse, fx::EmitUtterance,
                                  fx::EmitStateChange, fx::PlayAudio, fx::StopAudio, fx::ReportError,
                                  fx::CloseSession>;

struct PregenContent {
  AgentId agent;
  std::string text;
  std::optional<std::string> audio_ref;
  std::int64_t duration_ms = 0;
  std::optional<std::string> tts_error;
  bool operator==(const PregenContent&) const = default;
};

// A pre-generated next utterance. Usable only while the history length is
// still valid_for_seq.
struct PregenSlot {
  std::optional<PregenContent> content;
  std::uint64_t valid_for_seq = 0;

  bool usable_at(std::size_t history_len) const { return content && valid_for_seq == history_len; }
  bool operator==(const PregenSlot&) const = default;
};

// ---------------------------------------------------------------------------
// Event log codec (JSON Lines). Field names are documented in
// docs/event-log.md.

inline nlohmann::ordered_json speech_to_json(const UserSpeech& s) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (s.audio) {
    j["audio"] = {{"id", s.audio->id},
                  {"container", s.audio->container},
                  {"base64", util::base64_encode(s.audio->bytes)}};
  }
  if (s.text) j["text"] = *s.text;
  return j;
}

template <typename Json>
UserSpeech speech_from_json(const Json& j) {
  UserSpeech s;
  if (j.contains("audio")) {
    const auto& a = j["audio"];
    s.audio = AudioBlob{a.value("id", std::string{}), a.value("container", std::string{"mp3"}),
                        util::base64_decode(a.value("base64", std::string{}))};
  }
  if (j.contains("text")) s.text = j["text"].template get<std::string>();
  return s;
}

inline nlohmann::ordered_json event_to_json(const EngineEvent& e) {
  nlohmann::ordered_json j;
  j["at_ms"] = e.at_ms;
  j["type"] = std::string{event_name(e)};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ev::SceneReady>) {
          j["scene"] = scene_to_json(p.scene);
        } else if constexpr (std::is_same_v<T, ev::AgentPlaybackComplete>) {
          j["agent"] = to_int(p.agent);
        } else if constexpr (std::is_same_v<T, ev::GapElapsed>) {
          j["timer_id"] = p.timer_id;
        } else if constexpr (std::is_same_v<T, ev::PttReleased>) {
          j["speech"] = speech_to_json(p.speech);
        } else if constexpr (std::is_same_v<T, ev::TranscriptReady>) {
          j["request_id"] = p.request_id;
          j["text"] = p.text;
        } else if constexpr (std::is_same_v<T, ev::ModeratorDecision>) {
          j["request_id"] = p.request_id;
          j["agent"] = to_int(p.agent);
          j["raw_output"] = p.raw_output;
        } else if constexpr (std::is_same_v<T, ev::ResponseReady>) {
          j["request_id"] = p.request_id;
          j["agent"] = to_int(p.agent);
          j["text"] = p.text;
          j["audio_ref"] = p.audio_ref ? nlohmann::ordered_json(*p.audio_ref) : nlohmann::ordered_json(nullptr);
          j["duration_ms"] = p.duration_ms;
          j["for_seq"] = p.for_seq;
          if (p.tts_error) j["tts_error"] = *p.tts_error;
        } else if constexpr (std::is_same_v<T, ev::ProviderFailed>) {
          j["request_id"] = p.request_id;
          j["stage"] = std::string{to_string(p.stage)};
          j["detail"] = p.detail;
        }
      },
      e.payload);
  return j;
}

namespace detail {

template <typename Json>
AgentId agent_field(const Json& j) {
  auto a = agent_from_int(j.at("agent").template get<int>());
  if (!a) throw std::invalid_argument("agent must be 1 or 2");
  return *a;
}

}  // namespace detail

// Throws std::invalid_argument or nlohmann::json::exception on bad input.
template <typename Json>
EngineEvent event_from_json(const Json& j) {
  EngineEvent e;
  e.at_ms = j.at("at_ms").template get<std::int64_t>();
  const auto type = j.at("type").template get<std::string>();
  if (type == "SceneReady") {
    SceneContext s;
    if (j.contains("scene")) {
      const auto& sj = j["scene"];
      s.scene_label = sj.value("scene_label", std::string{});
      s.objects = sj.value("objects", std::vector<std::string>{});
      s.detection_delay_ms = sj.value("detection_delay_ms", std::int64_t{0});
    }
    e.payload = ev::SceneReady{std::move(s)};
  } else if (type == "AgentPlaybackComplete") {
    e.payload = ev::AgentPlaybackComplete{detail::agent_field(j)};
  } else if (type == "GapElapsed") {
    e.payload = ev::GapElapsed{j.at("timer_id").template get<std::uint64_t>()};
  } else if (type == "PttPressed") {
    e.payload = ev::PttPressed{};
  } else if (type == "PttReleased") {
    e.payload = ev::PttReleased{j.contains("speech") ? speech_from_json(j["speech"]) : UserSpeech{}};
  } else if (type == "TranscriptReady") {
    e.payload = ev::TranscriptReady{j.at("request_id").template get<std::uint64_t>(),
                                    j.at("text").template get<std::string>()};
  } else if (type == "ModeratorDecision") {
    e.payload = ev::ModeratorDecision{j.at("request_id").template get<std::uint64_t>(), detail::agent_field(j),
                                      j.value("raw_output", std::string{})};
  } else if (type == "ResponseReady") {
    ev::ResponseReady r;
    r.request_id = j.at("request_id").template get<std::uint64_t>();
    r.agent = detail::agent_field(j);
    r.text = j.at("text").template get<std::string>();
    if (j.contains("audio_ref") && j["audio_ref"].is_string()) r.audio_ref = j["audio_ref"].template get<std::string>();
    r.duration_ms = j.at("duration_ms").template get<std::int64_t>();
    r.for_seq = j.at("for_seq").template get<std::uint64_t>();
    if (j.contains("tts_error")) r.tts_error = j["tts_error"].template get<std::string>();
    e.payload = std::move(r);
  } else if (type == "ProviderFailed") {
    auto stage = parse_stage(j.at("stage").template get<std::string>());
    if (!stage) throw std::invalid_argument("unknown provider stage");
    e.payload = ev::ProviderFailed{j.at("request_id").template get<std::uint64_t>(), *stage,
                                   j.value("detail", std::string{})};
  } else if (type == "CloseRequested") {
    e.payload = ev::CloseRequested{};
  } else {
    throw std::invalid_argument("unknown event type '" + type + "'");
  }
  return e;
}

}  // namespace trialogue
