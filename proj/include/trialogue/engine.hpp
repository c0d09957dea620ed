#pragma once

// Turn-taking state machine. step() is a pure function of its inputs: all
// I/O it needs is described by the returned effects, and every request it
// issues carries an id so late or superseded results can be recognised and
// dropped.
//
// Phase graph (absent errors):
//
//   Initializing --SceneReady--> Gap --GapElapsed--> GeneratingResponse(a)
//        | (pre-generated reply usable)                 |
//        +------------------> AgentSpeaking(a) <--ResponseReady
//   AgentSpeaking(a) --AgentPlaybackComplete--> Gap   (next agent is other(a))
//   {AgentSpeaking, Gap, ModeratorSelecting, GeneratingResponse}
//        --PttPressed--> UserSpeaking --PttReleased--> Transcribing
//   Transcribing --TranscriptReady--> ModeratorSelecting --ModeratorDecision--> GeneratingResponse(a)
//   any --CloseRequested--> Closed

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trialogue/domain.hpp"
#include "trialogue/events.hpp"
#include "trialogue/util.hpp"

namespace trialogue {

struct PendingResponse {
  std::uint64_t request_id = 0;
  AgentId agent = AgentId::first;
  std::uint64_t for_seq = 0;
  bool pregen = false;
  bool operator==(const PendingResponse&) const = default;
};

// Everything the engine remembers between events besides the history and
// the pre-generation slot.
struct EngineState {
  SessionState phase = SessionState::initializing();
  std::uint64_t next_id = 1;  // shared id counter for timers and requests
  std::optional<std::uint64_t> active_timer;
  std::optional<AgentId> playing;
  std::optional<PendingResponse> pending_response;
  std::optional<std::uint64_t> pending_moderator;
  std::optional<std::uint64_t> pending_transcription;
  std::optional<AgentId> skipped_agent;  // turn dropped after a provider failure
  std::optional<std::string> user_audio_ref;
  std::int64_t ptt_pressed_at_ms = 0;
  std::int64_t ptt_released_at_ms = 0;

  bool operator==(const EngineState&) const = default;
};

struct IllegalEvent {
  SessionState state;
  std::string event;
  std::string reason;

  std::string message() const { return "IllegalEvent: " + event + " in " + state.str() + " (" + reason + ")"; }
  bool operator==(const IllegalEvent&) const = default;
};

struct StepResult {
  EngineState state;
  ConversationHistory history;
  PregenSlot pregen;
  std::vector<EngineEffect> effects;
  std::optional<IllegalEvent> error;
};

// Pre-generation request for the agent who will speak after the one now
// speaking; nullopt unless state is AgentSpeaking. Uses state.next_id as the
// request id without consuming it.
inline std::optional<fx::RequestAgentResponse> schedule_pregen(const EngineState& state,
                                                                const ConversationHistory& history) {
  if (!state.phase.is(SessionState::Phase::agent_speaking)) return std::nullopt;
  return fx::RequestAgentResponse{state.next_id, other(*state.phase.agent()), history, history.size(), true};
}

// Initial effects for a new session.
inline StepResult start_session() {
  StepResult r;
  r.effects.emplace_back(fx::EmitStateChange{r.state.phase});
  r.effects.emplace_back(fx::StartDetection{});
  return r;
}

namespace detail {

class Stepper {
 public:
  Stepper(const SessionConfig& cfg, EngineState state, ConversationHistory history, PregenSlot pregen,
          const EngineEvent& event)
      : cfg_(cfg), ev_(event) {
    r_.state = std::move(state);
    r_.history = std::move(history);
    r_.pregen = std::move(pregen);
  }

  StepResult run() && {
    using P = SessionState::Phase;
    if (st().phase.is(P::closed)) {
      illegal("session is closed");
      return std::move(r_);
    }
    std::visit([this](const auto& p) { on(p); }, ev_.payload);
    return std::move(r_);
  }

 private:
  using P = SessionState::Phase;

  EngineState& st() { return r_.state; }
  std::int64_t now() const { return ev_.at_ms; }
  std::uint64_t take_id() { return st().next_id++; }
  template <typename E>
  void emit(E&& e) { r_.effects.emplace_back(std::forward<E>(e)); }

  void illegal(std::string reason) {
    r_.error = IllegalEvent{st().phase, std::string{event_name(ev_)}, std::move(reason)};
  }

  void set_phase(SessionState s) {
    st().phase = s;
    emit(fx::EmitStateChange{s});
  }

  void enter_gap() {
    set_phase(SessionState::gap());
    const auto id = take_id();
    st().active_timer = id;
    emit(fx::StartGapTimer{id, cfg_.timing.gap_ms});
  }

  void cancel_timer() {
    if (st().active_timer) {
      emit(fx::CancelGapTimer{*st().active_timer});
      st().active_timer.reset();
    }
  }

  void stop_audio() {
    if (st().playing) {
      emit(fx::StopAudio{});
      st().playing.reset();
    }
  }

  void drop_pending() {
    st().pending_response.reset();
    st().pending_moderator.reset();
    st().pending_transcription.reset();
  }

  AgentId next_agent() {
    if (st().skipped_agent) {
      const auto a = other(*st().skipped_agent);
      st().skipped_agent.reset();
      return a;
    }
    if (auto last = r_.history.last_agent_speaker()) return other(*last);
    return cfg_.opening_agent;
  }

  void request_response(AgentId agent) {
    const auto id = take_id();
    st().pending_response = PendingResponse{id, agent, r_.history.size(), false};
    emit(fx::RequestAgentResponse{id, agent, r_.history, r_.history.size(), false});
  }

  // Commits the utterance, starts playback and asks for the next agent's
  // line in the background.
  void speak(const PregenContent& c) {
    Utterance u;
    u.seq = r_.history.size();
    u.speaker = SpeakerId::agent(c.agent);
    u.text = c.text;
    u.audio_ref = c.audio_ref;
    u.started_at_ms = now();
    u.ended_at_ms = now() + c.duration_ms;
    r_.history = append_utterance(std::move(r_.history), u);
    r_.pregen = PregenSlot{};
    st().pending_response.reset();

    set_phase(SessionState::agent_speaking(c.agent));
    emit(fx::EmitUtterance{std::move(u)});
    if (c.tts_error) emit(fx::ReportError{"tts", *c.tts_error});
    st().playing = c.agent;
    emit(fx::PlayAudio{c.agent, c.audio_ref, c.duration_ms});

    if (auto req = schedule_pregen(st(), r_.history)) {
      take_id();
      st().pending_response = PendingResponse{req->request_id, req->agent, req->valid_for_seq, true};
      emit(std::move(*req));
    }
  }

  void begin_agent_turn() {
    const auto agent = next_agent();
    if (r_.pregen.usable_at(r_.history.size()) && r_.pregen.content->agent == agent) {
      const auto content = *r_.pregen.content;
      speak(content);
      return;
    }
    r_.pregen = PregenSlot{};
    set_phase(SessionState::generating_response(agent));
    const auto& pending = st().pending_response;
    if (pending && pending->agent == agent && pending->for_seq == r_.history.size()) return;  // already in flight
    request_response(agent);
  }

  // -- handlers ------------------------------------------------------------

  void on(const ev::SceneReady&) {
    if (!st().phase.is(P::initializing)) return illegal("scene already detected");
    enter_gap();
  }

  void on(const ev::AgentPlaybackComplete& e) {
    if (!(st().phase.is(P::agent_speaking) && st().phase.agent() == e.agent && st().playing == e.agent)) {
      return illegal("agent " + std::to_string(to_int(e.agent)) + " is not playing");
    }
    st().playing.reset();
    enter_gap();
  }

  void on(const ev::GapElapsed& e) {
    if (st().active_timer != e.timer_id) return;  // superseded timer
    st().active_timer.reset();
    if (st().phase.is(P::gap)) {
      begin_agent_turn();
    } else if (st().phase.is(P::user_speaking)) {
      // push-to-talk held past max_user_speech_ms: abandon the hold
      emit(fx::ReportError{"ptt", "push-to-talk exceeded max_user_speech_ms; input discarded"});
      enter_gap();
    }
  }

  void on(const ev::PttPressed&) {
    switch (st().phase.phase()) {
      case P::agent_speaking:
      case P::gap:
      case P::moderator_selecting:
      case P::generating_response:
        break;
      case P::initializing:
        return illegal("scene not ready");
      case P::user_speaking:
        return illegal("push-to-talk already held");
      case P::transcribing:
        return illegal("previous speech is still being transcribed");
      case P::closed:
        return illegal("session is closed");
    }
    stop_audio();
    // Always emitted so the runner clears any gap timer; id 0 means none was active.
    emit(fx::CancelGapTimer{st().active_timer.value_or(0)});
    st().active_timer.reset();
    drop_pending();
    r_.pregen = PregenSlot{};
    st().ptt_pressed_at_ms = now();
    set_phase(SessionState::user_speaking());
    const auto cap = take_id();
    st().active_timer = cap;
    emit(fx::StartGapTimer{cap, cfg_.timing.max_user_speech_ms});
  }

  void on(const ev::PttReleased& e) {
    if (!st().phase.is(P::user_speaking)) return illegal("push-to-talk is not held");
    cancel_timer();
    st().ptt_released_at_ms = now();
    st().user_audio_ref = e.speech.audio ? std::optional<std::string>(e.speech.audio->id) : std::nullopt;
    set_phase(SessionState::transcribing());
    const auto id = take_id();
    st().pending_transcription = id;
    emit(fx::RequestTranscription{id, e.speech});
  }

  void on(const ev::TranscriptReady& e) {
    if (!st().phase.is(P::transcribing) || st().pending_transcription != e.request_id) return;  // stale
    st().pending_transcription.reset();
    const auto text = util::trim(e.text);
    if (text.empty()) {
      enter_gap();  // silence: no user turn
      return;
    }
    Utterance u;
    u.seq = r_.history.size();
    u.speaker = SpeakerId::user();
    u.text = std::string{text};
    u.audio_ref = st().user_audio_ref;
    u.started_at_ms = st().ptt_pressed_at_ms;
    u.ended_at_ms = st().ptt_released_at_ms;
    r_.history = append_utterance(std::move(r_.history), u);
    emit(fx::EmitUtterance{std::move(u)});
    set_phase(SessionState::moderator_selecting());
    const auto id = take_id();
    st().pending_moderator = id;
    emit(fx::RequestModerator{id, r_.history});
  }

  void on(const ev::ModeratorDecision& e) {
    if (!st().phase.is(P::moderator_selecting) || st().pending_moderator != e.request_id) return;
    st().pending_moderator.reset();
    r_.pregen = PregenSlot{};
    set_phase(SessionState::generating_response(e.agent));
    request_response(e.agent);
  }

  void on(const ev::ResponseReady& e) {
    const auto& pending = st().pending_response;
    if (!pending || pending->request_id != e.request_id || pending->agent != e.agent) return;
    const bool pregen = pending->pregen;
    st().pending_response.reset();
    if (e.for_seq != r_.history.size()) return;  // generated against a different history

    PregenContent content{e.agent, e.text, e.audio_ref, e.duration_ms, e.tts_error};
    if (util::trim(e.text).empty()) {
      emit(fx::ReportError{"chat", "empty response text"});
      if (st().phase == SessionState::generating_response(e.agent)) {
        st().skipped_agent = e.agent;
        enter_gap();
      }
      return;
    }
    if (st().phase == SessionState::generating_response(e.agent)) {
      speak(content);
    } else if (pregen) {
      r_.pregen = PregenSlot{std::move(content), e.for_seq};
    }
  }

  void on(const ev::ProviderFailed& e) {
    const std::string stage{to_string(e.stage)};
    if (st().pending_response && st().pending_response->request_id == e.request_id) {
      const auto agent = st().pending_response->agent;
      st().pending_response.reset();
      emit(fx::ReportError{stage, e.detail});
      if (st().phase == SessionState::generating_response(agent)) {
        st().skipped_agent = agent;
        enter_gap();
      }
    } else if (st().phase.is(P::moderator_selecting) && st().pending_moderator == e.request_id) {
      st().pending_moderator.reset();
      emit(fx::ReportError{stage, e.detail});
      enter_gap();
    } else if (st().phase.is(P::transcribing) && st().pending_transcription == e.request_id) {
      st().pending_transcription.reset();
      emit(fx::ReportError{stage, e.detail});
      enter_gap();
    }
  }

  void on(const ev::CloseRequested&) {
    stop_audio();
    cancel_timer();
    drop_pending();
    r_.pregen = PregenSlot{};
    set_phase(SessionState::closed());
    emit(fx::CloseSession{});
  }

  const SessionConfig& cfg_;
  const EngineEvent& ev_;
  StepResult r_;
};

}  // namespace detail

// One transition. Illegal events leave state, history and pregen untouched
// and are reported in StepResult::error.
inline StepResult step(const SessionConfig& cfg, EngineState state, ConversationHistory history, PregenSlot pregen,
                       const EngineEvent& event) {
  return detail::Stepper(cfg, std::move(state), std::move(history), std::move(pregen), event).run();
}

}  // namespace trialogue
