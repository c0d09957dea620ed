#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "trialogue/engine.hpp"

namespace trialogue {
namespace {

using Phase = SessionState::Phase;

// Holds engine state between hand-fed events.
struct Driver {
  SessionConfig cfg;
  EngineState state;
  ConversationHistory history;
  PregenSlot pregen;
  std::int64_t now = 0;

  Driver() { cfg.scene.scene_label = "library"; }

  StepResult fire(EngineEvent::Payload p, std::int64_t at = -1) {
    if (at >= 0) now = at;
    auto r = step(cfg, state, history, pregen, EngineEvent{now, std::move(p)});
    if (!r.error) {
      state = r.state;
      history = r.history;
      pregen = r.pregen;
    }
    return r;
  }

  template <typename T>
  static const T* find(const StepResult& r) {
    for (const auto& e : r.effects) {
      if (const auto* p = std::get_if<T>(&e)) return p;
    }
    return nullptr;
  }

  // Scene ready then the first gap elapses; returns the opening request.
  fx::RequestAgentResponse open() {
    auto r = fire(ev::SceneReady{cfg.scene}, 2000);
    const auto timer = find<fx::StartGapTimer>(r)->timer_id;
    r = fire(ev::GapElapsed{timer}, 5000);
    return *find<fx::RequestAgentResponse>(r);
  }

  StepResult respond(const fx::RequestAgentResponse& req, std::string text, std::int64_t duration = 600) {
    ev::ResponseReady rr;
    rr.request_id = req.request_id;
    rr.agent = req.agent;
    rr.text = std::move(text);
    rr.audio_ref = "ab.mp3";
    rr.duration_ms = duration;
    rr.for_seq = req.valid_for_seq;
    return fire(rr);
  }
};

TEST(Engine, StartEmitsStateThenDetection) {
  const auto r = start_session();
  ASSERT_EQ(r.effects.size(), 2u);
  EXPECT_EQ(std::get<fx::EmitStateChange>(r.effects[0]).state, SessionState::initializing());
  EXPECT_TRUE(std::holds_alternative<fx::StartDetection>(r.effects[1]));
}

TEST(Engine, SceneReadyStartsGap) {
  Driver d;
  const auto r = d.fire(ev::SceneReady{d.cfg.scene}, 2000);
  EXPECT_EQ(d.state.phase, SessionState::gap());
  const auto* t = Driver::find<fx::StartGapTimer>(r);
  ASSERT_NE(t, nullptr);
  EXPECT_EQ(t->duration_ms, 3000);
  EXPECT_TRUE(d.fire(ev::SceneReady{d.cfg.scene}).error);
}

TEST(Engine, OpeningAgentIsAgentOneByDefault) {
  Driver d;
  const auto req = d.open();
  EXPECT_EQ(req.agent, AgentId::first);
  EXPECT_EQ(req.valid_for_seq, 0u);
  EXPECT_FALSE(req.pregen);
  EXPECT_EQ(d.state.phase, SessionState::generating_response(AgentId::first));

  Driver d2;
  d2.cfg.opening_agent = AgentId::second;
  EXPECT_EQ(d2.open().agent, AgentId::second);
}

TEST(Engine, ResponseCommitsThenPlaysAndPregenerates) {
  Driver d;
  const auto req = d.open();
  const auto r = d.respond(req, "¡Hola!", 900);
  EXPECT_EQ(d.state.phase, SessionState::agent_speaking(AgentId::first));
  ASSERT_EQ(d.history.size(), 1u);
  EXPECT_EQ(d.history[0].text, "¡Hola!");
  EXPECT_EQ(d.history[0].started_at_ms, 5000);
  EXPECT_EQ(d.history[0].ended_at_ms, 5900);
  // Order: state, caption, audio, then background request for agent 2.
  ASSERT_EQ(r.effects.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<fx::EmitStateChange>(r.effects[0]));
  EXPECT_TRUE(std::holds_alternative<fx::EmitUtterance>(r.effects[1]));
  const auto& play = std::get<fx::PlayAudio>(r.effects[2]);
  EXPECT_EQ(play.agent, AgentId::first);
  EXPECT_EQ(play.duration_ms, 900);
  const auto& pre = std::get<fx::RequestAgentResponse>(r.effects[3]);
  EXPECT_EQ(pre.agent, AgentId::second);
  EXPECT_EQ(pre.valid_for_seq, 1u);
  EXPECT_TRUE(pre.pregen);
}

TEST(Engine, SilentUserLetsOtherAgentRespond) {
  Driver d;
  auto r = d.respond(d.open(), "uno");
  const auto pre = *Driver::find<fx::RequestAgentResponse>(r);
  r = d.fire(ev::AgentPlaybackComplete{AgentId::first}, 5600);
  EXPECT_EQ(d.state.phase, SessionState::gap());
  const auto timer = Driver::find<fx::StartGapTimer>(r)->timer_id;

  // Without a stored pregen: GeneratingResponse(2), reusing the in-flight request.
  Driver no_pregen = d;
  r = no_pregen.fire(ev::GapElapsed{timer}, 8600);
  EXPECT_EQ(no_pregen.state.phase, SessionState::generating_response(AgentId::second));
  EXPECT_EQ(Driver::find<fx::RequestAgentResponse>(r), nullptr);
  r = no_pregen.respond(pre, "dos");
  EXPECT_EQ(no_pregen.state.phase, SessionState::agent_speaking(AgentId::second));

  // With the pregen stored before the gap ends: speaks immediately.
  d.respond(pre, "dos");
  EXPECT_EQ(d.state.phase, SessionState::gap());
  EXPECT_TRUE(d.pregen.usable_at(1));
  r = d.fire(ev::GapElapsed{timer}, 8600);
  EXPECT_EQ(d.state.phase, SessionState::agent_speaking(AgentId::second));
  const auto* play = Driver::find<fx::PlayAudio>(r);
  ASSERT_NE(play, nullptr);
  EXPECT_EQ(play->agent, AgentId::second);
  EXPECT_EQ(d.history.back().text, "dos");
  EXPECT_EQ(d.history.back().started_at_ms, 8600);
}

TEST(Engine, PttDuringAgentSpeechInterrupts) {
  Driver d;
  d.respond(d.open(), "hola a todos");
  const auto r = d.fire(ev::PttPressed{}, 5100);
  EXPECT_EQ(d.state.phase, SessionState::user_speaking());
  ASSERT_GE(r.effects.size(), 3u);
  EXPECT_TRUE(std::holds_alternative<fx::StopAudio>(r.effects[0]));
  EXPECT_TRUE(std::holds_alternative<fx::CancelGapTimer>(r.effects[1]));
  EXPECT_EQ(std::get<fx::EmitStateChange>(r.effects[2]).state, SessionState::user_speaking());
  EXPECT_FALSE(d.pregen.content);
  EXPECT_FALSE(d.state.pending_response);
  // The interrupted utterance stays committed with its full text.
  EXPECT_EQ(d.history.size(), 1u);
  EXPECT_EQ(d.history[0].text, "hola a todos");
}

TEST(Engine, ReleaseRequestsTranscription) {
  Driver d;
  d.respond(d.open(), "hola");
  d.fire(ev::PttPressed{}, 5100);
  UserSpeech speech;
  speech.audio = AudioBlob{"u1.mp3", "mp3", "xx"};
  const auto r = d.fire(ev::PttReleased{speech}, 6100);
  EXPECT_EQ(d.state.phase, SessionState::transcribing());
  const auto* req = Driver::find<fx::RequestTranscription>(r);
  ASSERT_NE(req, nullptr);
  EXPECT_EQ(req->speech, speech);
  EXPECT_NE(Driver::find<fx::CancelGapTimer>(r), nullptr);
}

TEST(Engine, TranscriptCommitsUserLineAndConsultsModerator) {
  Driver d;
  d.respond(d.open(), "hola");
  d.fire(ev::PttPressed{}, 5100);
  UserSpeech speech;
  speech.audio = AudioBlob{"u1.mp3", "mp3", "xx"};
  auto r = d.fire(ev::PttReleased{speech}, 6100);
  const auto id = Driver::find<fx::RequestTranscription>(r)->request_id;
  r = d.fire(ev::TranscriptReady{id, "Hola Marta"}, 6400);
  EXPECT_EQ(d.state.phase, SessionState::moderator_selecting());
  ASSERT_EQ(d.history.size(), 2u);
  const auto& u = d.history.back();
  EXPECT_TRUE(u.speaker.is_user());
  EXPECT_EQ(u.text, "Hola Marta");
  EXPECT_EQ(u.started_at_ms, 5100);
  EXPECT_EQ(u.ended_at_ms, 6100);
  EXPECT_EQ(u.audio_ref, "u1.mp3");
  const auto* emit = Driver::find<fx::EmitUtterance>(r);
  ASSERT_NE(emit, nullptr);
  EXPECT_EQ(emit->utterance, u);
  const auto* mod = Driver::find<fx::RequestModerator>(r);
  ASSERT_NE(mod, nullptr);
  EXPECT_EQ(mod->history, d.history);

  r = d.fire(ev::ModeratorDecision{mod->request_id, AgentId::first, "1"}, 6500);
  EXPECT_EQ(d.state.phase, SessionState::generating_response(AgentId::first));
  const auto* next = Driver::find<fx::RequestAgentResponse>(r);
  ASSERT_NE(next, nullptr);
  EXPECT_EQ(next->valid_for_seq, 2u);
  d.respond(*next, "¡Hola!");
  EXPECT_EQ(d.state.phase, SessionState::agent_speaking(AgentId::first));
}

TEST(Engine, EmptyTranscriptCommitsNothing) {
  Driver d;
  d.open();
  d.fire(ev::PttPressed{});
  auto r = d.fire(ev::PttReleased{UserSpeech{}});
  const auto id = Driver::find<fx::RequestTranscription>(r)->request_id;
  d.fire(ev::TranscriptReady{id, "  "});
  EXPECT_TRUE(d.history.empty());
  EXPECT_EQ(d.state.phase, SessionState::gap());
}

TEST(Engine, IllegalEventsReportedNotApplied) {
  Driver d;
  const auto before = d.state;
  auto r = d.fire(ev::PttReleased{});
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->event, "PttReleased");
  EXPECT_TRUE(r.effects.empty());
  EXPECT_EQ(d.state, before);

  d.open();
  EXPECT_TRUE(d.fire(ev::PttReleased{}).error);
  EXPECT_TRUE(d.fire(ev::AgentPlaybackComplete{AgentId::first}).error);
  d.fire(ev::PttPressed{});
  EXPECT_TRUE(d.fire(ev::PttPressed{}).error);
  d.fire(ev::CloseRequested{});
  EXPECT_TRUE(d.fire(ev::CloseRequested{}).error);
  EXPECT_TRUE(d.fire(ev::PttPressed{}).error);
}

TEST(Engine, StaleResultsDropped) {
  Driver d;
  const auto req = d.open();
  ev::ResponseReady wrong;
  wrong.request_id = req.request_id + 100;
  wrong.agent = AgentId::first;
  wrong.text = "x";
  wrong.duration_ms = 300;
  auto r = d.fire(wrong);
  EXPECT_FALSE(r.error);
  EXPECT_TRUE(r.effects.empty());
  EXPECT_TRUE(d.history.empty());
  EXPECT_TRUE(d.fire(ev::TranscriptReady{999, "x"}).effects.empty());
  EXPECT_TRUE(d.fire(ev::GapElapsed{999}).effects.empty());
}

TEST(Engine, SchedulePregen) {
  EngineState s;
  ConversationHistory h;
  for (std::uint64_t i = 0; i < 3; ++i) {
    Utterance u;
    u.seq = i;
    u.text = "x";
    h = append_utterance(h, u);
  }
  s.phase = SessionState::agent_speaking(AgentId::first);
  auto e = schedule_pregen(s, h);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->agent, AgentId::second);
  EXPECT_EQ(e->valid_for_seq, 3u);
  EXPECT_EQ(e->history, h);
  s.phase = SessionState::agent_speaking(AgentId::second);
  EXPECT_EQ(schedule_pregen(s, h)->agent, AgentId::first);
  s.phase = SessionState::gap();
  EXPECT_FALSE(schedule_pregen(s, h));
}

TEST(Engine, PregenDiscardedAfterUserTurn) {
  Driver d;
  auto r = d.respond(d.open(), "uno");
  const auto pre = *Driver::find<fx::RequestAgentResponse>(r);
  d.fire(ev::AgentPlaybackComplete{AgentId::first}, 5600);
  d.respond(pre, "STALE");
  ASSERT_TRUE(d.pregen.content);

  d.fire(ev::PttPressed{}, 6000);
  EXPECT_FALSE(d.pregen.content);
  r = d.fire(ev::PttReleased{UserSpeech{std::nullopt, "Hola"}}, 7000);
  r = d.fire(ev::TranscriptReady{Driver::find<fx::RequestTranscription>(r)->request_id, "Hola"});
  r = d.fire(ev::ModeratorDecision{Driver::find<fx::RequestModerator>(r)->request_id, AgentId::second, "2"});
  const auto fresh = *Driver::find<fx::RequestAgentResponse>(r);
  EXPECT_EQ(fresh.valid_for_seq, 2u);
  // A late copy of the stale pregen is ignored.
  EXPECT_TRUE(d.respond(pre, "STALE").effects.empty());
  d.respond(fresh, "fresco");
  for (const auto& u : d.history.entries()) EXPECT_NE(u.text, "STALE");
  EXPECT_EQ(d.history.back().text, "fresco");
}

TEST(Engine, ProviderFailureSkipsTurn) {
  Driver d;
  const auto req = d.open();
  auto r = d.fire(ev::ProviderFailed{req.request_id, ProviderStage::chat, "HTTP 500"});
  const auto* err = Driver::find<fx::ReportError>(r);
  ASSERT_NE(err, nullptr);
  EXPECT_EQ(err->stage, "chat");
  EXPECT_EQ(d.state.phase, SessionState::gap());
  const auto timer = Driver::find<fx::StartGapTimer>(r)->timer_id;
  r = d.fire(ev::GapElapsed{timer});
  EXPECT_EQ(Driver::find<fx::RequestAgentResponse>(r)->agent, AgentId::second);
}

TEST(Engine, ModeratorAndSttFailuresReturnToGap) {
  Driver d;
  d.open();
  d.fire(ev::PttPressed{});
  auto r = d.fire(ev::PttReleased{UserSpeech{AudioBlob{"u.mp3", "mp3", "x"}, std::nullopt}});
  const auto stt = Driver::find<fx::RequestTranscription>(r)->request_id;
  r = d.fire(ev::ProviderFailed{stt, ProviderStage::stt, "timeout"});
  EXPECT_EQ(d.state.phase, SessionState::gap());
  EXPECT_EQ(Driver::find<fx::ReportError>(r)->stage, "stt");

  d.fire(ev::PttPressed{});
  r = d.fire(ev::PttReleased{UserSpeech{std::nullopt, "Hola"}});
  r = d.fire(ev::TranscriptReady{Driver::find<fx::RequestTranscription>(r)->request_id, "Hola"});
  r = d.fire(ev::ProviderFailed{Driver::find<fx::RequestModerator>(r)->request_id, ProviderStage::chat, "x"});
  EXPECT_EQ(d.state.phase, SessionState::gap());
  EXPECT_EQ(d.history.size(), 1u);
}

TEST(Engine, TtsFailureGivesCaptionOnlyTurn) {
  Driver d;
  const auto req = d.open();
  ev::ResponseReady rr;
  rr.request_id = req.request_id;
  rr.agent = AgentId::first;
  rr.text = "hola";
  rr.duration_ms = 300;
  rr.tts_error = "HTTP 503";
  const auto r = d.fire(rr);
  EXPECT_EQ(d.history.size(), 1u);
  EXPECT_FALSE(d.history[0].audio_ref);
  EXPECT_EQ(Driver::find<fx::ReportError>(r)->stage, "tts");
  const auto* play = Driver::find<fx::PlayAudio>(r);
  ASSERT_NE(play, nullptr);
  EXPECT_FALSE(play->audio_ref);
}

TEST(Engine, HoldCapAbandonsSpeech) {
  Driver d;
  d.open();
  auto r = d.fire(ev::PttPressed{}, 6000);
  const auto* cap = Driver::find<fx::StartGapTimer>(r);
  ASSERT_NE(cap, nullptr);
  EXPECT_EQ(cap->duration_ms, d.cfg.timing.max_user_speech_ms);
  r = d.fire(ev::GapElapsed{cap->timer_id}, 66000);
  EXPECT_EQ(d.state.phase, SessionState::gap());
  EXPECT_EQ(Driver::find<fx::ReportError>(r)->stage, "ptt");
  EXPECT_TRUE(d.fire(ev::PttReleased{}).error);
}

TEST(Engine, CloseDuringSpeechKeepsUtterance) {
  Driver d;
  d.respond(d.open(), "hola");
  const auto r = d.fire(ev::CloseRequested{});
  EXPECT_EQ(d.state.phase, SessionState::closed());
  EXPECT_TRUE(std::holds_alternative<fx::StopAudio>(r.effects.front()));
  EXPECT_TRUE(std::holds_alternative<fx::CloseSession>(r.effects.back()));
  EXPECT_EQ(d.history.size(), 1u);
}

TEST(Engine, StepIsPure) {
  Driver d;
  d.respond(d.open(), "hola");
  const EngineEvent e{5100, ev::PttPressed{}};
  const auto a = step(d.cfg, d.state, d.history, d.pregen, e);
  const auto b = step(d.cfg, d.state, d.history, d.pregen, e);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.pregen, b.pregen);
  EXPECT_EQ(a.effects, b.effects);
}

}  // namespace
}  // namespace trialogue
