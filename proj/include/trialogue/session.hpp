#pragma once

// Drives the engine for one session: feeds events through step(), carries
// out the effects it returns, and turns provider work into jobs whose
// results come back as events. Must only be used from its scheduler's
// serialized context.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trialogue/blob_store.hpp"
#include "trialogue/domain.hpp"
#include "trialogue/engine.hpp"
#include "trialogue/events.hpp"
#include "trialogue/prompt.hpp"
#include "trialogue/providers.hpp"
#include "trialogue/scene.hpp"
#include "trialogue/scheduler.hpp"

namespace trialogue {

class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void on_effect(const EngineEffect& /*effect*/, std::int64_t /*at_ms*/) {}
  virtual void on_scene_ready(const SceneContext& /*scene*/, std::int64_t /*at_ms*/) {}
  virtual void on_illegal(const IllegalEvent& /*error*/, std::int64_t /*at_ms*/) {}
  virtual void on_event(const EngineEvent& /*event*/) {}
};

inline constexpr int kMaxOutputTokens = 256;

class Session {
 public:
  Session(SessionConfig cfg, ProviderSet providers, std::shared_ptr<const PromptTemplates> templates,
          Scheduler& scheduler, std::shared_ptr<BlobStore> blobs, SessionObserver* observer = nullptr)
      : cfg_(std::make_shared<const SessionConfig>(std::move(cfg))),
        providers_(std::move(providers)),
        templates_(templates ? std::move(templates) : std::make_shared<const PromptTemplates>()),
        sched_(scheduler),
        blobs_(blobs ? std::move(blobs) : std::make_shared<InMemoryBlobStore>()),
        observer_(observer) {}

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void start() {
    auto r = start_session();
    apply(std::move(r));
  }

  void dispatch(const EngineEvent& event) {
    if (observer_) observer_->on_event(event);
    event_log_.push_back(event);
    auto r = step(*cfg_, state_, history_, pregen_, event);
    if (r.error) {
      if (observer_) observer_->on_illegal(*r.error, event.at_ms);
      return;
    }
    if (const auto* scene = event.as<ev::SceneReady>(); scene && observer_) {
      observer_->on_scene_ready(scene->scene, event.at_ms);
    }
    apply(std::move(r));
  }

  bool closed() const { return state_.phase.is(SessionState::Phase::closed); }
  const SessionConfig& config() const { return *cfg_; }
  const ConversationHistory& history() const { return history_; }
  const EngineState& engine_state() const { return state_; }
  const PregenSlot& pregen() const { return pregen_; }
  const std::vector<EngineEvent>& event_log() const { return event_log_; }

 private:
  void apply(StepResult r) {
    state_ = std::move(r.state);
    history_ = std::move(r.history);
    pregen_ = std::move(r.pregen);
    const auto now = sched_.now_ms();
    for (auto& effect : r.effects) {
      perform(effect);
      if (observer_) observer_->on_effect(effect, now);
    }
  }

  void perform(const EngineEffect& effect) {
    std::visit([this](const auto& e) { do_effect(e); }, effect);
  }

  void do_effect(const fx::StartDetection&) { run_detection(cfg_->scene, sched_); }
  void do_effect(const fx::StartGapTimer& e) {
    sched_.post_after(e.duration_ms, ev::GapElapsed{e.timer_id}, TimerSlot::gap);
  }
  void do_effect(const fx::CancelGapTimer&) { sched_.cancel(TimerSlot::gap); }
  void do_effect(const fx::PlayAudio& e) {
    // Playback end is derived from the clip duration.
    sched_.post_after(e.duration_ms, ev::AgentPlaybackComplete{e.agent}, TimerSlot::playback);
  }
  void do_effect(const fx::StopAudio&) { sched_.cancel(TimerSlot::playback); }
  void do_effect(const fx::CloseSession&) {
    sched_.cancel(TimerSlot::gap);
    sched_.cancel(TimerSlot::playback);
    sched_.cancel(TimerSlot::detection);
  }
  void do_effect(const fx::EmitUtterance&) {}
  void do_effect(const fx::EmitStateChange&) {}
  void do_effect(const fx::ReportError&) {}

  void do_effect(const fx::RequestTranscription& e) {
    const auto id = e.request_id;
    if (e.speech.text || e.speech.empty()) {
      sched_.run_job([id, text = e.speech.text.value_or("")](JobContext&) -> EngineEvent::Payload {
        return ev::TranscriptReady{id, text};
      });
      return;
    }
    sched_.run_job([id, audio = *e.speech.audio, stt = providers_.stt, cfg = cfg_](JobContext& ctx)
                       -> EngineEvent::Payload {
      try {
        auto result = call_with_retry(
            [&] {
              ctx.charge(stt->simulated_latency_ms());
              return stt->transcribe(audio, cfg->language);
            },
            [&](std::int64_t ms) { ctx.wait(ms); });
        return ev::TranscriptReady{id, std::move(result.text)};
      } catch (const std::exception& ex) {
        return ev::ProviderFailed{id, ProviderStage::stt, ex.what()};
      }
    });
  }

  void do_effect(const fx::RequestModerator& e) {
    sched_.run_job([id = e.request_id, history = e.history, chat = providers_.chat, cfg = cfg_,
                    tmpl = templates_](JobContext& ctx) -> EngineEvent::Payload {
      try {
        ChatRequest req{"moderator", build_moderator_prompt(*cfg, history, tmpl->moderator), kModeratorTemperature,
                        kMaxOutputTokens, history.size()};
        auto raw = call_with_retry(
            [&] {
              ctx.charge(chat->simulated_latency_ms());
              return chat->chat_complete(req);
            },
            [&](std::int64_t ms) { ctx.wait(ms); });
        auto decision = parse_moderator_output(raw, history.last_agent_speaker());
        return ev::ModeratorDecision{id, decision.chosen_agent, std::move(decision.raw_output)};
      } catch (const std::exception& ex) {
        return ev::ProviderFailed{id, ProviderStage::chat, ex.what()};
      }
    });
  }

  void do_effect(const fx::RequestAgentResponse& e) {
    sched_.run_job([id = e.request_id, agent = e.agent, history = e.history, for_seq = e.valid_for_seq,
                    providers = providers_, cfg = cfg_, tmpl = templates_,
                    blobs = blobs_](JobContext& ctx) -> EngineEvent::Payload {
      const auto& persona = cfg->persona(agent);
      std::string text;
      try {
        ChatRequest req{SpeakerId::agent(agent).str(), build_agent_prompt(*cfg, persona, history, tmpl->agent),
                        kAgentTemperature, kMaxOutputTokens, history.size()};
        text = call_with_retry(
            [&] {
              ctx.charge(providers.chat->simulated_latency_ms());
              return providers.chat->chat_complete(req);
            },
            [&](std::int64_t ms) { ctx.wait(ms); });
      } catch (const std::exception& ex) {
        return ev::ProviderFailed{id, ProviderStage::chat, ex.what()};
      }
      text = std::string(util::trim(text));
      if (text.empty()) return ev::ProviderFailed{id, ProviderStage::chat, "empty response text"};

      ev::ResponseReady ready;
      ready.request_id = id;
      ready.agent = agent;
      ready.text = text;
      ready.for_seq = for_seq;
      try {
        auto tts = call_with_retry(
            [&] {
              ctx.charge(providers.tts->simulated_latency_ms());
              return synthesize_to_store(*providers.tts, *blobs, text, persona.voice_id);
            },
            [&](std::int64_t ms) { ctx.wait(ms); });
        ready.audio_ref = std::move(tts.audio_ref);
        ready.duration_ms = tts.duration_ms;
      } catch (const std::exception& ex) {
        // Caption-only turn: timed as if spoken.
        ready.duration_ms = estimate_speech_ms(text);
        ready.tts_error = ex.what();
      }
      if (ready.duration_ms <= 0) ready.duration_ms = kMockMsPerWord;
      return ready;
    });
  }

  std::shared_ptr<const SessionConfig> cfg_;
  ProviderSet providers_;
  std::shared_ptr<const PromptTemplates> templates_;
  Scheduler& sched_;
  std::shared_ptr<BlobStore> blobs_;
  SessionObserver* observer_;

  EngineState state_;
  ConversationHistory history_;
  PregenSlot pregen_;
  std::vector<EngineEvent> event_log_;
};

}  // namespace trialogue
