#pragma once

// Discrete-event clock for deterministic sessions. Time only moves when the
// next queued event is taken; ties are broken by insertion order. Provider
// jobs run inline and their results are queued after the simulated latency
// they charged.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include "trialogue/scheduler.hpp"
#include "trialogue/session.hpp"

namespace trialogue {

class SimulatedClock final : public Scheduler {
 public:
  explicit SimulatedClock(std::int64_t start_ms = 0) : now_(start_ms) {}

  std::int64_t now_ms() const override { return now_; }

  void post_after(std::int64_t delay_ms, EngineEvent::Payload payload, TimerSlot slot) override {
    push(now_ + std::max<std::int64_t>(delay_ms, 0), std::move(payload), slot);
  }

  // Absolute-time variant for scripted input.
  void post_at(std::int64_t at_ms, EngineEvent::Payload payload) {
    push(std::max(at_ms, now_), std::move(payload), TimerSlot::inbound);
  }

  void cancel(TimerSlot slot) override { ++generation_[slot]; }

  void run_job(ProviderJob job) override {
    Ctx ctx;
    auto payload = job(ctx);
    push(now_ + ctx.elapsed, std::move(payload), TimerSlot::provider);
  }

  // Pops the next live event and advances time to it.
  std::optional<EngineEvent> next() {
    while (!queue_.empty()) {
      Item item = queue_.top();
      queue_.pop();
      if (item.generation != generation_[item.slot]) continue;  // cancelled
      now_ = item.due;
      return EngineEvent{item.due, std::move(item.payload)};
    }
    return std::nullopt;
  }

  bool idle() const { return queue_.empty(); }

 private:
  struct Ctx final : JobContext {
    void wait(std::int64_t ms) override { elapsed += ms; }
    void charge(std::int64_t ms) override { elapsed += ms; }
    std::int64_t elapsed = 0;
  };

  struct Item {
    std::int64_t due;
    std::uint64_t order;
    TimerSlot slot;
    std::uint64_t generation;
    EngineEvent::Payload payload;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return std::tie(a.due, a.order) > std::tie(b.due, b.order);
    }
  };

  void push(std::int64_t due, EngineEvent::Payload payload, TimerSlot slot) {
    queue_.push(Item{due, order_++, slot, generation_[slot], std::move(payload)});
  }

  std::int64_t now_;
  std::uint64_t order_ = 0;
  std::map<TimerSlot, std::uint64_t> generation_;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
};

// A learner action scheduled at an absolute session time.
struct ScriptedInput {
  std::int64_t at_ms = 0;
  EngineEvent::Payload payload;
};

inline constexpr std::size_t kNoCause = static_cast<std::size_t>(-1);

struct TimedEffect {
  std::int64_t at_ms;
  EngineEffect effect;
  std::size_t cause = kNoCause;  // index into SimulationResult::events; kNoCause for start-up effects
};

struct SimulationOptions {
  std::shared_ptr<const PromptTemplates> templates;
  std::shared_ptr<BlobStore> blobs;
  // Closes the session once this many agent utterances are committed.
  std::optional<std::size_t> max_agent_utterances;
  // Closes the session at this time if it is still open.
  std::optional<std::int64_t> until_ms;
  // Safety valve against runaway scripts.
  std::size_t max_events = 1'000'000;
};

struct SimulationResult {
  ConversationHistory history;
  std::vector<EngineEvent> events;
  std::vector<TimedEffect> effects;
  std::vector<IllegalEvent> illegal;
  std::int64_t end_ms = 0;
};

namespace detail {

class Recorder final : public SessionObserver {
 public:
  explicit Recorder(SimulationResult& out) : out_(out) {}
  void on_event(const EngineEvent&) override { cause_ = seen_++; }
  void on_effect(const EngineEffect& e, std::int64_t at) override { out_.effects.push_back({at, e, cause_}); }
  void on_illegal(const IllegalEvent& e, std::int64_t) override { out_.illegal.push_back(e); }

 private:
  SimulationResult& out_;
  std::size_t seen_ = 0;
  std::size_t cause_ = kNoCause;
};

}  // namespace detail

inline SimulationResult simulate(const SessionConfig& cfg, ProviderSet providers, SimulatedClock& clock,
                                 const std::vector<ScriptedInput>& inbound, SimulationOptions opts = {}) {
  SimulationResult out;
  detail::Recorder recorder(out);
  Session session(cfg, std::move(providers), opts.templates, clock, opts.blobs, &recorder);
  for (const auto& in : inbound) clock.post_at(in.at_ms, in.payload);
  session.start();

  std::size_t n = 0;
  auto agent_turns = [&] {
    const auto& h = session.history();
    return h.size() - h.count_by(SpeakerId::user());
  };
  while (!session.closed() && n++ < opts.max_events) {
    if (opts.max_agent_utterances && agent_turns() >= *opts.max_agent_utterances) {
      session.dispatch(EngineEvent{clock.now_ms(), ev::CloseRequested{}});
      break;
    }
    auto event = clock.next();
    if (!event) break;
    if (opts.until_ms && event->at_ms > *opts.until_ms) {
      session.dispatch(EngineEvent{*opts.until_ms, ev::CloseRequested{}});
      break;
    }
    session.dispatch(*event);
  }
  out.history = session.history();
  out.events = session.event_log();
  out.end_ms = clock.now_ms();
  return out;
}

// Runs a scripted session to completion and returns the committed history.
inline ConversationHistory run_session(const SessionConfig& cfg, ProviderSet providers, SimulatedClock& clock,
                                       const std::vector<ScriptedInput>& inbound, SimulationOptions opts = {}) {
  return simulate(cfg, std::move(providers), clock, inbound, std::move(opts)).history;
}

// Folds step() over a recorded event log. Provider results are taken from
// the log, so no backend is consulted.
inline ConversationHistory replay_events(const SessionConfig& cfg, const std::vector<EngineEvent>& events) {
  auto r = start_session();
  EngineState state = std::move(r.state);
  ConversationHistory history = std::move(r.history);
  PregenSlot pregen = std::move(r.pregen);
  for (const auto& e : events) {
    auto next = step(cfg, std::move(state), std::move(history), std::move(pregen), e);
    state = std::move(next.state);
    history = std::move(next.history);
    pregen = std::move(next.pregen);
  }
  return history;
}

}  // namespace trialogue
