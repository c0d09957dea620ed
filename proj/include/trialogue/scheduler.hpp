#pragma once

#include <cstdint>
#include <functional>

#include "trialogue/events.hpp"

namespace trialogue {

// Named timer slots so effects can cancel what they started. Provider
// results and inbound events are never cancelled.
enum class TimerSlot { detection, gap, playback, provider, inbound };

// Context handed to provider work. wait() is a real or simulated backoff;
// charge() accounts simulated provider latency.
class JobContext {
 public:
  virtual ~JobContext() = default;
  virtual void wait(std::int64_t ms) = 0;
  virtual void charge(std::int64_t ms) = 0;
};

using ProviderJob = std::function<EngineEvent::Payload(JobContext&)>;

// A session's serialized event context. Everything it delivers reaches the
// session through one ordered queue; provider jobs run elsewhere and report
// back by enqueuing their result.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::int64_t now_ms() const = 0;
  virtual void post_after(std::int64_t delay_ms, EngineEvent::Payload payload, TimerSlot slot) = 0;
  virtual void cancel(TimerSlot slot) = 0;
  virtual void run_job(ProviderJob job) = 0;
};

}  // namespace trialogue
