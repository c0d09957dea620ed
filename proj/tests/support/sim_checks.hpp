#pragma once

// Oracles over simulation traces. They look only at recorded effects and
// committed history, never at engine internals.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trialogue/providers.hpp"
#include "trialogue/sim.hpp"

namespace trialogue::testing {

inline std::vector<std::string> speakers(const ConversationHistory& h) {
  std::vector<std::string> out;
  for (const auto& u : h.entries()) out.push_back(u.speaker.str());
  return out;
}

struct PlayInterval {
  AgentId agent;
  std::int64_t start;
  std::int64_t end;  // natural end, or the StopAudio that cut it short
  bool stopped;
};

inline std::vector<PlayInterval> play_intervals(const SimulationResult& r) {
  std::vector<PlayInterval> out;
  for (const auto& te : r.effects) {
    if (const auto* p = std::get_if<fx::PlayAudio>(&te.effect)) {
      out.push_back({p->agent, te.at_ms, te.at_ms + p->duration_ms, false});
    } else if (std::holds_alternative<fx::StopAudio>(te.effect) && !out.empty()) {
      auto& last = out.back();
      if (!last.stopped && te.at_ms < last.end) {
        last.end = te.at_ms;
        last.stopped = true;
      }
    }
  }
  return out;
}

// Number of PlayAudio intervals that start before the previous one ended.
inline std::size_t overlapping_plays(const SimulationResult& r) {
  const auto iv = play_intervals(r);
  std::size_t bad = 0;
  for (std::size_t i = 1; i < iv.size(); ++i) {
    if (iv[i].start < iv[i - 1].end) ++bad;
  }
  return bad;
}

// Silence between the natural end of each clip and the next clip's start.
inline std::vector<std::int64_t> onset_gaps(const SimulationResult& r) {
  const auto iv = play_intervals(r);
  std::vector<std::int64_t> out;
  for (std::size_t i = 1; i < iv.size(); ++i) out.push_back(iv[i].start - iv[i - 1].end);
  return out;
}

// Agent utterances emitted between a push-to-talk press and the end of
// that hold's outcome (user line committed, or back in Gap).
inline std::size_t utterances_during_preemption(const SimulationResult& r) {
  bool held = false;
  std::size_t bad = 0;
  for (const auto& te : r.effects) {
    if (const auto* s = std::get_if<fx::EmitStateChange>(&te.effect)) {
      if (s->state.is(SessionState::Phase::user_speaking)) held = true;
      if (s->state.is(SessionState::Phase::gap) || s->state.is(SessionState::Phase::closed)) held = false;
    } else if (const auto* u = std::get_if<fx::EmitUtterance>(&te.effect)) {
      if (u->utterance.speaker.is_user()) {
        held = false;
      } else if (held) {
        ++bad;
      }
    }
  }
  return bad;
}

// Chat backend whose agent replies carry the number of history lines it
// saw in the prompt: "stamp N ...". Moderator replies alternate 1/2.
class StampingChat final : public ChatBackend {
 public:
  StampingChat(std::vector<std::string> speaker_names, std::int64_t latency_ms = 0, std::uint64_t seed = 0)
      : names_(std::move(speaker_names)), latency_(latency_ms), seed_(seed) {}

  std::int64_t simulated_latency_ms() const override { return latency_; }

  static std::optional<std::uint64_t> stamp_of(const std::string& text) {
    if (text.rfind("stamp ", 0) != 0) return std::nullopt;
    return std::stoull(text.substr(6));
  }

 protected:
  std::string do_complete(const ChatRequest& req) override {
    std::uint64_t lines = 0;
    std::size_t pos = 0;
    while (pos <= req.prompt.size()) {
      const auto nl = req.prompt.find('\n', pos);
      const auto line = req.prompt.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      for (const auto& n : names_) {
        if (line.rfind(n + ": ", 0) == 0) {
          ++lines;
          break;
        }
      }
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
    ++calls_;
    if (req.role == "moderator") return ((calls_ + seed_) % 2) ? "1" : "2";
    const auto words = 1 + (calls_ * 7 + seed_) % 9;
    std::string out = "stamp " + std::to_string(lines);
    for (std::uint64_t i = 0; i < words; ++i) out += " palabra";
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::int64_t latency_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

// Agent lines whose stamp differs from their position in the history.
inline std::size_t stale_commits(const ConversationHistory& h) {
  std::size_t bad = 0;
  for (const auto& u : h.entries()) {
    if (!u.speaker.is_agent()) continue;
    const auto s = StampingChat::stamp_of(u.text);
    if (!s || *s != u.seq) ++bad;
  }
  return bad;
}

}  // namespace trialogue::testing
