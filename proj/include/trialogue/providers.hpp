#pragma once

// Chat, speech-to-text and text-to-speech backends behind one uniform
// surface, plus deterministic scripted mocks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialogue/blob_store.hpp"
#include "trialogue/domain.hpp"
#include "trialogue/events.hpp"
#include "trialogue/util.hpp"

namespace trialogue {

inline constexpr double kAgentTemperature = 0.7;
inline constexpr double kModeratorTemperature = 0.0;
inline constexpr std::int64_t kRetryBackoffMs = 500;
inline constexpr std::int64_t kMockMsPerWord = 300;

class ProviderError : public std::runtime_error {
 public:
  enum class Kind { timeout, http_status, malformed_response, unscripted, injected };

  ProviderError(ProviderStage stage, Kind kind, const std::string& detail, int http_status = 0)
      : std::runtime_error(detail), stage_(stage), kind_(kind), http_status_(http_status) {}

  ProviderStage stage() const { return stage_; }
  Kind kind() const { return kind_; }
  int http_status() const { return http_status_; }

 private:
  ProviderStage stage_;
  Kind kind_;
  int http_status_;
};

// A call that violated its precondition; never retried, never sent.
class ProviderPrecondition : public std::invalid_argument {
 public:
  ProviderPrecondition(ProviderStage stage, const std::string& what) : std::invalid_argument(what), stage_(stage) {}
  ProviderStage stage() const { return stage_; }

 private:
  ProviderStage stage_;
};

struct ChatRequest {
  std::string role;  // "agent:1", "agent:2" or "moderator"
  std::string prompt;
  double temperature = kAgentTemperature;
  int max_output_tokens = 256;
  std::uint64_t ordinal = 0;  // history length the prompt was built from; mocks may key on it
};

struct SttResult {
  std::string text;
  std::string source_audio_ref;
};

struct TtsAudio {
  std::string bytes;
  std::string container = "mp3";
  std::int64_t duration_ms = 0;
  std::string voice_id;
};

struct TtsResult {
  std::string audio_ref;
  std::int64_t duration_ms = 0;
  std::string voice_id;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  std::string chat_complete(const ChatRequest& req) {
    if (req.prompt.empty()) throw ProviderPrecondition(ProviderStage::chat, "chat prompt must be non-empty");
    if (req.max_output_tokens <= 0 || req.max_output_tokens > max_output_tokens_cap()) {
      throw ProviderPrecondition(ProviderStage::chat, "max_output_tokens out of range");
    }
    return do_complete(req);
  }

  virtual int max_output_tokens_cap() const { return 1024; }
  virtual std::int64_t simulated_latency_ms() const { return 0; }

 protected:
  virtual std::string do_complete(const ChatRequest& req) = 0;
};

class SttBackend {
 public:
  virtual ~SttBackend() = default;

  SttResult transcribe(const AudioBlob& audio, const LanguageTag& language) {
    if (audio.bytes.empty()) throw ProviderPrecondition(ProviderStage::stt, "audio blob must be non-empty");
    if (requires_mp3() && audio.container != "mp3") {
      throw ProviderPrecondition(ProviderStage::stt, "audio container must be mp3, got '" + audio.container + "'");
    }
    return do_transcribe(audio, language);
  }

  virtual bool requires_mp3() const { return false; }
  virtual std::int64_t simulated_latency_ms() const { return 0; }

 protected:
  virtual SttResult do_transcribe(const AudioBlob& audio, const LanguageTag& language) = 0;
};

class TtsBackend {
 public:
  virtual ~TtsBackend() = default;

  TtsAudio synthesize(std::string_view text, std::string_view voice_id) {
    if (util::trim(text).empty()) throw ProviderPrecondition(ProviderStage::tts, "tts text must be non-empty");
    return do_synthesize(text, voice_id);
  }

  virtual std::int64_t simulated_latency_ms() const { return 0; }

 protected:
  virtual TtsAudio do_synthesize(std::string_view text, std::string_view voice_id) = 0;
};

// Fixed for the lifetime of a session.
struct ProviderSet {
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<SttBackend> stt;
  std::shared_ptr<TtsBackend> tts;
};

inline TtsResult synthesize_to_store(TtsBackend& tts, BlobStore& blobs, std::string_view text,
                                     std::string_view voice_id) {
  auto audio = tts.synthesize(text, voice_id);
  return TtsResult{blobs.put(audio.bytes, audio.container), audio.duration_ms, audio.voice_id};
}

// Runs fn; on ProviderError waits kRetryBackoffMs and runs it exactly once
// more. A second failure propagates. Preconditions are not retried.
template <typename Fn, typename Wait>
auto call_with_retry(Fn&& fn, Wait&& wait) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ProviderError&) {
    wait(kRetryBackoffMs);
  }
  return fn();
}

// ---------------------------------------------------------------------------
// Mocks

// Speech-rate model shared by the mock and by live-mode duration estimates.
inline std::int64_t estimate_speech_ms(std::string_view text) {
  return kMockMsPerWord * static_cast<std::int64_t>(util::count_words(text));
}

// Silent MPEG-1 Layer III frames (128 kbit/s, 44.1 kHz) covering duration_ms.
inline std::string silent_mp3(std::int64_t duration_ms) {
  constexpr std::size_t kFrameBytes = 417;
  constexpr double kFrameMs = 1152.0 * 1000.0 / 44100.0;
  const auto frames = static_cast<std::size_t>(static_cast<double>(duration_ms) / kFrameMs) + 1;
  std::string frame(kFrameBytes, '\0');
  frame[0] = '\xFF';
  frame[1] = '\xFB';
  frame[2] = '\x90';
  frame[3] = '\xC4';
  std::string out;
  out.reserve(frames * kFrameBytes);
  for (std::size_t i = 0; i < frames; ++i) out += frame;
  return out;
}

// Lines for one chat role: keyed by ordinal first, then taken in order
// (cycling) from the plain list.
struct RoleScript {
  std::map<std::uint64_t, std::string> by_ordinal;
  std::vector<std::string> lines;
};

struct MockScript {
  std::map<std::string, RoleScript> chat;
  std::map<std::string, std::string> stt;                // blob id -> transcript
  std::int64_t chat_latency_ms = 0;
  std::int64_t stt_latency_ms = 0;
  std::int64_t tts_latency_ms = 0;
  std::map<ProviderStage, std::set<std::uint64_t>> fail_calls;  // 0-based call ordinals that fail
};

class MockScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// {
//   "chat": {"agent:1": [...], "agent:2": {"3": "..."}, "agent": [...], "moderator": ["1"]},
//   "stt": {"u1.mp3": "Hola Marta"},
//   "latency_ms": {"chat": 0, "stt": 0, "tts": 0},
//   "fail": {"chat": [3], "stt": [], "tts": []}
// }
inline MockScript parse_mock_script(std::string_view text) {
  MockScript s;
  try {
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    if (!j.is_object()) throw MockScriptError("mock script must be a JSON object");
    if (j.contains("chat")) {
      for (const auto& [role, lines] : j["chat"].items()) {
        auto& rs = s.chat[role];
        if (lines.is_object()) {
          for (const auto& [ordinal, text] : lines.items()) {
            rs.by_ordinal[std::stoull(ordinal)] = text.get<std::string>();
          }
        } else {
          rs.lines = lines.get<std::vector<std::string>>();
        }
      }
    }
    if (j.contains("stt")) s.stt = j["stt"].get<std::map<std::string, std::string>>();
    if (j.contains("latency_ms")) {
      const auto& l = j["latency_ms"];
      s.chat_latency_ms = l.value("chat", std::int64_t{0});
      s.stt_latency_ms = l.value("stt", std::int64_t{0});
      s.tts_latency_ms = l.value("tts", std::int64_t{0});
    }
    if (j.contains("fail")) {
      for (const auto& [stage, ordinals] : j["fail"].items()) {
        auto st = parse_stage(stage);
        if (!st) throw MockScriptError("unknown stage '" + stage + "' in fail");
        for (auto o : ordinals.get<std::vector<std::uint64_t>>()) s.fail_calls[*st].insert(o);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw MockScriptError(std::string("mock script: ") + e.what());
  } catch (const std::logic_error& e) {
    throw MockScriptError(std::string("mock script: bad ordinal key: ") + e.what());
  }
  return s;
}

inline MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MockScriptError("cannot open mock script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mock_script(ss.str());
}

namespace detail {

class FailureCounter {
 public:
  explicit FailureCounter(std::set<std::uint64_t> fail) : fail_(std::move(fail)) {}

  // Consumes one call ordinal; true if that call should fail.
  bool next() {
    std::lock_guard lock(mu_);
    return fail_.contains(calls_++);
  }
  std::uint64_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  mutable std::mutex mu_;
  std::set<std::uint64_t> fail_;
  std::uint64_t calls_ = 0;
};

}  // namespace detail

class MockChat final : public ChatBackend {
 public:
  explicit MockChat(MockScript script)
      : script_(std::move(script)), failures_(script_.fail_calls[ProviderStage::chat]) {}

  std::int64_t simulated_latency_ms() const override { return script_.chat_latency_ms; }
  std::uint64_t calls() const { return failures_.calls(); }

  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 protected:
  std::string do_complete(const ChatRequest& req) override {
    const bool fail = failures_.next();
    std::lock_guard lock(mu_);
    requests_.push_back(req);
    if (fail) throw ProviderError(ProviderStage::chat, ProviderError::Kind::injected, "injected chat failure");
    const RoleScript* specific = find_role(req.role);
    const RoleScript* generic = req.role.starts_with("agent:") ? find_role("agent") : nullptr;
    for (const auto* rs : {specific, generic}) {
      if (!rs) continue;
      if (auto it = rs->by_ordinal.find(req.ordinal); it != rs->by_ordinal.end()) return it->second;
    }
    const auto n = cursor_[req.role]++;
    for (const auto* rs : {specific, generic}) {
      if (rs && !rs->lines.empty()) return rs->lines[n % rs->lines.size()];
    }
    if (req.role == "moderator") return "no preference";
    return req.role + " line " + std::to_string(n);
  }

 private:
  const RoleScript* find_role(const std::string& role) const {
    auto it = script_.chat.find(role);
    return it == script_.chat.end() ? nullptr : &it->second;
  }

  MockScript script_;
  detail::FailureCounter failures_;
  mutable std::mutex mu_;
  std::map<std::string, std::uint64_t> cursor_;
  std::vector<ChatRequest> requests_;
};

class MockStt final : public SttBackend {
 public:
  explicit MockStt(MockScript script)
      : script_(std::move(script)), failures_(script_.fail_calls[ProviderStage::stt]) {}

  std::int64_t simulated_latency_ms() const override { return script_.stt_latency_ms; }

 protected:
  SttResult do_transcribe(const AudioBlob& audio, const LanguageTag&) override {
    if (failures_.next()) throw ProviderError(ProviderStage::stt, ProviderError::Kind::injected, "injected stt failure");
    auto it = script_.stt.find(audio.id);
    if (it == script_.stt.end()) {
      throw ProviderError(ProviderStage::stt, ProviderError::Kind::unscripted, "no scripted transcript for '" + audio.id + "'");
    }
    return SttResult{it->second, audio.id};
  }

 private:
  MockScript script_;
  detail::FailureCounter failures_;
};

class MockTts final : public TtsBackend {
 public:
  explicit MockTts(MockScript script = {})
      : script_(std::move(script)), failures_(script_.fail_calls[ProviderStage::tts]) {}

  std::int64_t simulated_latency_ms() const override { return script_.tts_latency_ms; }

 protected:
  TtsAudio do_synthesize(std::string_view text, std::string_view voice_id) override {
    if (failures_.next()) throw ProviderError(ProviderStage::tts, ProviderError::Kind::injected, "injected tts failure");
    const auto ms = estimate_speech_ms(text);
    return TtsAudio{silent_mp3(ms), "mp3", ms, std::string(voice_id)};
  }

 private:
  MockScript script_;
  detail::FailureCounter failures_;
};

inline ProviderSet make_mock_providers(const MockScript& script) {
  return ProviderSet{std::make_shared<MockChat>(script), std::make_shared<MockStt>(script),
                     std::make_shared<MockTts>(script)};
}

}  // namespace trialogue
