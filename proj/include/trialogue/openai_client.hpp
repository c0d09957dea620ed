#pragma once

// Client for OpenAI-compatible endpoints:
//   POST {base}/chat/completions      JSON {model, messages[{role, content}], temperature, max_tokens}
//   POST {base}/audio/transcriptions  multipart {file, model, language}
//   POST {base}/audio/speech          JSON {model, input, voice, response_format}
// The base URL and bearer token come from PROVIDER_BASE_URL and
// PROVIDER_API_KEY.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trialogue/providers.hpp"

namespace trialogue {

inline constexpr std::string_view kDefaultBaseUrl = "https://api.openai.com/v1";

struct OpenAiOptions {
  std::string base_url = std::string(kDefaultBaseUrl);
  std::string api_key;
  std::string chat_model = "gpt-4o";
  std::string stt_model = "whisper-1";
  std::string tts_model = "tts-1";
  std::chrono::milliseconds timeout{30000};
  int max_output_tokens_cap = 1024;

  // Reads PROVIDER_BASE_URL and PROVIDER_API_KEY; unset variables keep defaults.
  static OpenAiOptions from_env() {
    OpenAiOptions o;
    if (const char* url = std::getenv("PROVIDER_BASE_URL"); url && *url) o.base_url = url;
    if (const char* key = std::getenv("PROVIDER_API_KEY"); key && *key) o.api_key = key;
    return o;
  }
};

// "scheme://host[:port][/prefix]" split into the client origin and path prefix.
struct BaseUrl {
  std::string origin;
  std::string prefix;

  static BaseUrl parse(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw std::invalid_argument("base URL needs a scheme: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    BaseUrl b;
    b.origin = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) b.prefix = std::string(url.substr(path_start));
    while (!b.prefix.empty() && b.prefix.back() == '/') b.prefix.pop_back();
    return b;
  }
};

namespace detail {

class OpenAiTransport {
 public:
  explicit OpenAiTransport(OpenAiOptions opts) : opts_(std::move(opts)), base_(BaseUrl::parse(opts_.base_url)) {}

  const OpenAiOptions& options() const { return opts_; }

  httplib::Result post_json(ProviderStage stage, const std::string& path, const nlohmann::json& body) {
    auto client = make_client();
    auto res = client.Post(base_.prefix + path, headers(), body.dump(), "application/json");
    check(stage, res);
    return res;
  }

  httplib::Result post_multipart(ProviderStage stage, const std::string& path,
                                 const httplib::MultipartFormDataItems& items) {
    auto client = make_client();
    auto res = client.Post(base_.prefix + path, headers(), items);
    check(stage, res);
    return res;
  }

 private:
  httplib::Client make_client() const {
    httplib::Client c(base_.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout - secs);
    c.set_connection_timeout(secs.count(), usecs.count());
    c.set_read_timeout(secs.count(), usecs.count());
    c.set_write_timeout(secs.count(), usecs.count());
    return c;
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!opts_.api_key.empty()) h.emplace("Authorization", "Bearer " + opts_.api_key);
    return h;
  }

  static void check(ProviderStage stage, const httplib::Result& res) {
    if (!res) {
      throw ProviderError(stage, ProviderError::Kind::timeout, "transport error: " + httplib::to_string(res.error()));
    }
    if (res->status >= 400) {
      throw ProviderError(stage, ProviderError::Kind::http_status,
                          "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), res->status);
    }
  }

  OpenAiOptions opts_;
  BaseUrl base_;
};

inline nlohmann::json parse_body(ProviderStage stage, const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(stage, ProviderError::Kind::malformed_response, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

class OpenAiChat final : public ChatBackend {
 public:
  explicit OpenAiChat(OpenAiOptions opts) : transport_(std::move(opts)) {}

  int max_output_tokens_cap() const override { return transport_.options().max_output_tokens_cap; }

  static nlohmann::json request_body(const OpenAiOptions& o, const ChatRequest& req) {
    return {{"model", o.chat_model},
            {"messages", nlohmann::json::array({{{"role", "system"}, {"content", req.prompt}}})},
            {"temperature", req.temperature},
            {"max_tokens", req.max_output_tokens}};
  }

 protected:
  std::string do_complete(const ChatRequest& req) override {
    auto res = transport_.post_json(ProviderStage::chat, "/chat/completions", request_body(transport_.options(), req));
    const auto j = detail::parse_body(ProviderStage::chat, res->body);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProviderError(ProviderStage::chat, ProviderError::Kind::malformed_response,
                          "response lacks choices[0].message.content");
    }
  }

 private:
  detail::OpenAiTransport transport_;
};

class OpenAiStt final : public SttBackend {
 public:
  explicit OpenAiStt(OpenAiOptions opts) : transport_(std::move(opts)) {}

  bool requires_mp3() const override { return true; }

 protected:
  SttResult do_transcribe(const AudioBlob& audio, const LanguageTag& language) override {
    httplib::MultipartFormDataItems items{
        {"file", audio.bytes, audio.id.empty() ? "speech.mp3" : audio.id, "audio/mpeg"},
        {"model", transport_.options().stt_model, "", ""},
        {"language", language.code, "", ""},
    };
    auto res = transport_.post_multipart(ProviderStage::stt, "/audio/transcriptions", items);
    const auto j = detail::parse_body(ProviderStage::stt, res->body);
    if (!j.contains("text") || !j["text"].is_string()) {
      throw ProviderError(ProviderStage::stt, ProviderError::Kind::malformed_response, "response lacks text");
    }
    return SttResult{j["text"].get<std::string>(), audio.id};
  }

 private:
  detail::OpenAiTransport transport_;
};

class OpenAiTts final : public TtsBackend {
 public:
  explicit OpenAiTts(OpenAiOptions opts) : transport_(std::move(opts)) {}

  static nlohmann::json request_body(const OpenAiOptions& o, std::string_view text, std::string_view voice) {
    return {{"model", o.tts_model}, {"input", text}, {"voice", voice}, {"response_format", "mp3"}};
  }

 protected:
  TtsAudio do_synthesize(std::string_view text, std::string_view voice_id) override {
    auto res = transport_.post_json(ProviderStage::tts, "/audio/speech", request_body(transport_.options(), text, voice_id));
    if (res->body.empty()) throw ProviderError(ProviderStage::tts, ProviderError::Kind::malformed_response, "empty audio");
    // No decoding here: duration uses the same speech-rate model as the mock.
    return TtsAudio{res->body, "mp3", std::max<std::int64_t>(estimate_speech_ms(text), kMockMsPerWord),
                    std::string(voice_id)};
  }

 private:
  detail::OpenAiTransport transport_;
};

inline ProviderSet make_live_providers(const OpenAiOptions& opts) {
  return ProviderSet{std::make_shared<OpenAiChat>(opts), std::make_shared<OpenAiStt>(opts),
                     std::make_shared<OpenAiTts>(opts)};
}

}  // namespace trialogue
