#pragma once

// Network service hosting sessions on one port.
//
//   POST   /sessions                  body: partial session config -> 201 {session_id, ...} | 400 {violations}
//   DELETE /sessions/{id}             close; 200 {session_id, transcript, utterances} | 404
//   GET    /sessions/{id}/transcript  JSON Lines transcript | 404
//   GET    /sessions/{id}/ws          WebSocket event channel | 404 | 409
//   GET    /blobs/{ref}               stored audio | 404
//   GET    /stats                     per-event handling latency
//
// Each session runs on its own strand; provider calls run on a shared pool
// and report back by posting their result event onto that strand. Message
// formats are documented in docs/wire-protocol.md.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/asio/bind_executor.hpp>
#include <boost/asio/dispatch.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "trialogue/blob_store.hpp"
#include "trialogue/config_json.hpp"
#include "trialogue/event_log.hpp"
#include "trialogue/session.hpp"
#include "trialogue/transcript.hpp"
#include "trialogue/util.hpp"

namespace trialogue {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

struct ServiceOptions {
  SessionConfig defaults;  // POST bodies overlay this
  std::shared_ptr<const PromptTemplates> templates;
  std::function<ProviderSet()> make_providers;  // called once per session
  std::filesystem::path transcript_dir = "transcripts";
  std::shared_ptr<BlobStore> blobs;
  std::chrono::milliseconds idle_timeout = std::chrono::minutes(30);
  std::chrono::milliseconds gc_interval = std::chrono::seconds(30);
  std::size_t io_threads = 2;
  std::size_t provider_threads = 8;
  std::size_t max_body_bytes = 32 * 1024 * 1024;
};

// Handling latency per engine event: from the moment the event is ready
// (message received, timer expired, provider result posted) until the
// engine and all resulting sends have run.
class LatencyStats {
 public:
  void add(double ms) {
    std::lock_guard lock(mu_);
    samples_.push_back(ms);
  }

  struct Summary {
    std::size_t count = 0;
    double median_ms = 0;
    double p95_ms = 0;
    double max_ms = 0;
  };

  Summary summary() const {
    std::vector<double> v;
    {
      std::lock_guard lock(mu_);
      v = samples_;
    }
    Summary s;
    s.count = v.size();
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.median_ms = v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2.0;
    s.p95_ms = v[std::min(v.size() - 1, static_cast<std::size_t>(0.95 * static_cast<double>(v.size())))];
    s.max_ms = v.back();
    return s;
  }

 private:
  mutable std::mutex mu_;
  std::vector<double> samples_;
};

// Outbound half of an attached event channel.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(std::string message) = 0;
  virtual void close() = 0;  // after queued messages are written
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

struct ServiceContext {
  ServiceOptions options;
  net::thread_pool providers;
  LatencyStats stats;

  explicit ServiceContext(ServiceOptions o) : options(std::move(o)), providers(std::max<std::size_t>(1, options.provider_threads)) {}
};

class RealtimeJobContext final : public JobContext {
 public:
  void wait(std::int64_t ms) override { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }
  void charge(std::int64_t ms) override {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }
};

inline nlohmann::json agent_json(std::optional<AgentId> a) {
  return a ? nlohmann::json(to_int(*a)) : nlohmann::json(nullptr);
}

}  // namespace detail

struct CloseInfo {
  std::string session_id;
  std::filesystem::path transcript;
  std::size_t utterances = 0;
};

// One hosted session. All engine work happens on strand_.
class LiveSession final : public std::enable_shared_from_this<LiveSession>, public Scheduler, public SessionObserver {
 public:
  LiveSession(std::string id, SessionConfig cfg, std::shared_ptr<detail::ServiceContext> ctx, net::io_context& ioc)
      : id_(std::move(id)),
        ctx_(std::move(ctx)),
        strand_(net::make_strand(ioc)),
        created_(detail::Clock::now()),
        session_(std::move(cfg), ctx_->options.make_providers(), ctx_->options.templates, *this, ctx_->options.blobs,
                 this) {
    std::filesystem::create_directories(ctx_->options.transcript_dir);
    transcript_path_ = std::filesystem::absolute(ctx_->options.transcript_dir / (id_ + ".jsonl"));
    transcript_.open(transcript_path_, std::ios::binary | std::ios::trunc);
    events_.open(ctx_->options.transcript_dir / (id_ + ".events.jsonl"), std::ios::binary | std::ios::trunc);
    if (!transcript_ || !events_) throw std::runtime_error("cannot open transcript files for session " + id_);
    events_ << event_log_header(session_.config()) << '\n' << std::flush;
    touch();
  }

  const std::string& id() const { return id_; }
  const std::filesystem::path& transcript_path() const { return transcript_path_; }
  bool closed() const { return closed_.load(); }
  std::int64_t idle_ms() const { return steady_ms() - last_activity_.load(); }

  void start() {
    net::post(strand_, [self = shared_from_this()] { self->session_.start(); });
  }

  // -- event channel --------------------------------------------------------

  bool try_reserve_channel() {
    bool expected = false;
    return !closed() && channel_reserved_.compare_exchange_strong(expected, true);
  }
  void release_channel() { channel_reserved_.store(false); }

  void attach(std::shared_ptr<Channel> ch) {
    net::post(strand_, [self = shared_from_this(), ch = std::move(ch)]() mutable {
      for (auto& m : self->backlog_) ch->send(std::move(m));
      self->backlog_.clear();
      if (self->closed_) {
        ch->close();
        return;
      }
      self->channel_ = std::move(ch);
    });
  }

  void detach(const Channel* ch) {
    net::post(strand_, [self = shared_from_this(), ch] {
      if (self->channel_.get() == ch) self->channel_.reset();
      self->release_channel();
    });
  }

  void client_message(std::string text, detail::Clock::time_point received) {
    net::post(strand_, [self = shared_from_this(), text = std::move(text), received] {
      self->on_client_message(text, received);
    });
  }

  // Closes the engine (if still open), flushes files, and reports where the
  // transcript went. done runs on the session strand.
  void close(std::function<void(CloseInfo)> done) {
    net::post(strand_, [self = shared_from_this(), done = std::move(done)] {
      if (!self->session_.closed()) self->deliver(ev::CloseRequested{}, detail::Clock::now());
      self->finalize();
      done(CloseInfo{self->id_, self->transcript_path_, self->session_.history().size()});
    });
  }

  // -- Scheduler ------------------------------------------------------------

  std::int64_t now_ms() const override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(detail::Clock::now() - created_).count();
  }

  void post_after(std::int64_t delay_ms, EngineEvent::Payload payload, TimerSlot slot) override {
    auto timer = std::make_shared<net::steady_timer>(strand_, std::chrono::milliseconds(std::max<std::int64_t>(0, delay_ms)));
    const auto gen = generation_[slot];
    timers_.emplace(slot, timer);
    timer->async_wait([self = shared_from_this(), timer, slot, gen, payload = std::move(payload)](
                          const boost::system::error_code& ec) mutable {
      self->forget_timer(slot, timer.get());
      if (ec || gen != self->generation_[slot]) return;
      self->deliver(std::move(payload), timer->expiry());
    });
  }

  void cancel(TimerSlot slot) override {
    ++generation_[slot];
    auto [lo, hi] = timers_.equal_range(slot);
    for (auto it = lo; it != hi; ++it) it->second->cancel();
    timers_.erase(lo, hi);
  }

  void run_job(ProviderJob job) override {
    net::post(ctx_->providers, [self = shared_from_this(), job = std::move(job)]() mutable {
      detail::RealtimeJobContext jc;
      auto payload = job(jc);
      const auto ready = detail::Clock::now();
      net::post(self->strand_, [self, payload = std::move(payload), ready]() mutable {
        self->deliver(std::move(payload), ready);
      });
    });
  }

  // -- SessionObserver ------------------------------------------------------

  void on_event(const EngineEvent& e) override { events_ << event_to_json(e).dump() << '\n' << std::flush; }

  void on_scene_ready(const SceneContext& scene, std::int64_t) override {
    nlohmann::json m{{"type", "scene_ready"}, {"scene", {{"scene_label", scene.scene_label}, {"objects", scene.objects}}}};
    send(std::move(m));
  }

  void on_illegal(const IllegalEvent& e, std::int64_t) override {
    send({{"type", "error"}, {"stage", "engine"}, {"detail", e.message()}});
  }

  void on_effect(const EngineEffect& effect, std::int64_t) override {
    std::visit([this](const auto& e) { translate(e); }, effect);
  }

 private:
  static std::int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(detail::Clock::now().time_since_epoch()).count();
  }
  void touch() { last_activity_.store(steady_ms()); }

  void forget_timer(TimerSlot slot, const net::steady_timer* t) {
    auto [lo, hi] = timers_.equal_range(slot);
    for (auto it = lo; it != hi; ++it) {
      if (it->second.get() == t) {
        timers_.erase(it);
        return;
      }
    }
  }

  void deliver(EngineEvent::Payload payload, detail::Clock::time_point ready) {
    if (session_.closed()) return;
    session_.dispatch(EngineEvent{now_ms(), std::move(payload)});
    ctx_->stats.add(detail::ms_since(ready));
    if (session_.closed()) finalize();
  }

  void finalize() {
    if (closed_.exchange(true)) return;
    transcript_.flush();
    transcript_.close();
    events_.flush();
    events_.close();
    for (auto& [slot, t] : timers_) t->cancel();
    timers_.clear();
    if (channel_) {
      channel_->close();
      channel_.reset();
    }
  }

  void send(nlohmann::json m) {
    m["t_ms"] = now_ms();
    auto text = m.dump();
    if (channel_) {
      channel_->send(std::move(text));
    } else {
      backlog_.push_back(std::move(text));
    }
  }

  void translate(const fx::EmitStateChange& e) {
    send({{"type", "state"}, {"state", std::string(e.state.name())}, {"agent", detail::agent_json(e.state.agent())}});
  }
  void translate(const fx::EmitUtterance& e) {
    const auto& u = e.utterance;
    transcript_ << encode_utterance(u) << '\n' << std::flush;
    if (u.speaker.is_user()) {
      send({{"type", "user_transcript"}, {"seq", u.seq}, {"text", u.text}});
    } else {
      send({{"type", "caption"},
            {"seq", u.seq},
            {"speaker", u.speaker.str()},
            {"agent", detail::agent_json(u.speaker.agent_id())},
            {"text", u.text}});
    }
  }
  void translate(const fx::PlayAudio& e) {
    send({{"type", "audio"},
          {"speaker", SpeakerId::agent(e.agent).str()},
          {"agent", to_int(e.agent)},
          {"blob_url", e.audio_ref ? nlohmann::json("/blobs/" + *e.audio_ref) : nlohmann::json(nullptr)},
          {"duration_ms", e.duration_ms}});
  }
  void translate(const fx::StopAudio&) { send({{"type", "audio_stop"}}); }
  void translate(const fx::ReportError& e) { send({{"type", "error"}, {"stage", e.stage}, {"detail", e.detail}}); }
  template <typename Other>
  void translate(const Other&) {}

  void protocol_error(const std::string& detail) { send({{"type", "error"}, {"stage", "protocol"}, {"detail", detail}}); }

  void on_client_message(const std::string& text, detail::Clock::time_point received) {
    touch();
    if (session_.closed()) return;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      return protocol_error("message is not JSON");
    }
    const auto type = j.is_object() ? j.value("type", std::string{}) : std::string{};
    if (type == "ptt_down") {
      deliver(ev::PttPressed{}, received);
    } else if (type == "ptt_up") {
      UserSpeech speech;
      try {
        if (j.contains("text") && j["text"].is_string()) {
          speech.text = j["text"].get<std::string>();
        } else if (j.contains("audio") && j["audio"].is_string()) {
          auto bytes = util::base64_decode(j["audio"].get<std::string>());
          if (!bytes.empty()) {
            const auto container = j.value("container", std::string("mp3"));
            const auto ref = ctx_->options.blobs->put(bytes, container);
            speech.audio = AudioBlob{j.value("name", ref), container, std::move(bytes)};
          }
        }
      } catch (const std::exception& e) {
        return protocol_error(std::string("bad ptt_up payload: ") + e.what());
      }
      deliver(ev::PttReleased{std::move(speech)}, received);
    } else if (type == "close") {
      deliver(ev::CloseRequested{}, received);
    } else {
      protocol_error("unknown message type '" + type + "'");
    }
  }

  std::string id_;
  std::shared_ptr<detail::ServiceContext> ctx_;
  net::strand<net::io_context::executor_type> strand_;
  detail::Clock::time_point created_;
  Session session_;

  std::filesystem::path transcript_path_;
  std::ofstream transcript_;
  std::ofstream events_;

  std::map<TimerSlot, std::uint64_t> generation_;
  std::multimap<TimerSlot, std::shared_ptr<net::steady_timer>> timers_;

  std::shared_ptr<Channel> channel_;
  std::vector<std::string> backlog_;
  std::atomic<bool> channel_reserved_{false};
  std::atomic<bool> closed_{false};
  std::atomic<std::int64_t> last_activity_{0};
};

namespace detail {

using Response = http::response<http::string_body>;
using Request = http::request<http::string_body>;
using Respond = std::function<void(Response)>;

inline Response make_response(const Request& req, http::status status, std::string body,
                              std::string content_type = "application/json") {
  Response res{status, req.version()};
  res.set(http::field::server, "trialogue");
  res.set(http::field::content_type, content_type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

inline Response json_response(const Request& req, http::status status, const nlohmann::json& j) {
  return make_response(req, status, j.dump());
}

inline std::vector<std::string> split_path(std::string_view target) {
  const auto q = target.find('?');
  if (q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < target.size()) {
    while (i < target.size() && target[i] == '/') ++i;
    const auto j = target.find('/', i);
    const auto end = j == std::string_view::npos ? target.size() : j;
    if (end > i) parts.emplace_back(target.substr(i, end - i));
    i = end;
  }
  return parts;
}

inline bool is_session_id(std::string_view s) {
  return s.size() == 32 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

class WsConnection final : public Channel, public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(beast::tcp_stream stream, std::shared_ptr<LiveSession> session)
      : ws_(std::move(stream)), session_(session) {}

  void start(Request req) {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      auto s = self->session_.lock();
      if (!s) return;
      if (ec) {
        s->release_channel();
        return;
      }
      s->attach(self);
      self->do_read();
    });
  }

  void send(std::string message) override {
    net::post(ws_.get_executor(), [self = shared_from_this(), m = std::move(message)]() mutable {
      self->out_.push_back(std::move(m));
      if (!self->writing_) self->write_next();
    });
  }

  void close() override {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->closing_ = true;
      if (!self->writing_) self->write_next();
    });
  }

 private:
  void write_next() {
    if (out_.empty()) {
      if (closing_ && !close_sent_) {
        close_sent_ = true;
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
      }
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->out_.clear();
        return;
      }
      self->out_.pop_front();
      self->write_next();
    });
  }

  void do_read() {
    ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        if (auto s = self->session_.lock()) s->detach(self.get());
        return;
      }
      auto text = beast::buffers_to_string(self->buf_.data());
      self->buf_.consume(self->buf_.size());
      if (auto s = self->session_.lock()) s->client_message(std::move(text), Clock::now());
      self->do_read();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::weak_ptr<LiveSession> session_;
  beast::flat_buffer buf_;
  std::deque<std::string> out_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_sent_ = false;
};

}  // namespace detail

class Service {
 public:
  explicit Service(ServiceOptions options)
      : ctx_(std::make_shared<detail::ServiceContext>(std::move(options))),
        acceptor_(ioc_),
        gc_timer_(ioc_) {
    auto& o = ctx_->options;
    if (!o.blobs) o.blobs = std::make_shared<InMemoryBlobStore>();
    if (!o.templates) o.templates = std::make_shared<const PromptTemplates>();
    if (!o.make_providers) o.make_providers = [] { return make_mock_providers({}); };
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and starts serving; returns the bound port (useful with port 0).
  unsigned short start(const std::string& host, unsigned short port) {
    const tcp::endpoint ep{net::ip::make_address(host), port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen(net::socket_base::max_listen_connections);
    do_accept();
    schedule_gc();
    for (std::size_t i = 0; i < std::max<std::size_t>(1, ctx_->options.io_threads); ++i) {
      threads_.emplace_back([this] { ioc_.run(); });
    }
    return acceptor_.local_endpoint().port();
  }

  void wait() {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    ioc_.stop();
    wait();
    ctx_->providers.join();
    std::lock_guard lock(mu_);
    sessions_.clear();
  }

  LatencyStats::Summary latency() const { return ctx_->stats.summary(); }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  // Closes and forgets sessions idle longer than idle_timeout. Returns how
  // many were collected.
  std::size_t collect_idle() {
    std::vector<std::shared_ptr<LiveSession>> victims;
    {
      std::lock_guard lock(mu_);
      for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (it->second->idle_ms() >= ctx_->options.idle_timeout.count()) {
          victims.push_back(it->second);
          it = sessions_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& s : victims) s->close([](CloseInfo) {});
    return victims.size();
  }

 private:
  class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
   public:
    HttpConnection(tcp::socket socket, Service& svc) : stream_(std::move(socket)), svc_(svc) {}

    void run() {
      net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
    }

   private:
    void do_read() {
      parser_.emplace();
      parser_->body_limit(svc_.ctx_->options.max_body_bytes);
      stream_.expires_after(std::chrono::seconds(60));
      http::async_read(stream_, buffer_, *parser_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        self->on_read(ec);
      });
    }

    void on_read(beast::error_code ec) {
      if (ec) {
        beast::error_code ignored;
        stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      auto req = parser_->release();
      if (websocket::is_upgrade(req)) {
        if (auto res = svc_.upgrade(stream_, req)) return write(std::move(*res));
        return;  // stream handed over to the WebSocket connection
      }
      svc_.handle(std::move(req), [self = shared_from_this()](detail::Response res) {
        net::post(self->stream_.get_executor(), [self, res = std::move(res)]() mutable { self->write(std::move(res)); });
      });
    }

    void write(detail::Response res) {
      auto sp = std::make_shared<detail::Response>(std::move(res));
      http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
        if (ec) return;
        if (!sp->keep_alive()) {
          beast::error_code ignored;
          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
          return;
        }
        self->do_read();
      });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
    Service& svc_;
  };

  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<HttpConnection>(std::move(socket), *this)->run();
      if (acceptor_.is_open() && !stopped_) do_accept();
    });
  }

  void schedule_gc() {
    gc_timer_.expires_after(ctx_->options.gc_interval);
    gc_timer_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      collect_idle();
      schedule_gc();
    });
  }

  std::shared_ptr<LiveSession> find(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::shared_ptr<LiveSession> take(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    auto s = it->second;
    sessions_.erase(it);
    return s;
  }

  // nullopt when the stream was handed to a WebSocket connection.
  std::optional<detail::Response> upgrade(beast::tcp_stream& stream, const detail::Request& req) {
    const auto parts = detail::split_path(std::string_view(req.target().data(), req.target().size()));
    if (parts.size() != 3 || parts[0] != "sessions" || parts[2] != "ws") {
      return detail::json_response(req, http::status::not_found, {{"error", "not found"}});
    }
    auto s = find(parts[1]);
    if (!s || s->closed()) return detail::json_response(req, http::status::not_found, {{"error", "unknown session"}});
    if (!s->try_reserve_channel()) {
      return detail::json_response(req, http::status::conflict, {{"error", "event channel already attached"}});
    }
    std::make_shared<detail::WsConnection>(std::move(stream), s)->start(req);
    return std::nullopt;
  }

  void handle(detail::Request req, const detail::Respond& respond) {
    using detail::json_response;
    const auto parts = detail::split_path(std::string_view(req.target().data(), req.target().size()));
    const auto method = req.method();
    try {
      if (method == http::verb::options) {
        auto res = detail::make_response(req, http::status::no_content, "");
        res.set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
        return respond(std::move(res));
      }
      if (parts.size() == 1 && parts[0] == "sessions" && method == http::verb::post) return create(req, respond);
      if (parts.size() == 2 && parts[0] == "sessions" && method == http::verb::delete_) {
        auto s = detail::is_session_id(parts[1]) ? take(parts[1]) : nullptr;
        if (!s) return respond(json_response(req, http::status::not_found, {{"error", "unknown session"}}));
        s->close([req, respond](CloseInfo info) {
          respond(json_response(req, http::status::ok,
                                {{"session_id", info.session_id},
                                 {"transcript", info.transcript.string()},
                                 {"utterances", info.utterances}}));
        });
        return;
      }
      if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "transcript" && method == http::verb::get) {
        if (!detail::is_session_id(parts[1])) return respond(json_response(req, http::status::not_found, {{"error", "unknown session"}}));
        std::ifstream in(ctx_->options.transcript_dir / (parts[1] + ".jsonl"), std::ios::binary);
        if (!in) return respond(json_response(req, http::status::not_found, {{"error", "unknown session"}}));
        std::ostringstream ss;
        ss << in.rdbuf();
        return respond(detail::make_response(req, http::status::ok, ss.str(), "application/x-ndjson"));
      }
      if (parts.size() == 2 && parts[0] == "blobs" && method == http::verb::get) {
        auto blob = BlobStore::is_valid_ref(parts[1]) ? ctx_->options.blobs->get(parts[1]) : std::nullopt;
        if (!blob) return respond(json_response(req, http::status::not_found, {{"error", "unknown blob"}}));
        const bool mp3 = parts[1].ends_with(".mp3");
        return respond(detail::make_response(req, http::status::ok, std::move(*blob),
                                             mp3 ? "audio/mpeg" : "application/octet-stream"));
      }
      if (parts.size() == 1 && parts[0] == "stats" && method == http::verb::get) {
        const auto l = latency();
        return respond(json_response(req, http::status::ok,
                                     {{"sessions", session_count()},
                                      {"events", l.count},
                                      {"median_ms", l.median_ms},
                                      {"p95_ms", l.p95_ms},
                                      {"max_ms", l.max_ms}}));
      }
      respond(json_response(req, http::status::not_found, {{"error", "not found"}}));
    } catch (const std::exception& e) {
      respond(json_response(req, http::status::internal_server_error, {{"error", e.what()}}));
    }
  }

  void create(const detail::Request& req, const detail::Respond& respond) {
    using detail::json_response;
    SessionConfig cfg;
    try {
      const auto j = req.body().empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body());
      cfg = config_from_json(j, ctx_->options.defaults);
    } catch (const std::exception& e) {
      return respond(json_response(req, http::status::bad_request, {{"violations", {std::string(e.what())}}}));
    }
    auto violations = validate_config(cfg);
    if (!violations.empty()) return respond(json_response(req, http::status::bad_request, {{"violations", violations}}));

    std::shared_ptr<LiveSession> s;
    {
      std::lock_guard lock(mu_);
      std::string id;
      do {
        id = util::random_token();
      } while (sessions_.contains(id));
      s = std::make_shared<LiveSession>(id, cfg, ctx_, ioc_);
      sessions_.emplace(id, s);
    }
    s->start();
    const auto created_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    respond(json_response(req, http::status::created,
                          {{"session_id", s->id()},
                           {"created_at", created_at},
                           {"state", "Initializing"},
                           {"ws_url", "/sessions/" + s->id() + "/ws"},
                           {"config", config_to_json(cfg)}}));
  }

  std::shared_ptr<detail::ServiceContext> ctx_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  net::steady_timer gc_timer_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stopped_{false};
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
};

}  // namespace trialogue
