// Runs the session service until SIGINT or SIGTERM.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "trialogue/openai_client.hpp"
#include "trialogue/prompt.hpp"
#include "trialogue/scene.hpp"
#include "trialogue/service.hpp"

int main(int argc, char** argv) {
  using namespace trialogue;

  CLI::App app{"trialogue session server"};
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
  std::string scene_path;
  std::string templates_dir;
  std::string providers = "mock";
  std::string mock_script;
  std::string transcript_dir = "transcripts";
  std::string blob_dir = "blobs";
  std::int64_t idle_timeout_s = 1800;
  std::size_t io_threads = 2;
  std::size_t provider_threads = 8;

  app.add_option("--host", host, "Address to bind")->capture_default_str();
  app.add_option("--port", port, "Port to bind; 0 picks a free one")->capture_default_str();
  app.add_option("--scene", scene_path, "Scene JSON used when a session does not supply one")->check(CLI::ExistingFile);
  app.add_option("--templates", templates_dir, "Directory with agent.txt and moderator.txt")->check(CLI::ExistingDirectory);
  app.add_option("--providers", providers, "live (PROVIDER_BASE_URL, PROVIDER_API_KEY) or mock")
      ->check(CLI::IsMember({"live", "mock"}))
      ->capture_default_str();
  app.add_option("--mock-script", mock_script, "Mock provider script (JSON)")->check(CLI::ExistingFile);
  app.add_option("--transcript-dir", transcript_dir, "Where transcripts and event logs are written")->capture_default_str();
  app.add_option("--blob-dir", blob_dir, "Content-addressed audio store; empty keeps audio in memory")->capture_default_str();
  app.add_option("--idle-timeout", idle_timeout_s, "Seconds of inactivity before a session is closed")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--io-threads", io_threads, "Network threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--provider-threads", provider_threads, "Provider call threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  ServiceOptions o;
  try {
    if (!scene_path.empty()) o.defaults.scene = load_scene(scene_path);
    if (!templates_dir.empty()) o.templates = std::make_shared<const PromptTemplates>(load_templates(templates_dir));
    if (providers == "live") {
      const auto live = make_live_providers(OpenAiOptions::from_env());
      o.make_providers = [live] { return live; };
    } else {
      const auto script = mock_script.empty() ? MockScript{} : load_mock_script(mock_script);
      o.make_providers = [script] { return make_mock_providers(script); };
    }
    if (!blob_dir.empty()) o.blobs = std::make_shared<DirectoryBlobStore>(blob_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (const auto v = validate_config(o.defaults); !v.empty()) {
    std::cerr << "error: default session config is invalid (pass --scene?):\n";
    for (const auto& m : v) std::cerr << "  " << m << '\n';
    return 1;
  }
  o.transcript_dir = transcript_dir;
  o.idle_timeout = std::chrono::seconds(idle_timeout_s);
  o.io_threads = io_threads;
  o.provider_threads = provider_threads;

  Service service(std::move(o));
  unsigned short bound = 0;
  try {
    bound = service.start(host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot listen on " << host << ':' << port << ": " << e.what() << '\n';
    return 1;
  }
  std::cout << "listening on http://" << host << ':' << bound << " (providers: " << providers << ")" << std::endl;

  boost::asio::io_context signals_ctx;
  boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
  signals.async_wait([](const boost::system::error_code&, int) {});
  signals_ctx.run();

  const auto stats = service.latency();
  service.stop();
  std::cout << "stopped; " << stats.count << " events, median " << stats.median_ms << " ms, p95 " << stats.p95_ms
            << " ms" << std::endl;
  return 0;
}
