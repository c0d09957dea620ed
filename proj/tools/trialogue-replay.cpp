// Folds a recorded event log back through the engine and prints the
// resulting transcript. With --check, compares against a saved transcript.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "trialogue/event_log.hpp"
#include "trialogue/sim.hpp"
#include "trialogue/transcript.hpp"

int main(int argc, char** argv) {
  using namespace trialogue;

  CLI::App app{"replay an event log into a transcript"};
  std::string log_path;
  std::string out_path;
  std::string check_path;
  app.add_option("events", log_path, "Event log (.events.jsonl)")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", out_path, "Write the transcript here instead of stdout");
  app.add_option("--check", check_path, "Exit 3 unless the replay is byte-identical to this transcript")
      ->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  std::string transcript;
  try {
    std::ifstream in(log_path, std::ios::binary);
    const auto log = read_event_log(in);
    transcript = encode_transcript(replay_events(log.config, log.events));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  if (out_path.empty()) {
    std::cout << transcript;
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << transcript;
    if (!out) {
      std::cerr << "error: cannot write " << out_path << '\n';
      return 1;
    }
  }

  if (!check_path.empty()) {
    std::ifstream in(check_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (ss.str() != transcript) {
      std::cerr << "replay differs from " << check_path << '\n';
      return 3;
    }
  }
  return 0;
}
