// Engagement counts for one transcript or a directory of them.
// Exit status: 0 all files read, 2 some files skipped, 1 usage or I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "trialogue/analytics.hpp"

int main(int argc, char** argv) {
  using namespace trialogue;
  namespace fs = std::filesystem;

  CLI::App app{"engagement analytics over transcript files"};
  std::string input;
  std::string json_out;
  app.add_option("input", input, "Transcript (.jsonl) or directory of transcripts")->required()->check(CLI::ExistingPath);
  app.add_option("--json", json_out, "Also write the report as JSON to this file");
  CLI11_PARSE(app, argc, argv);

  BatchReport batch;
  try {
    if (fs::is_directory(input)) {
      batch = report_batch(input);
    } else {
      batch.rows.push_back(analyze(input));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  std::cout << format_table(batch.rows);
  for (const auto& e : batch.errors) std::cerr << "skipped " << e.file << ": " << e.message << '\n';

  if (!json_out.empty()) {
    std::ofstream out(json_out, std::ios::binary | std::ios::trunc);
    out << batch_to_json(batch).dump(2) << '\n';
    if (!out) {
      std::cerr << "error: cannot write " << json_out << '\n';
      return 1;
    }
  }
  return batch.partial_failure() ? 2 : 0;
}
