#pragma once

// Engagement tallies over learner transcripts:
//   turns_taken             - committed learner utterances
//   elaborative_clauses     - elaborative_clause tags on learner lines
//   negotiations_of_meaning - negotiation_of_meaning tags on learner lines
//   backchannels            - backchannel tags on learner lines
// Tags are written by a human coder; nothing here infers them.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialogue/transcript.hpp"

namespace trialogue {

struct EngagementReport {
  std::string participant_id;
  std::uint64_t turns_taken = 0;
  std::uint64_t elaborative_clauses = 0;
  std::uint64_t negotiations_of_meaning = 0;
  std::uint64_t backchannels = 0;

  bool operator==(const EngagementReport&) const = default;
};

inline EngagementReport tally(const ConversationHistory& h, std::string participant_id) {
  EngagementReport r{std::move(participant_id)};
  for (const auto& u : h.entries()) {
    if (!u.speaker.is_user()) continue;
    ++r.turns_taken;
    for (auto tag : u.annotations) {
      switch (tag) {
        case AnnotationTag::elaborative_clause: ++r.elaborative_clauses; break;
        case AnnotationTag::negotiation_of_meaning: ++r.negotiations_of_meaning; break;
        case AnnotationTag::backchannel: ++r.backchannels; break;
      }
    }
  }
  return r;
}

// Throws TranscriptParseError (with line number) or std::runtime_error if
// the file cannot be opened. participant_id defaults to the file stem.
inline EngagementReport analyze(const std::filesystem::path& transcript, std::string participant_id = {}) {
  std::ifstream in(transcript, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + transcript.string());
  if (participant_id.empty()) participant_id = transcript.stem().string();
  return tally(decode_transcript(in), std::move(participant_id));
}

struct BatchError {
  std::string file;
  std::string message;
};

struct BatchReport {
  std::vector<EngagementReport> rows;  // sorted by participant_id
  std::vector<BatchError> errors;      // sorted by file name

  bool partial_failure() const { return !errors.empty(); }
};

// Every *.jsonl file directly inside dir except event logs (*.events.jsonl).
// Bad files are reported and skipped.
inline BatchReport report_batch(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".jsonl" && p.stem().extension() != ".events") files.push_back(p);
  }
  std::sort(files.begin(), files.end());

  BatchReport out;
  for (const auto& f : files) {
    try {
      out.rows.push_back(analyze(f));
    } catch (const std::exception& e) {
      out.errors.push_back({f.filename().string(), e.what()});
    }
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const auto& a, const auto& b) { return a.participant_id < b.participant_id; });
  return out;
}

inline nlohmann::ordered_json report_to_json(const EngagementReport& r) {
  nlohmann::ordered_json j;
  j["participant_id"] = r.participant_id;
  j["turns_taken"] = r.turns_taken;
  j["elaborative_clauses"] = r.elaborative_clauses;
  j["negotiations_of_meaning"] = r.negotiations_of_meaning;
  j["backchannels"] = r.backchannels;
  return j;
}

inline nlohmann::ordered_json batch_to_json(const BatchReport& b) {
  nlohmann::ordered_json j;
  j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : b.rows) j["reports"].push_back(report_to_json(r));
  j["errors"] = nlohmann::ordered_json::array();
  for (const auto& e : b.errors) j["errors"].push_back({{"file", e.file}, {"message", e.message}});
  return j;
}

// Aligned plain-text table, one row per report.
inline std::string format_table(const std::vector<EngagementReport>& rows) {
  const std::vector<std::string> headers{"participant", "turns", "elaborative", "negotiation", "backchannel"};
  std::size_t id_width = headers[0].size();
  for (const auto& r : rows) id_width = std::max(id_width, r.participant_id.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(id_width)) << headers[0];
  for (std::size_t i = 1; i < headers.size(); ++i) out << "  " << std::right << std::setw(static_cast<int>(headers[i].size())) << headers[i];
  out << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(id_width)) << r.participant_id;
    const std::uint64_t cells[] = {r.turns_taken, r.elaborative_clauses, r.negotiations_of_meaning, r.backchannels};
    for (std::size_t i = 0; i < 4; ++i) {
      out << "  " << std::right << std::setw(static_cast<int>(headers[i + 1].size())) << cells[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace trialogue
