#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "trialogue/transcript.hpp"

namespace trialogue {
namespace {

TEST(Transcript, FieldOrderAndNames) {
  Utterance u;
  u.seq = 0;
  u.speaker = SpeakerId::agent(AgentId::first);
  u.text = "Hola";
  u.started_at_ms = 5;
  u.ended_at_ms = 305;
  EXPECT_EQ(encode_utterance(u),
            R"({"seq":0,"speaker":"agent:1","text":"Hola","audio_ref":null,"started_at_ms":5,"ended_at_ms":305,"annotations":[]})");
  u.audio_ref = "abc.mp3";
  u.annotations = {AnnotationTag::backchannel, AnnotationTag::elaborative_clause};
  EXPECT_EQ(encode_utterance(u),
            R"({"seq":0,"speaker":"agent:1","text":"Hola","audio_ref":"abc.mp3","started_at_ms":5,"ended_at_ms":305,"annotations":["backchannel","elaborative_clause"]})");
}

TEST(Transcript, RoundTripRandomHistories) {
  testing::Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto h = testing::random_history(rng);
    const auto text = encode_transcript(h);
    const auto back = decode_transcript(text);
    EXPECT_EQ(back, h);
    EXPECT_EQ(encode_transcript(back), text);
  }
}

TEST(Transcript, EmptyTranscriptIsEmptyHistory) {
  EXPECT_TRUE(decode_transcript(std::string_view{}).empty());
  EXPECT_TRUE(decode_transcript("\n  \n").empty());
}

TEST(Transcript, ParseErrorCarriesLineNumber) {
  const std::string text =
      R"({"seq":0,"speaker":"user","text":"a","audio_ref":null,"started_at_ms":0,"ended_at_ms":0,"annotations":[]})"
      "\n\n"
      R"({"seq":1,"speaker":"robot","text":"b","audio_ref":null,"started_at_ms":0,"ended_at_ms":0,"annotations":[]})"
      "\n";
  try {
    (void)decode_transcript(text);
    FAIL() << "expected TranscriptParseError";
  } catch (const TranscriptParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Transcript, RejectsBrokenInvariants) {
  const auto line = [](int seq, const char* speaker, const char* extra = "") {
    return std::string(R"({"seq":)") + std::to_string(seq) + R"(,"speaker":")" + speaker +
           R"(","text":"x","audio_ref":null,"started_at_ms":0,"ended_at_ms":0,"annotations":[)" + extra + "]}\n";
  };
  EXPECT_THROW((void)decode_transcript(line(1, "user")), TranscriptParseError);
  EXPECT_THROW((void)decode_transcript(line(0, "agent:3")), TranscriptParseError);
  EXPECT_THROW((void)decode_transcript(line(0, "user", R"("sarcasm")")), TranscriptParseError);
  EXPECT_THROW((void)decode_transcript("{not json}\n"), TranscriptParseError);
  EXPECT_THROW((void)decode_transcript(R"({"seq":0,"speaker":"user"})" "\n"), TranscriptParseError);
  EXPECT_NO_THROW((void)decode_transcript(line(0, "user") + line(1, "agent:2", R"("backchannel")")));
}

TEST(Transcript, TrailingWhitespaceTolerated) {
  const std::string text =
      R"({"seq":0,"speaker":"user","text":"a","audio_ref":null,"started_at_ms":0,"ended_at_ms":0,"annotations":[]})"
      "   \r\n";
  EXPECT_EQ(decode_transcript(text).size(), 1u);
}

}  // namespace
}  // namespace trialogue
