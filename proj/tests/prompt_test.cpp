#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support/generators.hpp"
#include "trialogue/prompt.hpp"

namespace trialogue {
namespace {

SessionConfig library_config() {
  SessionConfig cfg;
  cfg.scene.scene_label = "university library";
  cfg.scene.objects = {"bookshelf", "novel", "desk"};
  return cfg;
}

ConversationHistory three_lines() {
  ConversationHistory h;
  const SpeakerId who[] = {SpeakerId::agent(AgentId::first), SpeakerId::user(), SpeakerId::agent(AgentId::second)};
  const char* text[] = {"¡Hola! ¿Qué libro lees?", "Leo una novela.", "¡Qué bien! ¿De quién?"};
  for (std::uint64_t i = 0; i < 3; ++i) {
    Utterance u;
    u.seq = i;
    u.speaker = who[i];
    u.text = text[i];
    u.started_at_ms = static_cast<std::int64_t>(i) * 1000;
    u.ended_at_ms = u.started_at_ms;
    h = append_utterance(std::move(h), u);
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(AgentPrompt, EmptyHistoryAsksForGreetingWithoutExampleTurns) {
  const auto cfg = library_config();
  const auto p = build_agent_prompt(cfg, cfg.persona(AgentId::first), {});
  EXPECT_NE(p.find("Spanish"), std::string::npos);
  EXPECT_NE(p.find("intermediate"), std::string::npos);
  EXPECT_NE(p.find("library"), std::string::npos);
  EXPECT_NE(p.find("greet"), std::string::npos);
  EXPECT_NE(p.find("(nobody has spoken yet)"), std::string::npos);
  // Zero-shot: no rendered "Name: text" dialogue lines.
  EXPECT_EQ(p.find("Marta: "), std::string::npos);
  EXPECT_EQ(p.find("Omar: "), std::string::npos);
  EXPECT_EQ(p.find("Learner: "), std::string::npos);
}

TEST(AgentPrompt, HistoryRenderedInOrderWithDisplayNames) {
  const auto cfg = library_config();
  const auto p = build_agent_prompt(cfg, cfg.persona(AgentId::second), three_lines());
  const auto a = p.find("Marta: ¡Hola! ¿Qué libro lees?");
  const auto b = p.find("Learner: Leo una novela.");
  const auto c = p.find("Omar: ¡Qué bien! ¿De quién?");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  ASSERT_NE(c, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
}

TEST(AgentPrompt, GuardrailsAndEqualEngagement) {
  const auto cfg = library_config();
  const auto p = build_agent_prompt(cfg, cfg.persona(AgentId::first), {});
  EXPECT_NE(p.find("You are Marta"), std::string::npos);
  EXPECT_NE(p.find("Omar"), std::string::npos);
  EXPECT_NE(p.find("only in Spanish"), std::string::npos);
  for (const auto& obj : cfg.scene.objects) EXPECT_NE(p.find(obj), std::string::npos) << obj;
}

TEST(AgentPrompt, Deterministic) {
  testing::Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto cfg = testing::random_config(rng);
    const auto h = testing::random_history(rng, 10);
    EXPECT_EQ(build_agent_prompt(cfg, cfg.persona(AgentId::first), h),
              build_agent_prompt(cfg, cfg.persona(AgentId::first), h));
  }
}

TEST(AgentPrompt, UnknownPlaceholderThrows) {
  const auto cfg = library_config();
  const PromptTemplate t{"agent", "Talk about {weather} in {language}."};
  try {
    (void)build_agent_prompt(cfg, cfg.persona(AgentId::first), {}, t);
    FAIL() << "expected UnboundPlaceholder";
  } catch (const UnboundPlaceholder& e) {
    EXPECT_EQ(e.name(), "weather");
  }
}

TEST(AgentPrompt, HistoryTextIsNotReexpanded) {
  auto cfg = library_config();
  Utterance u;
  u.text = "I said {weather} and {language}";
  const auto h = append_utterance({}, u);
  const auto p = build_agent_prompt(cfg, cfg.persona(AgentId::first), h);
  EXPECT_NE(p.find("Learner: I said {weather} and {language}"), std::string::npos);
}

TEST(Template, NonIdentifierBracesAreLiteral) {
  const PromptTemplate t{"moderator", "JSON like {\"a\": 1} or {} or {Upper} stays; {history}"};
  EXPECT_EQ(placeholders_in(t.body), (std::set<std::string, std::less<>>{"history"}));
  PromptValues v;
  v.set("history", "H");
  EXPECT_EQ(render_template(t, v), "JSON like {\"a\": 1} or {} or {Upper} stays; H");
}

TEST(Template, CheckRequiresAgentPlaceholders) {
  EXPECT_THROW(check_template({"agent", "{language} {level} {history}"}), TemplateError);
  EXPECT_THROW(check_template({"agent", "{language} {level} {scene_label} {history} {weather}"}), TemplateError);
  EXPECT_NO_THROW(check_template({"agent", "{language} {level} {scene_label} {history}"}));
  EXPECT_THROW(check_template({"moderator", "pick one"}), TemplateError);
  EXPECT_NO_THROW(check_template(builtin_agent_template()));
  EXPECT_NO_THROW(check_template(builtin_moderator_template()));
}

TEST(Template, ShippedFilesMatchBuiltins) {
  const std::string dir = std::string(TRIALOGUE_SOURCE_DIR) + "/templates";
  EXPECT_EQ(read_file(dir + "/agent.txt"), builtin_agent_template().body);
  EXPECT_EQ(read_file(dir + "/moderator.txt"), builtin_moderator_template().body);
  const auto loaded = load_templates(dir);
  EXPECT_EQ(loaded.agent.body, builtin_agent_template().body);
}

TEST(Template, LoadRejectsMissingFile) {
  EXPECT_THROW(load_template_file("/nonexistent/agent.txt", "agent"), TemplateError);
}

TEST(ModeratorPrompt, EmbedsBothNamesAndFinalUserLine) {
  const auto cfg = library_config();
  auto h = three_lines();
  Utterance u;
  u.seq = 3;
  u.text = "Marta, ¿cuál es tu libro favorito?";
  u.started_at_ms = 5000;
  u.ended_at_ms = 6000;
  h = append_utterance(h, u);
  const auto p = build_moderator_prompt(cfg, h);
  EXPECT_NE(p.find("Marta"), std::string::npos);
  EXPECT_NE(p.find("Omar"), std::string::npos);
  EXPECT_NE(p.find("Learner: Marta, ¿cuál es tu libro favorito?"), std::string::npos);
  EXPECT_NE(p.find("exactly one character"), std::string::npos);
}

TEST(ModeratorPrompt, Preconditions) {
  const auto cfg = library_config();
  EXPECT_THROW((void)build_moderator_prompt(cfg, {}), PreconditionFailed);
  EXPECT_THROW((void)build_moderator_prompt(cfg, three_lines()), PreconditionFailed);
}

TEST(ModeratorParse, DirectAndEmbeddedDigits) {
  EXPECT_EQ(parse_moderator_output("1", std::nullopt).chosen_agent, AgentId::first);
  EXPECT_EQ(parse_moderator_output("Agent 2 should respond.", AgentId::second).chosen_agent, AgentId::second);
  EXPECT_EQ(parse_moderator_output("  2\n", std::nullopt).chosen_agent, AgentId::second);
  EXPECT_EQ(parse_moderator_output("agent 21", std::nullopt).chosen_agent, AgentId::second);
  EXPECT_EQ(parse_moderator_output("3 then 1", std::nullopt).chosen_agent, AgentId::first);
  EXPECT_FALSE(parse_moderator_output("1", std::nullopt).fallback);
}

TEST(ModeratorParse, FallbackIsRoundRobin) {
  const auto d = parse_moderator_output("neither", AgentId::first);
  EXPECT_EQ(d.chosen_agent, AgentId::second);
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.raw_output, "neither");
  EXPECT_EQ(parse_moderator_output("", AgentId::second).chosen_agent, AgentId::first);
  EXPECT_EQ(parse_moderator_output("zero", std::nullopt).chosen_agent, AgentId::first);
}

// Oracle: scan bytes for the first '1' or '2' independently of the parser.
TEST(ModeratorParse, ExhaustiveTemplatedOutputs) {
  const std::vector<std::string> prefixes{"", "Agent ", "I pick ", "The best is agent ", "Respuesta: ", "#", "(", "0"};
  const std::vector<std::string> suffixes{"", ".", " should respond", "!\n", " because 1", "2"};
  for (const auto& p : prefixes) {
    for (const auto& s : suffixes) {
      for (char d : {'1', '2'}) {
        const auto raw = p + d + s;
        char expect = 0;
        for (char c : raw) {
          if (c == '1' || c == '2') {
            expect = c;
            break;
          }
        }
        const auto got = parse_moderator_output(raw, AgentId::first);
        EXPECT_EQ(to_int(got.chosen_agent), expect - '0') << raw;
        EXPECT_FALSE(got.fallback);
      }
    }
  }
}

}  // namespace
}  // namespace trialogue
