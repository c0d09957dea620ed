#pragma once

// Zero-shot prompt assembly for the two agents and the moderator, plus the
// lenient parser for the moderator's reply.
//
// Templates are plain UTF-8 text with {name} placeholders. Anything in braces
// that is not a lowercase identifier is copied literally; values are
// substituted in a single pass, so braces inside user text are never
// expanded.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trialogue/domain.hpp"

namespace trialogue {

class UnboundPlaceholder : public std::invalid_argument {
 public:
  explicit UnboundPlaceholder(const std::string& name)
      : std::invalid_argument("unbound placeholder {" + name + "}"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class PreconditionFailed : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<std::string_view, 11> kPlaceholderNames{
    "language",         "level",       "scene_label", "objects",     "persona_name", "persona_personality",
    "other_agent_name", "agent1_name", "agent2_name", "user_name",   "history",
};

inline bool is_known_placeholder(std::string_view name) {
  return std::find(kPlaceholderNames.begin(), kPlaceholderNames.end(), name) != kPlaceholderNames.end();
}

struct PromptTemplate {
  std::string template_id;
  std::string body;
};

namespace detail {

inline bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Calls on_text(literal) and on_name(placeholder) in order.
template <typename OnText, typename OnName>
void scan_template(std::string_view body, OnText&& on_text, OnName&& on_name) {
  std::size_t i = 0;
  std::size_t lit = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_ident_char(body[j])) ++j;
      if (j > i + 1 && j < body.size() && body[j] == '}') {
        on_text(body.substr(lit, i - lit));
        on_name(body.substr(i + 1, j - i - 1));
        i = j + 1;
        lit = i;
        continue;
      }
    }
    ++i;
  }
  on_text(body.substr(lit));
}

}  // namespace detail

inline std::set<std::string, std::less<>> placeholders_in(std::string_view body) {
  std::set<std::string, std::less<>> out;
  detail::scan_template(body, [](std::string_view) {}, [&](std::string_view n) { out.emplace(n); });
  return out;
}

// Throws TemplateError if the body references an unknown placeholder or an
// agent template omits a required one.
inline void check_template(const PromptTemplate& t) {
  const auto names = placeholders_in(t.body);
  for (const auto& n : names) {
    if (!is_known_placeholder(n)) throw TemplateError(t.template_id + " template: unbound placeholder {" + n + "}");
  }
  std::vector<std::string_view> required{"history"};
  if (t.template_id == "agent") required = {"language", "level", "scene_label", "history"};
  for (auto r : required) {
    if (!names.contains(r)) throw TemplateError(t.template_id + " template must use {" + std::string(r) + "}");
  }
}

struct PromptValues {
  std::vector<std::pair<std::string, std::string>> values;

  void set(std::string name, std::string value) { values.emplace_back(std::move(name), std::move(value)); }
  const std::string* find(std::string_view name) const {
    for (const auto& [k, v] : values) {
      if (k == name) return &v;
    }
    return nullptr;
  }
};

inline std::string render_template(const PromptTemplate& t, const PromptValues& vals) {
  std::string out;
  out.reserve(t.body.size() * 2);
  detail::scan_template(
      t.body, [&](std::string_view s) { out.append(s); },
      [&](std::string_view name) {
        const auto* v = is_known_placeholder(name) ? vals.find(name) : nullptr;
        if (!v) throw UnboundPlaceholder(std::string(name));
        out.append(*v);
      });
  return out;
}

// ---------------------------------------------------------------------------
// Built-in templates. templates/agent.txt and templates/moderator.txt ship
// the same text for operators to edit.

inline const PromptTemplate& builtin_agent_template() {
  static const PromptTemplate t{"agent", R"(You are {persona_name}, one of two conversation partners chatting with a {language} learner named {user_name}. The other partner is {other_agent_name}.
Your personality: {persona_personality}

Setting: the three of you are together in a {scene_label}. Things around you: {objects}.

Rules:
- Respond only in {language}. Use vocabulary and grammar appropriate to a {level} learner.
- Keep each reply to one to three short sentences so the conversation keeps moving.
- Engage {other_agent_name} and {user_name} equally: direct questions to each of them by name and never let one person dominate.
- Keep the conversation connected to the {scene_label} and the things around you. Related topics are welcome, but steer back if the talk drifts far away.
- If the conversation so far is empty, open the conversation by greeting {user_name} by name and asking a question about the {scene_label}.
- Reply with your spoken words only: no speaker name, no stage directions, no translations.

Conversation so far (oldest first):
{history}

Your next line as {persona_name}:
)"};
  return t;
}

inline const PromptTemplate& builtin_moderator_template() {
  static const PromptTemplate t{"moderator", R"(You moderate a {language} practice conversation in a {scene_label} between a learner named {user_name} and two conversation partners.
Agent 1 is {agent1_name}.
Agent 2 is {agent2_name}.

The learner has just spoken. Read the conversation so far and decide which partner should respond next: the partner the learner addressed, or otherwise the one best placed to continue the conversation naturally.

Conversation so far (oldest first):
{history}

Answer with exactly one character: 1 for {agent1_name} or 2 for {agent2_name}. Output nothing else.
)"};
  return t;
}

struct PromptTemplates {
  PromptTemplate agent = builtin_agent_template();
  PromptTemplate moderator = builtin_moderator_template();
};

inline PromptTemplate load_template_file(const std::filesystem::path& path, std::string template_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError("cannot open template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  PromptTemplate t{std::move(template_id), ss.str()};
  check_template(t);
  return t;
}

// Loads <dir>/agent.txt and <dir>/moderator.txt.
inline PromptTemplates load_templates(const std::filesystem::path& dir) {
  return PromptTemplates{load_template_file(dir / "agent.txt", "agent"),
                         load_template_file(dir / "moderator.txt", "moderator")};
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string speaker_display_name(const SessionConfig& cfg, const SpeakerId& who) {
  if (who.is_user()) return cfg.user_display_name;
  return cfg.persona(*who.agent_id()).display_name;
}

// One "Name: text" line per utterance, newest last.
inline std::string render_history(const SessionConfig& cfg, const ConversationHistory& h) {
  if (h.empty()) return "(nobody has spoken yet)";
  std::string out;
  for (const auto& u : h.entries()) {
    if (!out.empty()) out += '\n';
    out += speaker_display_name(cfg, u.speaker);
    out += ": ";
    out += u.text;
  }
  return out;
}

inline std::string render_objects(const std::vector<std::string>& objects) {
  if (objects.empty()) return "(nothing in particular)";
  std::string out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i) out += ", ";
    out += objects[i];
  }
  return out;
}

inline PromptValues common_values(const SessionConfig& cfg, const ConversationHistory& history) {
  PromptValues v;
  v.set("language", std::string(language_name(cfg.language).value_or(cfg.language.code)));
  v.set("level", std::string(to_string(cfg.level)));
  v.set("scene_label", cfg.scene.scene_label);
  v.set("objects", render_objects(cfg.scene.objects));
  v.set("user_name", cfg.user_display_name);
  v.set("agent1_name", cfg.persona(AgentId::first).display_name);
  v.set("agent2_name", cfg.persona(AgentId::second).display_name);
  v.set("history", render_history(cfg, history));
  return v;
}

inline std::string build_agent_prompt(const SessionConfig& cfg, const AgentPersona& persona,
                                      const ConversationHistory& history,
                                      const PromptTemplate& tmpl = builtin_agent_template()) {
  auto v = common_values(cfg, history);
  v.set("persona_name", persona.display_name);
  v.set("persona_personality", persona.personality);
  const auto self = agent_from_int(persona.agent_id).value_or(AgentId::first);
  v.set("other_agent_name", cfg.persona(other(self)).display_name);
  return render_template(tmpl, v);
}

// Requires the last utterance to be the learner's.
inline std::string build_moderator_prompt(const SessionConfig& cfg, const ConversationHistory& history,
                                          const PromptTemplate& tmpl = builtin_moderator_template()) {
  if (history.empty()) throw PreconditionFailed("moderator prompt needs a non-empty history");
  if (!history.back().speaker.is_user()) throw PreconditionFailed("moderator prompt needs a final user utterance");
  return render_template(tmpl, common_values(cfg, history));
}

// ---------------------------------------------------------------------------
// Moderator output

struct ModeratorDecision {
  AgentId chosen_agent = AgentId::first;
  std::string raw_output;
  bool fallback = false;
};

// First '1' or '2' character wins. Otherwise the agent who spoke least
// recently: the one that is not last_agent_speaker, or agent 1 when no agent
// has spoken.
inline ModeratorDecision parse_moderator_output(std::string_view raw, std::optional<AgentId> last_agent_speaker) {
  ModeratorDecision out;
  out.raw_output = std::string(raw);
  const auto pos = raw.find_first_of("12");
  if (pos != std::string_view::npos) {
    out.chosen_agent = raw[pos] == '1' ? AgentId::first : AgentId::second;
    return out;
  }
  out.fallback = true;
  out.chosen_agent = last_agent_speaker ? other(*last_agent_speaker) : AgentId::first;
  return out;
}

}  // namespace trialogue
