#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "trialogue/domain.hpp"

namespace trialogue {

inline nlohmann::ordered_json scene_to_json(const SceneContext& s) {
  nlohmann::ordered_json j;
  j["scene_label"] = s.scene_label;
  j["objects"] = s.objects;
  j["detection_delay_ms"] = s.detection_delay_ms;
  return j;
}

inline nlohmann::ordered_json config_to_json(const SessionConfig& cfg) {
  nlohmann::ordered_json j;
  j["language"] = cfg.language.code;
  j["level"] = std::string{to_string(cfg.level)};
  j["user_name"] = cfg.user_display_name;
  j["opening_agent"] = to_int(cfg.opening_agent);
  auto personas = nlohmann::ordered_json::array();
  for (const auto& p : cfg.personas) {
    nlohmann::ordered_json pj;
    pj["agent_id"] = p.agent_id;
    pj["display_name"] = p.display_name;
    pj["personality"] = p.personality;
    pj["voice_id"] = p.voice_id;
    personas.push_back(std::move(pj));
  }
  j["personas"] = std::move(personas);
  j["scene"] = scene_to_json(cfg.scene);
  j["timing"] = {{"gap_ms", cfg.timing.gap_ms}, {"max_user_speech_ms", cfg.timing.max_user_speech_ms}};
  return j;
}

namespace detail {

template <typename T, typename Json>
T get_as(const Json& j, const char* field) {
  try {
    return j.template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace detail

// Overlays the fields present in j onto `base`. Type errors throw
// std::invalid_argument; invariant checks are left to validate_config.
template <typename Json>
SessionConfig config_from_json(const Json& j, SessionConfig base = {}) {
  using detail::get_as;
  if (!j.is_object()) throw std::invalid_argument("session config must be a JSON object");

  if (j.contains("language")) base.language.code = get_as<std::string>(j["language"], "language");
  if (j.contains("level")) {
    auto s = get_as<std::string>(j["level"], "level");
    auto lvl = parse_level(s);
    if (!lvl) throw std::invalid_argument("level must be beginner, intermediate or advanced");
    base.level = *lvl;
  }
  if (j.contains("user_name")) base.user_display_name = get_as<std::string>(j["user_name"], "user_name");
  if (j.contains("opening_agent")) {
    auto a = agent_from_int(get_as<int>(j["opening_agent"], "opening_agent"));
    if (!a) throw std::invalid_argument("opening_agent must be 1 or 2");
    base.opening_agent = *a;
  }
  if (j.contains("personas")) {
    const auto& ps = j["personas"];
    if (!ps.is_array() || ps.size() != 2) throw std::invalid_argument("personas must be an array of two entries");
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& pj = ps[i];
      if (!pj.is_object()) throw std::invalid_argument("personas entries must be objects");
      auto& p = base.personas[i];
      if (pj.contains("agent_id")) p.agent_id = get_as<int>(pj["agent_id"], "agent_id");
      if (pj.contains("display_name")) p.display_name = get_as<std::string>(pj["display_name"], "display_name");
      if (pj.contains("personality")) p.personality = get_as<std::string>(pj["personality"], "personality");
      if (pj.contains("voice_id")) p.voice_id = get_as<std::string>(pj["voice_id"], "voice_id");
    }
  }
  if (j.contains("scene")) {
    const auto& sj = j["scene"];
    if (!sj.is_object()) throw std::invalid_argument("scene must be an object");
    if (sj.contains("scene_label")) base.scene.scene_label = get_as<std::string>(sj["scene_label"], "scene_label");
    if (sj.contains("objects")) base.scene.objects = get_as<std::vector<std::string>>(sj["objects"], "objects");
    if (sj.contains("detection_delay_ms"))
      base.scene.detection_delay_ms = get_as<std::int64_t>(sj["detection_delay_ms"], "detection_delay_ms");
  }
  if (j.contains("timing")) {
    const auto& tj = j["timing"];
    if (!tj.is_object()) throw std::invalid_argument("timing must be an object");
    if (tj.contains("gap_ms")) base.timing.gap_ms = get_as<std::int64_t>(tj["gap_ms"], "gap_ms");
    if (tj.contains("max_user_speech_ms"))
      base.timing.max_user_speech_ms = get_as<std::int64_t>(tj["max_user_speech_ms"], "max_user_speech_ms");
  }
  return base;
}

}  // namespace trialogue
