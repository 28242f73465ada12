#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skillmind/chat_backend.hpp"
#include "skillmind/corpus.hpp"
#include "skillmind/errors.hpp"
#include "skillmind/taxonomy.hpp"

namespace skillmind {

/// Separator between the generated explanation and the skill list.
inline constexpr std::string_view kResultSkillToken = "[RESULT SKILL]";

struct SomResult {
  std::string explanation;
  std::vector<SkillMatch> skills;  // non-empty, unique keys, order-preserving

  bool operator==(const SomResult&) const = default;
};

struct MissingSeparatorError : Error {
  MissingSeparatorError() : Error("missing_separator", "output contains no [RESULT SKILL] token") {}
};

struct EmptyExplanationError : Error {
  EmptyExplanationError() : Error("empty_explanation", "no explanation before [RESULT SKILL]") {}
};

struct EmptySkillListError : Error {
  EmptySkillListError() : Error("empty_skill_list", "no skills after [RESULT SKILL]") {}
};

// ---------------------------------------------------------------------------
// Transcript rendering
// ---------------------------------------------------------------------------

inline std::string render_turn_line(const Turn& turn) {
  std::string line = turn.speaker + ": ";
  if (turn.shared_image) {
    line += "[Sharing Image] " + *turn.shared_image;
    if (!turn.text.empty()) line += " " + turn.text;
  } else {
    line += turn.text;
  }
  return line;
}

inline std::string render_transcript(const std::vector<Turn>& turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += render_turn_line(turns[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output format
// ---------------------------------------------------------------------------

/// Splits on the first [RESULT SKILL]; the left side is the explanation, the
/// right side a comma-separated skill list resolved through the taxonomy and
/// de-duplicated by key.
inline SomResult parse_som_output(const std::string& text, const Taxonomy& taxonomy) {
  std::size_t sep = text.find(kResultSkillToken);
  if (sep == std::string::npos) throw MissingSeparatorError{};
  SomResult result;
  result.explanation = trim_copy(std::string_view(text).substr(0, sep));
  if (result.explanation.empty()) throw EmptyExplanationError{};
  std::string_view rest = std::string_view(text).substr(sep + kResultSkillToken.size());
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    std::size_t comma = rest.find(',', pos);
    std::string_view fragment =
        comma == std::string_view::npos ? rest.substr(pos) : rest.substr(pos, comma - pos);
    std::string name = trim_copy(fragment);
    if (!name.empty() && !normalize_name(name).empty()) {
      SkillMatch match = resolve(taxonomy, name);
      bool seen = false;
      for (const SkillMatch& existing : result.skills) {
        if (existing.skill.key == match.skill.key) seen = true;
      }
      if (!seen) result.skills.push_back(std::move(match));
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (result.skills.empty()) throw EmptySkillListError{};
  return result;
}

inline std::string format_som_output(const SomResult& result) {
  std::string out = result.explanation + " " + std::string(kResultSkillToken) + " ";
  for (std::size_t i = 0; i < result.skills.size(); ++i) {
    if (i > 0) out += ", ";
    out += result.skills[i].skill.canonical_name;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

/// Planner input in the training-record format: rendered social context, a
/// blank line, then the transcript. Dialogues without social context carry
/// the transcript alone.
inline std::string build_planner_input(const std::optional<std::string>& social_context_text,
                                       const std::vector<Turn>& context) {
  std::string transcript = render_transcript(context);
  if (social_context_text && !social_context_text->empty()) {
    return *social_context_text + "\n\n" + transcript;
  }
  return transcript;
}

inline constexpr std::string_view kFormatReminder =
    "Format reminder: reply with your explanation, then the literal token [RESULT SKILL], then "
    "the conversational skill name(s) separated by commas.";

/// Runs the planner and parses its output. A missing separator earns exactly
/// one repair retry with a format reminder appended; at most two planner
/// calls are ever made.
inline SomResult infer_som(ChatBackend& planner,
                           const std::optional<std::string>& social_context_text,
                           const std::vector<Turn>& context, const Taxonomy& taxonomy) {
  if (context.empty()) throw Error("empty_dialogue", "inference requires at least one turn");
  std::vector<ChatMessage> messages{
      ChatMessage{"user", build_planner_input(social_context_text, context)}};
  std::string output = planner.complete(messages);
  try {
    return parse_som_output(output, taxonomy);
  } catch (const MissingSeparatorError&) {
    messages.push_back(ChatMessage{"assistant", output});
    messages.push_back(ChatMessage{"user", std::string(kFormatReminder)});
    return parse_som_output(planner.complete(messages), taxonomy);
  }
}

inline SomResult infer_som(const BackendConfig& planner,
                           const std::optional<std::string>& social_context_text,
                           const std::vector<Turn>& context, const Taxonomy& taxonomy) {
  HttpChatBackend backend(planner);
  return infer_som(backend, social_context_text, context, taxonomy);
}

// ---------------------------------------------------------------------------
// Guidance injection
// ---------------------------------------------------------------------------

struct GuidanceConfig {
  std::string guidance_template =
      "You are a conversational agent. Before replying, consider this analysis: {explanation} "
      "Respond using the following conversational skill(s): {skills}.";
  bool include_explanation = true;
  std::string baseline_system = "You are a conversational agent.";
  std::optional<BackendConfig> planner;  // absent: baseline arm, no skill guidance
  BackendConfig responder;
};

inline std::string joined_skill_names(const std::vector<SkillMatch>& skills) {
  std::string out;
  for (std::size_t i = 0; i < skills.size(); ++i) {
    if (i > 0) out += ", ";
    out += skills[i].skill.canonical_name;
  }
  return out;
}

/// Transcript plus a trailing cue naming the speaker expected to reply.
inline std::string build_responder_user_message(const std::vector<Turn>& context) {
  std::string next_speaker;
  if (!context.empty()) {
    const std::string& last = context.back().speaker;
    for (auto it = context.rbegin(); it != context.rend(); ++it) {
      if (it->speaker != last) {
        next_speaker = it->speaker;
        break;
      }
    }
    if (next_speaker.empty()) next_speaker = last == "Speaker B" ? "Speaker A" : "Speaker B";
  }
  return render_transcript(context) + "\n" + next_speaker + ":";
}

/// [system, user] for the guided arm. The user message is byte-identical to
/// the baseline arm's; only the system message carries the guidance.
inline std::vector<ChatMessage> augment_prompt(const std::vector<Turn>& context,
                                               const SomResult& som, const GuidanceConfig& cfg) {
  std::string system = cfg.guidance_template;
  auto substitute = [&system](std::string_view token, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = system.find(token, pos)) != std::string::npos) {
      system.replace(pos, token.size(), value);
      pos += value.size();
    }
  };
  substitute("{explanation}", cfg.include_explanation ? som.explanation : std::string{});
  substitute("{skills}", joined_skill_names(som.skills));
  return {ChatMessage{"system", system},
          ChatMessage{"user", build_responder_user_message(context)}};
}

inline std::vector<ChatMessage> baseline_prompt(const std::vector<Turn>& context,
                                                const GuidanceConfig& cfg) {
  return {ChatMessage{"system", cfg.baseline_system},
          ChatMessage{"user", build_responder_user_message(context)}};
}

struct GuidedResponse {
  std::optional<SomResult> som;  // absent for the baseline arm
  std::string response;
};

/// Plan-then-respond: run the planner, inject its output into the responder
/// prompt, return both artifacts. With no planner configured, the responder
/// sees the un-augmented baseline prompt.
inline GuidedResponse guided_respond(const GuidanceConfig& cfg, ChatBackend* planner,
                                     ChatBackend& responder,
                                     const std::optional<std::string>& social_context_text,
                                     const std::vector<Turn>& context, const Taxonomy& taxonomy) {
  if (context.empty()) throw Error("empty_dialogue", "guided_respond requires at least one turn");
  GuidedResponse result;
  std::vector<ChatMessage> prompt;
  if (planner != nullptr) {
    result.som = infer_som(*planner, social_context_text, context, taxonomy);
    prompt = augment_prompt(context, *result.som, cfg);
  } else {
    prompt = baseline_prompt(context, cfg);
  }
  result.response = responder.complete(prompt);
  return result;
}

inline GuidedResponse guided_respond(const GuidanceConfig& cfg,
                                     const std::optional<std::string>& social_context_text,
                                     const std::vector<Turn>& context, const Taxonomy& taxonomy) {
  std::optional<HttpChatBackend> planner;
  if (cfg.planner) planner.emplace(*cfg.planner);
  HttpChatBackend responder(cfg.responder);
  return guided_respond(cfg, planner ? &*planner : nullptr, responder, social_context_text,
                        context, taxonomy);
}

inline nlohmann::json som_result_to_json(const SomResult& som) {
  nlohmann::json j;
  j["explanation"] = som.explanation;
  nlohmann::json skills = nlohmann::json::array();
  for (const SkillMatch& match : som.skills) {
    nlohmann::json s;
    s["skill"] = match.skill.canonical_name;
    s["skill_resolution"] = std::string(resolution_tag(match.resolution));
    s["category"] = match.skill.category
                        ? nlohmann::json(std::string(category_display_name(*match.skill.category)))
                        : nlohmann::json(nullptr);
    skills.push_back(std::move(s));
  }
  j["skills"] = std::move(skills);
  return j;
}

}  // namespace skillmind
