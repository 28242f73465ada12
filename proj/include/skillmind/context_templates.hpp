#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillmind/corpus.hpp"
#include "skillmind/errors.hpp"
#include "skillmind/rng.hpp"

namespace skillmind {

struct MissingBindingError : Error {
  std::string name;
  explicit MissingBindingError(std::string name_)
      : Error("missing_binding", "no binding for placeholder {" + name_ + "}"),
        name(std::move(name_)) {}
};

struct IndexOutOfRangeError : Error {
  explicit IndexOutOfRangeError(std::size_t index, std::size_t count)
      : Error("index_out_of_range", "variant index " + std::to_string(index) + " out of range [0, " +
                                        std::to_string(count) + ")") {}
};

/// Placeholder names in appearance order, without duplicates. Tokens are
/// "{name}" spans; no template uses literal braces.
inline std::vector<std::string> scan_placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    std::size_t close = text.find('}', open + 1);
    if (close == std::string_view::npos) break;
    std::string name(text.substr(open + 1, close - open - 1));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    pos = close + 1;
  }
  return out;
}

struct TemplateVariant {
  std::string group;  // "" for sets without labeled alternates
  std::string text;
  std::vector<std::string> placeholders;
};

struct RenderedContext {
  SourceKind source = SourceKind::other;
  std::size_t variant_index = 0;
  std::string text;
};

class TemplateSet {
 public:
  TemplateSet() = default;

  static TemplateSet make(SourceKind source, std::vector<std::pair<std::string, std::string>> grouped_variants,
                          bool passthrough = false) {
    TemplateSet set;
    set.source_ = source;
    set.passthrough_ = passthrough;
    for (auto& [group, text] : grouped_variants) {
      TemplateVariant v;
      v.group = std::move(group);
      v.placeholders = scan_placeholders(text);
      v.text = std::move(text);
      set.variants_.push_back(std::move(v));
    }
    return set;
  }

  SourceKind source() const { return source_; }
  bool passthrough() const { return passthrough_; }
  const std::vector<TemplateVariant>& variants() const { return variants_; }
  std::size_t variant_count() const { return variants_.size(); }

  const TemplateVariant& variant(std::size_t index) const {
    if (index >= variants_.size()) throw IndexOutOfRangeError(index, variants_.size());
    return variants_[index];
  }

  std::vector<std::string> group_labels() const {
    std::vector<std::string> labels;
    for (const TemplateVariant& v : variants_) {
      if (std::find(labels.begin(), labels.end(), v.group) == labels.end()) {
        labels.push_back(v.group);
      }
    }
    return labels;
  }

  // Flat indices belonging to one labeled group, in order.
  std::vector<std::size_t> group_indices(std::string_view label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < variants_.size(); ++i) {
      if (variants_[i].group == label) idx.push_back(i);
    }
    return idx;
  }

 private:
  SourceKind source_ = SourceKind::other;
  bool passthrough_ = false;
  std::vector<TemplateVariant> variants_;
};

using Bindings = std::map<std::string, std::string>;

/// Substitutes every "{name}" token from the bindings, leaving all other
/// bytes untouched. Single pass: substituted values are not re-scanned.
inline RenderedContext render(const TemplateSet& set, std::size_t variant_index,
                              const Bindings& bindings) {
  const TemplateVariant& v = set.variant(variant_index);
  const std::string& tpl = v.text;
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    std::size_t open = tpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    std::size_t close = tpl.find('}', open + 1);
    if (close == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    out.append(tpl, pos, open - pos);
    std::string name = tpl.substr(open + 1, close - open - 1);
    auto it = bindings.find(name);
    if (it == bindings.end()) throw MissingBindingError(name);
    out.append(it->second);
    pos = close + 1;
  }
  return RenderedContext{set.source(), variant_index, std::move(out)};
}

/// Uniform draw over flat variant indices; deterministic per (seed, source).
inline std::size_t sample_variant(const TemplateSet& set, std::uint64_t seed) {
  if (set.variant_count() == 0) throw Error("empty_template_set", "template set has no variants");
  rng::Engine engine(seed, source_tag(set.source()));
  return static_cast<std::size_t>(engine.below(set.variant_count()));
}

/// Uniform draw restricted to one labeled group; returns a flat index.
inline std::size_t sample_variant_in_group(const TemplateSet& set, std::string_view group,
                                           std::uint64_t seed) {
  std::vector<std::size_t> idx = set.group_indices(group);
  if (idx.empty()) throw Error("unknown_group", "no variants in group: " + std::string(group));
  rng::Engine engine(seed, std::string(source_tag(set.source())) + "/" + std::string(group));
  return idx[static_cast<std::size_t>(engine.below(idx.size()))];
}

namespace detail {

inline std::map<SourceKind, TemplateSet> make_builtin_registry() {
  std::map<SourceKind, TemplateSet> registry;
  auto put = [&](SourceKind source, std::vector<std::pair<std::string, std::string>> variants) {
    registry.emplace(source, TemplateSet::make(source, std::move(variants)));
  };

  put(SourceKind::prosocial,
      {{"", "Speaker B should foster prosocial behavior by providing constructive feedback based "
            "on these Rule-of-Thumbs:\n- {rots}"},
       {"", "Speaker B should encourage prosocial behavior by giving constructive feedback based "
            "on these Rule-of-Thumbs:\n- {rots}"},
       {"", "To promote positive behavior, Speaker B should offer constructive feedback following "
            "these Rule-of-Thumbs:\n- {rots}"},
       {"", "Guided by these Rule-of-Thumbs, Speaker B should encourage prosocial behavior "
            "through constructive feedback:\n- {rots}"},
       {"", "Speaker B is expected to provide constructive feedback to encourage positive "
            "interactions, using these Rule-of-Thumbs:\n- {rots}"}});

  put(SourceKind::stark,
      {{"first", "{name} is {age} years old, born in {birthplace}, and currently lives in "
                 "{residence}. {event}"},
       {"first", "{name}, aged {age}, was born in {birthplace} and resides in {residence}. "
                 "{event}"},
       {"first", "{name}, who is {age}, was born in {birthplace} and now lives in {residence}. "
                 "{event}"},
       {"first", "{name} is {age}, originally from {birthplace}, and now living in {residence}. "
                 "{event}"},
       {"first", "{name} is {age} years old, born in {birthplace}, and resides in {residence}. "
                 "{event}"},
       {"nth", "{name} is {age} years old, born in {birthplace}, and currently lives in "
               "{residence}. After {time_interval}, {name} has gone through {experience}, and now "
               "{event}"},
       {"nth", "{name}, aged {age}, was born in {birthplace} and now resides in {residence}. "
               "Following {time_interval}, {name} experienced {experience}, and {event}"},
       {"nth", "{name}, who is {age} years old, originally from {birthplace} and living in "
               "{residence}, went through {experience} after {time_interval}, and now {event}"},
       {"nth", "{name} is {age}, born in {birthplace}, and currently resides in {residence}. "
               "After {time_interval} of {experience}, {name} has now {event}"},
       {"nth", "{name}, {age} years old, from {birthplace} and residing in {residence}, has "
               "experienced {experience} over {time_interval}, and as a result, {event}"}});

  put(SourceKind::cactus,
      {{"", "Client's attitude is {client attitude}. The client's intake form is as follows:\n"
            "{client intake form}."},
       {"", "The client has an attitude of {client attitude}. Below is the client's intake "
            "form:\n{client intake form}."},
       {"", "With an attitude of {client attitude}, the client's intake form details are:\n"
            "{client intake form}."},
       {"", "Client's attitude: {client attitude}. Intake form information:\n"
            "{client intake form}."},
       {"", "The client's attitude is {client attitude}. Here is their intake form:\n"
            "{client intake form}."}});

  put(SourceKind::syn_personachat,
      {{"", "User 1's Persona Information:\n- {user1 persona}\n\nUser 2's Persona Information:\n"
            "- {user2 persona}"},
       {"", "User 1's Profile:\n- {user1 persona}\n\nUser 2's Profile:\n- {user2 persona}"},
       {"", "Details of User 1's Persona:\n- {user1 persona}\n\nDetails of User 2's Persona:\n"
            "- {user2 persona}"},
       {"", "Persona for User 1:\n- {user1 persona}\n\nPersona for User 2:\n- {user2 persona}"},
       {"", "Information about User 1's Persona:\n- {user1 persona}\n\nInformation about User 2's "
            "Persona:\n- {user2 persona}"}});

  put(SourceKind::casino,
      {{"sentence",
        "Speaker A is a {speaker_a_age}-year-old {speaker_a_ethnicity} {speaker_a_gender} who "
        "has a {speaker_a_education} education. Their social value orientation is "
        "{speaker_a_svo}. According to the Big Five personality traits, they score "
        "{speaker_a_extraversion} in extraversion, {speaker_a_agreeableness} in agreeableness, "
        "{speaker_a_conscientiousness} in conscientiousness, {speaker_a_emotional_stability} in "
        "emotional stability, and {speaker_a_openness_to_experiences} in openness to "
        "experiences. In the negotiation, Speaker A's highest priority is "
        "{speaker_a_value2issue_high}, for which they reasoned: \"{speaker_a_value2reason_high}\". "
        "Their medium priority is {speaker_a_value2issue_medium}, with the reasoning: "
        "\"{speaker_a_value2reason_medium}\". Their lowest priority is "
        "{speaker_a_value2issue_low}, and they stated: \"{speaker_a_value2reason_low}\".\n\n---\n\n"
        "Speaker B is a {speaker_b_age}-year-old {speaker_b_ethnicity} {speaker_b_gender} who "
        "has a {speaker_b_education} education. Their social value orientation is "
        "{speaker_b_svo}. Their Big Five personality traits scores are {speaker_b_extraversion} "
        "in extraversion, {speaker_b_agreeableness} in agreeableness, "
        "{speaker_b_conscientiousness} in conscientiousness, {speaker_b_emotional_stability} in "
        "emotional stability, and {speaker_b_openness_to_experiences} in openness to "
        "experiences. During the negotiation, Speaker B's top priority is "
        "{speaker_b_value2issue_high}, and they explained: \"{speaker_b_value2reason_high}\". "
        "Their medium priority is {speaker_b_value2issue_medium}, with the reason: "
        "\"{speaker_b_value2reason_medium}\". Their lowest priority is "
        "{speaker_b_value2issue_low}, about which they mentioned: "
        "\"{speaker_b_value2reason_low}\"."},
       {"structured",
        "Speaker A's Demographic Information:\n"
        "- Age: {speaker_a_age}\n"
        "- Gender: {speaker_a_gender}\n"
        "- Ethnicity: {speaker_a_ethnicity}\n"
        "- Education: {speaker_a_education}\n"
        "\n"
        "Speaker A's Personality Information:\n"
        "- Social Value Orientation (SVO): {speaker_a_svo}\n"
        "- Big Five Personality Traits:\n"
        "  - Extraversion: {speaker_a_extraversion}\n"
        "  - Agreeableness: {speaker_a_agreeableness}\n"
        "  - Conscientiousness: {speaker_a_conscientiousness}\n"
        "  - Emotional Stability: {speaker_a_emotional_stability}\n"
        "  - Openness to Experiences: {speaker_a_openness_to_experiences}\n"
        "\n"
        "Speaker A's Negotiation Information:\n"
        "- Priority Order (value2issue):\n"
        "  - High: {speaker_a_value2issue_high}\n"
        "  - Medium: {speaker_a_value2issue_medium}\n"
        "  - Low: {speaker_a_value2issue_low}\n"
        "- Personal Arguments (value2reason):\n"
        "  - High: {speaker_a_value2reason_high}\n"
        "  - Medium: {speaker_a_value2reason_medium}\n"
        "  - Low: {speaker_a_value2reason_low}\n"
        "\n"
        "---\n"
        "\n"
        "Speaker B's Demographic Information:\n"
        "- Age: {speaker_b_age}\n"
        "- Gender: {speaker_b_gender}\n"
        "- Ethnicity: {speaker_b_ethnicity}\n"
        "- Education: {speaker_b_education}\n"
        "\n"
        "Speaker B's Personality Information:\n"
        "- Social Value Orientation (SVO): {speaker_b_svo}\n"
        "- Big Five Personality Traits:\n"
        "  - Extraversion: {speaker_b_extraversion}\n"
        "  - Agreeableness: {speaker_b_agreeableness}\n"
        "  - Conscientiousness: {speaker_b_conscientiousness}\n"
        "  - Emotional Stability: {speaker_b_emotional_stability}\n"
        "  - Openness to Experiences: {speaker_b_openness_to_experiences}\n"
        "\n"
        "Speaker B's Negotiation Information:\n"
        "- Priority Order (value2issue):\n"
        "  - High: {speaker_b_value2issue_high}\n"
        "  - Medium: {speaker_b_value2issue_medium}\n"
        "  - Low: {speaker_b_value2issue_low}\n"
        "- Personal Arguments (value2reason):\n"
        "  - High: {speaker_b_value2reason_high}\n"
        "  - Medium: {speaker_b_value2reason_medium}\n"
        "  - Low: {speaker_b_value2reason_low}"}});

  put(SourceKind::pearl,
      {{"", "Seeker's overall movie preferences are represented as follows:\n{user persona}"},
       {"", "Here is the seeker's complete movie profile:\n{user persona}"},
       {"", "The seeker's general movie state is described below:\n{user persona}"},
       {"", "Representation of seeker's overall movie interests:\n{user persona}"},
       {"", "Below is the seeker's overall movie persona:\n{user persona}"}});

  put(SourceKind::persuasion_for_good,
      {{"", "Speaker A is attempting to persuade Speaker B."},
       {"", "In this scenario, Speaker A is the Persuader and Speaker B is the Persuadee."},
       {"", "Speaker A acts as Persuader, while Speaker B plays the role of Persuadee."},
       {"", "In the conversation, Speaker A is persuading Speaker B."},
       {"", "Speaker A aims to convince Speaker B."}});

  put(SourceKind::empathetic_dialogues,
      {{"", "Speaker A is feeling {emotion} because {situation}."},
       {"", "Due to {situation}, Speaker A's emotion is {emotion}."},
       {"", "Speaker A's emotional state: {emotion}; Situation: {situation}."},
       {"", "Because of {situation}, Speaker A is in a {emotion} mood."},
       {"", "The situation is {situation}, so Speaker A feels {emotion}."}});

  // Sources whose social context is already narrative text in the corpus.
  for (SourceKind s : {SourceKind::soda, SourceKind::conversation_chronicles,
                       SourceKind::wizard_of_wikipedia, SourceKind::multiwoz22,
                       SourceKind::other}) {
    registry.emplace(s, TemplateSet::make(s, {{"", "{narrative}"}}, /*passthrough=*/true));
  }
  return registry;
}

}  // namespace detail

inline const std::map<SourceKind, TemplateSet>& builtin_registry() {
  static const std::map<SourceKind, TemplateSet> registry = detail::make_builtin_registry();
  return registry;
}

/// Pipeline-facing renderer: picks a variant (uniform per the derived seed),
/// honoring stark's session-round groups, and falls back to pass-through
/// narrative text for sources without templates. Returns empty text when a
/// pass-through source provides no narrative.
inline RenderedContext render_social_context(const std::map<SourceKind, TemplateSet>& registry,
                                             SourceKind source, const Bindings& bindings,
                                             std::uint64_t seed) {
  auto it = registry.find(source);
  const TemplateSet* set = it == registry.end() ? nullptr : &it->second;
  if (set == nullptr || set->passthrough()) {
    for (const char* key : {"narrative", "context"}) {
      auto b = bindings.find(key);
      if (b != bindings.end()) return RenderedContext{source, 0, b->second};
    }
    return RenderedContext{source, 0, ""};
  }
  std::size_t index;
  if (source == SourceKind::stark) {
    bool nth = bindings.count("time_interval") > 0;
    if (auto round = bindings.find("session_round"); round != bindings.end()) {
      nth = round->second != "1" && round->second != "first";
    }
    index = sample_variant_in_group(*set, nth ? "nth" : "first", seed);
  } else {
    index = sample_variant(*set, seed);
  }
  Bindings filtered = bindings;
  filtered.erase("session_round");
  return render(*set, index, filtered);
}

// ---------------------------------------------------------------------------
// User-supplied template sets
// ---------------------------------------------------------------------------

inline nlohmann::json template_set_to_json(const TemplateSet& set) {
  nlohmann::json j;
  j["source"] = std::string(source_tag(set.source()));
  nlohmann::json variants = nlohmann::json::array();
  nlohmann::json placeholders = nlohmann::json::array();
  nlohmann::json groups = nlohmann::json::array();
  bool any_group = false;
  for (const TemplateVariant& v : set.variants()) {
    variants.push_back(v.text);
    placeholders.push_back(v.placeholders);
    groups.push_back(v.group);
    if (!v.group.empty()) any_group = true;
  }
  j["variants"] = std::move(variants);
  j["placeholders"] = std::move(placeholders);
  if (any_group) j["groups"] = std::move(groups);
  return j;
}

/// Builtins plus the sets from a user file (one set object or an array of
/// them); a user set replaces the built-in for its source.
inline std::map<SourceKind, TemplateSet> load_template_registry(
    const std::filesystem::path& path);

inline TemplateSet template_set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("source") || !j.contains("variants")) {
    throw ParseError("template set requires \"source\" and \"variants\"");
  }
  auto source = source_from_tag(j["source"].get<std::string>());
  if (!source) throw ParseError("unknown source tag: " + j["source"].get<std::string>());
  if (!j["variants"].is_array() || j["variants"].empty()) {
    throw ParseError("\"variants\" must be a non-empty array");
  }
  std::vector<std::pair<std::string, std::string>> grouped;
  for (std::size_t i = 0; i < j["variants"].size(); ++i) {
    std::string group;
    if (j.contains("groups") && j["groups"].is_array() && i < j["groups"].size()) {
      group = j["groups"][i].get<std::string>();
    }
    grouped.emplace_back(group, j["variants"][i].get<std::string>());
  }
  TemplateSet set = TemplateSet::make(*source, std::move(grouped));
  // Declared placeholder lists, when present, must cover what the text uses.
  if (j.contains("placeholders") && j["placeholders"].is_array()) {
    const auto& declared = j["placeholders"];
    for (std::size_t i = 0; i < set.variants().size() && i < declared.size(); ++i) {
      for (const std::string& name : set.variants()[i].placeholders) {
        bool found = false;
        for (const auto& p : declared[i]) {
          if (p.is_string() && p.get<std::string>() == name) found = true;
        }
        if (!found) {
          throw ParseError("variant " + std::to_string(i) + " uses undeclared placeholder {" +
                           name + "}");
        }
      }
    }
  }
  return set;
}

inline std::map<SourceKind, TemplateSet> load_template_registry(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("template file: ") + e.what());
  }
  std::map<SourceKind, TemplateSet> registry = builtin_registry();
  auto merge = [&registry](const nlohmann::json& j) {
    TemplateSet set = template_set_from_json(j);
    registry.insert_or_assign(set.source(), std::move(set));
  };
  if (doc.is_array()) {
    for (const auto& item : doc) merge(item);
  } else {
    merge(doc);
  }
  return registry;
}

}  // namespace skillmind
