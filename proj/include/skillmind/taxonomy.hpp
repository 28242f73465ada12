#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillmind/errors.hpp"
#include "skillmind/rng.hpp"

namespace skillmind {

enum class SkillCategory {
  Interpersonal,
  MemoryKnowledge,
  CognitiveProblemSolving,
  CommunicationListening,
  TaskOriented,
};

inline constexpr std::array<SkillCategory, 5> kAllSkillCategories = {
    SkillCategory::Interpersonal,          SkillCategory::MemoryKnowledge,
    SkillCategory::CognitiveProblemSolving, SkillCategory::CommunicationListening,
    SkillCategory::TaskOriented,
};

inline std::string_view category_display_name(SkillCategory c) {
  switch (c) {
    case SkillCategory::Interpersonal: return "Interpersonal Skills";
    case SkillCategory::MemoryKnowledge: return "Memory & Knowledge Management Skills";
    case SkillCategory::CognitiveProblemSolving: return "Cognitive & Problem-Solving Skills";
    case SkillCategory::CommunicationListening: return "Communication & Listening Skills";
    case SkillCategory::TaskOriented: return "Task-Oriented Skills";
  }
  return "";
}

inline std::optional<SkillCategory> category_from_display_name(std::string_view name) {
  for (SkillCategory c : kAllSkillCategories) {
    if (category_display_name(c) == name) return c;
  }
  return std::nullopt;
}

struct EmptyNameError : Error {
  EmptyNameError() : Error("empty_name", "skill name is empty after normalization") {}
};

/// Normalized lookup key: lowercase, hyphens/underscores as spaces, other
/// punctuation dropped, whitespace collapsed and trimmed. Idempotent.
inline std::string normalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (c == '-' || c == '_' || std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (!std::isalnum(c)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

/// First letter of each word upper-cased, the rest lower-cased. Word
/// boundaries are spaces and hyphens, so "feedback-giving" keeps its hyphen.
inline std::string title_case(std::string_view raw) {
  std::string out(raw);
  bool at_word_start = true;
  for (char& c : out) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u == ' ' || u == '-' || u == '_' || std::isspace(u)) {
      at_word_start = true;
      continue;
    }
    c = static_cast<char>(at_word_start ? std::toupper(u) : std::tolower(u));
    at_word_start = false;
  }
  return out;
}

inline std::string trim_copy(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Skill {
  std::string canonical_name;
  std::string key;  // normalize_name(canonical_name)
  std::optional<SkillCategory> category;
  bool extended = false;  // in the annotation skill collection but outside the core catalog
  std::vector<std::string> aliases;  // normalized keys

  bool operator==(const Skill& other) const {
    return canonical_name == other.canonical_name && key == other.key &&
           category == other.category && extended == other.extended && aliases == other.aliases;
  }
};

enum class SkillResolution { Canonical, Extended, OpenSet };

inline std::string_view resolution_tag(SkillResolution r) {
  switch (r) {
    case SkillResolution::Canonical: return "canonical";
    case SkillResolution::Extended: return "extended";
    case SkillResolution::OpenSet: return "open_set";
  }
  return "";
}

inline std::optional<SkillResolution> resolution_from_tag(std::string_view tag) {
  if (tag == "canonical") return SkillResolution::Canonical;
  if (tag == "extended") return SkillResolution::Extended;
  if (tag == "open_set") return SkillResolution::OpenSet;
  return std::nullopt;
}

struct SkillMatch {
  SkillResolution resolution;
  Skill skill;

  bool operator==(const SkillMatch& other) const {
    return resolution == other.resolution && skill == other.skill;
  }
};

class Taxonomy {
 public:
  Taxonomy() = default;

  static Taxonomy from_skills(std::vector<Skill> skills) {
    Taxonomy t;
    t.skills_ = std::move(skills);
    for (std::size_t i = 0; i < t.skills_.size(); ++i) {
      const Skill& s = t.skills_[i];
      if (t.index_.count(s.key)) {
        throw Error("duplicate_skill", "duplicate skill key: " + s.key);
      }
      t.index_.emplace(s.key, i);
      for (const std::string& alias : s.aliases) {
        auto [it, inserted] = t.index_.emplace(alias, i);
        if (!inserted && it->second != i) {
          throw Error("duplicate_skill", "duplicate skill alias: " + alias);
        }
      }
    }
    return t;
  }

  const std::vector<Skill>& skills() const { return skills_; }

  const Skill* find(std::string_view normalized_key) const {
    auto it = index_.find(std::string(normalized_key));
    return it == index_.end() ? nullptr : &skills_[it->second];
  }

  std::size_t canonical_count() const {
    std::size_t n = 0;
    for (const Skill& s : skills_) {
      if (!s.extended) ++n;
    }
    return n;
  }

  std::size_t category_count(SkillCategory c) const {
    std::size_t n = 0;
    for (const Skill& s : skills_) {
      if (!s.extended && s.category == c) ++n;
    }
    return n;
  }

 private:
  std::vector<Skill> skills_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline Taxonomy make_builtin_taxonomy() {
  using C = SkillCategory;
  struct Entry {
    const char* name;
    C category;
  };
  static constexpr Entry kEntries[] = {
      {"Empathy", C::Interpersonal},
      {"Personal Background", C::Interpersonal},
      {"Persona Recall", C::Interpersonal},
      {"Self-Disclosure", C::Interpersonal},
      {"Negotiation", C::Interpersonal},
      {"Conflict Resolution", C::Interpersonal},
      {"Conflict Avoidance", C::Interpersonal},
      {"Persuasion", C::Interpersonal},
      {"Commonsense Understanding", C::Interpersonal},
      {"Cultural Sensitivity", C::Interpersonal},
      {"Ethics", C::Interpersonal},
      {"Harmlessness", C::Interpersonal},
      {"Avoiding Social Bias", C::Interpersonal},
      {"Helpfulness", C::Interpersonal},
      {"Mentoring", C::Interpersonal},
      {"Image Commenting", C::Interpersonal},
      {"Image Sharing", C::Interpersonal},
      {"Memory Recall", C::MemoryKnowledge},
      {"Knowledge Sharing", C::MemoryKnowledge},
      {"Knowledge Acquisition", C::MemoryKnowledge},
      {"Knowledge Searching", C::MemoryKnowledge},
      {"Critical Thinking", C::CognitiveProblemSolving},
      {"Logical Thinking", C::CognitiveProblemSolving},
      {"Creative Problem Solving", C::CognitiveProblemSolving},
      {"Factual Problem Solving", C::CognitiveProblemSolving},
      {"Decision-Making", C::CognitiveProblemSolving},
      {"Clarification", C::CommunicationListening},
      {"Confirmation", C::CommunicationListening},
      {"Rephrasing", C::CommunicationListening},
      {"Echoing", C::CommunicationListening},
      {"Topic Transition", C::CommunicationListening},
      {"Rhetoric", C::CommunicationListening},
      {"Active Listening", C::CommunicationListening},
      {"Reflective Listening", C::CommunicationListening},
      {"Immediate Response", C::CommunicationListening},
      {"Recommendation", C::TaskOriented},
      {"Task Execution", C::TaskOriented},
      {"Urgency Recognition", C::TaskOriented},
  };
  std::vector<Skill> skills;
  skills.reserve(std::size(kEntries) + 1);
  for (const Entry& e : kEntries) {
    skills.push_back(Skill{e.name, normalize_name(e.name), e.category, false, {}});
  }
  // Listed in the annotation skill collection but not assigned to a category.
  skills.push_back(Skill{"Preference Elicitation", normalize_name("Preference Elicitation"),
                         std::nullopt, true, {}});
  return Taxonomy::from_skills(std::move(skills));
}

}  // namespace detail

/// The built-in hierarchical skill catalog: 38 canonical skills across five
/// categories, plus "Preference Elicitation" as an extended entry.
inline const Taxonomy& builtin_taxonomy() {
  static const Taxonomy taxonomy = detail::make_builtin_taxonomy();
  return taxonomy;
}

/// Resolves a free-form skill name. Catalog hits return Canonical (or
/// Extended for extended members); anything else becomes an OpenSet match
/// carrying a synthesized skill named after the trimmed, title-cased input.
inline SkillMatch resolve(const Taxonomy& taxonomy, std::string_view raw) {
  std::string key = normalize_name(raw);
  if (key.empty()) throw EmptyNameError{};
  if (const Skill* s = taxonomy.find(key)) {
    return SkillMatch{s->extended ? SkillResolution::Extended : SkillResolution::Canonical, *s};
  }
  Skill open;
  open.canonical_name = title_case(trim_copy(raw));
  open.key = key;
  open.category = std::nullopt;
  open.extended = true;
  return SkillMatch{SkillResolution::OpenSet, std::move(open)};
}

/// Hash of the canonical skill list; surfaced by `--version` so dataset
/// artifacts can be tied to the catalog that produced them.
inline std::string taxonomy_fingerprint(const Taxonomy& taxonomy) {
  std::string joined;
  for (const Skill& s : taxonomy.skills()) {
    if (s.extended) continue;
    joined += s.canonical_name;
    joined.push_back('|');
  }
  std::uint64_t h = rng::fnv1a(joined);
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

inline nlohmann::json skill_to_json(const Skill& s) {
  nlohmann::json j;
  j["canonical_name"] = s.canonical_name;
  j["category"] = s.category ? nlohmann::json(std::string(category_display_name(*s.category)))
                             : nlohmann::json(nullptr);
  j["extended"] = s.extended;
  j["aliases"] = s.aliases;
  return j;
}

inline nlohmann::json taxonomy_to_json(const Taxonomy& taxonomy) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Skill& s : taxonomy.skills()) arr.push_back(skill_to_json(s));
  return arr;
}

inline Taxonomy taxonomy_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ParseError("taxonomy document must be a JSON array");
  std::vector<Skill> skills;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("canonical_name") ||
        !item["canonical_name"].is_string()) {
      throw ParseError("taxonomy entry missing string field \"canonical_name\"");
    }
    Skill s;
    s.canonical_name = item["canonical_name"].get<std::string>();
    s.key = normalize_name(s.canonical_name);
    if (s.key.empty()) throw ParseError("taxonomy entry name normalizes to empty");
    if (item.contains("category") && item["category"].is_string()) {
      auto c = category_from_display_name(item["category"].get<std::string>());
      if (!c) throw ParseError("unknown category: " + item["category"].get<std::string>());
      s.category = c;
    }
    if (item.contains("extended") && item["extended"].is_boolean()) {
      s.extended = item["extended"].get<bool>();
    }
    if (item.contains("aliases") && item["aliases"].is_array()) {
      for (const auto& a : item["aliases"]) {
        if (a.is_string()) s.aliases.push_back(normalize_name(a.get<std::string>()));
      }
    }
    skills.push_back(std::move(s));
  }
  return Taxonomy::from_skills(std::move(skills));
}

}  // namespace skillmind
