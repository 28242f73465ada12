#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillmind/errors.hpp"
#include "skillmind/rng.hpp"

namespace skillmind {

struct Turn {
  std::string speaker;
  std::string text;
  std::optional<std::string> shared_image;

  bool operator==(const Turn&) const = default;
};

enum class SourceKind {
  soda,
  conversation_chronicles,
  prosocial,
  empathetic_dialogues,
  wizard_of_wikipedia,
  cactus,
  casino,
  multiwoz22,
  persuasion_for_good,
  pearl,
  syn_personachat,
  stark,
  other,
};

inline constexpr std::array<SourceKind, 13> kAllSources = {
    SourceKind::soda,      SourceKind::conversation_chronicles,
    SourceKind::prosocial, SourceKind::empathetic_dialogues,
    SourceKind::wizard_of_wikipedia, SourceKind::cactus,
    SourceKind::casino,    SourceKind::multiwoz22,
    SourceKind::persuasion_for_good, SourceKind::pearl,
    SourceKind::syn_personachat, SourceKind::stark,
    SourceKind::other,
};

inline std::string_view source_tag(SourceKind s) {
  switch (s) {
    case SourceKind::soda: return "soda";
    case SourceKind::conversation_chronicles: return "conversation_chronicles";
    case SourceKind::prosocial: return "prosocial";
    case SourceKind::empathetic_dialogues: return "empathetic_dialogues";
    case SourceKind::wizard_of_wikipedia: return "wizard_of_wikipedia";
    case SourceKind::cactus: return "cactus";
    case SourceKind::casino: return "casino";
    case SourceKind::multiwoz22: return "multiwoz22";
    case SourceKind::persuasion_for_good: return "persuasion_for_good";
    case SourceKind::pearl: return "pearl";
    case SourceKind::syn_personachat: return "syn_personachat";
    case SourceKind::stark: return "stark";
    case SourceKind::other: return "other";
  }
  return "other";
}

inline std::optional<SourceKind> source_from_tag(std::string_view tag) {
  for (SourceKind s : kAllSources) {
    if (source_tag(s) == tag) return s;
  }
  return std::nullopt;
}

struct Dialogue {
  std::string id;
  SourceKind source = SourceKind::other;
  std::vector<Turn> turns;
  std::map<std::string, std::string> social_context;
  std::optional<Turn> golden_next;

  bool operator==(const Dialogue&) const = default;
};

/// A prefix of a parent dialogue ending on a complete exchange pair, with the
/// immediately following turn held out. Source and social context are carried
/// along from the parent so downstream stages can render prompts.
struct SubDialogue {
  std::string parent_id;
  SourceKind source = SourceKind::other;
  std::map<std::string, std::string> social_context;
  std::vector<Turn> context;
  Turn next_response;
  int context_turns = 0;

  std::string id() const { return parent_id + "#" + std::to_string(context_turns); }

  bool operator==(const SubDialogue&) const = default;
};

struct TooShortError : Error {
  explicit TooShortError(const std::string& id)
      : Error("too_short", "dialogue " + id + " yields no sub-dialogue of the minimum length") {}
};

struct BadProportionsError : Error {
  explicit BadProportionsError(double sum)
      : Error("bad_proportions", "proportions sum to " + std::to_string(sum) + ", expected 1") {}
};

struct InsufficientGroupError : Error {
  SourceKind source;
  InsufficientGroupError(SourceKind source_, std::size_t requested, std::size_t available)
      : Error("insufficient_group", std::string(source_tag(source_)) + ": requested " +
                                        std::to_string(requested) + " of " +
                                        std::to_string(available) + " available"),
        source(source_) {}
};

/// Emits one-sided sub-dialogues: prefixes of 2k turns (k stepping by
/// `stride_pairs` from the first k with 2k >= min_turns), each paired with
/// the turn that immediately follows. Prefixes without a successor turn are
/// dropped; output is ordered by increasing context length.
inline std::vector<SubDialogue> split_one_sided(const Dialogue& dialogue, int stride_pairs = 2,
                                                int min_turns = 4) {
  if (stride_pairs < 1) throw Error("bad_argument", "stride_pairs must be >= 1");
  if (min_turns < 1) throw Error("bad_argument", "min_turns must be >= 1");
  const int total = static_cast<int>(dialogue.turns.size());
  std::vector<SubDialogue> out;
  int k = (min_turns + 1) / 2;
  if (k < 1) k = 1;
  for (; 2 * k < total; k += stride_pairs) {
    SubDialogue sub;
    sub.parent_id = dialogue.id;
    sub.source = dialogue.source;
    sub.social_context = dialogue.social_context;
    sub.context.assign(dialogue.turns.begin(), dialogue.turns.begin() + 2 * k);
    sub.next_response = dialogue.turns[static_cast<std::size_t>(2 * k)];
    sub.context_turns = 2 * k;
    out.push_back(std::move(sub));
  }
  if (out.empty()) throw TooShortError(dialogue.id);
  return out;
}

/// Draws floor(total * p) items per source without replacement, handing the
/// remainder to the largest fractional parts (ties in source order). Each
/// group uses its own generator stream keyed by (seed, tag), so a group's
/// picks do not depend on the other groups.
inline std::vector<SubDialogue> proportional_sample(
    const std::map<SourceKind, std::vector<SubDialogue>>& groups,
    const std::map<SourceKind, double>& proportions, int total, std::uint64_t seed) {
  if (total < 0) throw Error("bad_argument", "total must be >= 0");
  double sum = 0.0;
  for (const auto& [source, p] : proportions) {
    if (p < 0.0) throw BadProportionsError(p);
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadProportionsError(sum);

  struct Share {
    SourceKind source;
    std::size_t count;
    double fraction;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [source, p] : proportions) {
    double exact = total * p;
    auto base = static_cast<std::size_t>(std::floor(exact));
    shares.push_back(Share{source, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::size_t remainder = static_cast<std::size_t>(total) - assigned;
  std::vector<std::size_t> order(shares.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return shares[a].fraction > shares[b].fraction;
  });
  for (std::size_t i = 0; i < remainder; ++i) shares[order[i % order.size()]].count += 1;

  std::vector<SubDialogue> out;
  for (const Share& share : shares) {
    auto it = groups.find(share.source);
    std::size_t available = it == groups.end() ? 0 : it->second.size();
    if (share.count > available) {
      throw InsufficientGroupError(share.source, share.count, available);
    }
    if (share.count == 0) continue;
    rng::Engine engine(seed, source_tag(share.source));
    for (std::size_t idx : engine.sample_indices(available, share.count)) {
      out.push_back(it->second[idx]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSONL persistence
// ---------------------------------------------------------------------------

inline nlohmann::json turn_to_json(const Turn& t) {
  nlohmann::json j;
  j["speaker"] = t.speaker;
  j["text"] = t.text;
  j["shared_image"] = t.shared_image ? nlohmann::json(*t.shared_image) : nlohmann::json(nullptr);
  return j;
}

inline Turn turn_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("turn must be an object");
  if (!j.contains("speaker") || !j["speaker"].is_string()) {
    throw ParseError("turn missing string field \"speaker\"");
  }
  if (!j.contains("text") || !j["text"].is_string()) {
    throw ParseError("turn missing string field \"text\"");
  }
  Turn t;
  t.speaker = j["speaker"].get<std::string>();
  t.text = j["text"].get<std::string>();
  if (j.contains("shared_image") && j["shared_image"].is_string()) {
    t.shared_image = j["shared_image"].get<std::string>();
  }
  if (t.text.empty() && !t.shared_image) {
    throw ParseError("turn has neither text nor shared_image");
  }
  return t;
}

inline void validate_alternation(const Dialogue& d) {
  if (d.turns.empty()) throw ParseError("dialogue " + d.id + " has no turns");
  const std::string& first = d.turns[0].speaker;
  std::string second;
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const std::string& speaker = d.turns[i].speaker;
    if (i % 2 == 0) {
      if (speaker != first) {
        throw ParseError("dialogue " + d.id + " does not alternate between two speakers");
      }
    } else {
      if (second.empty()) {
        second = speaker;
        if (second == first) {
          throw ParseError("dialogue " + d.id + " does not alternate between two speakers");
        }
      } else if (speaker != second) {
        throw ParseError("dialogue " + d.id + " does not alternate between two speakers");
      }
    }
  }
}

inline nlohmann::json dialogue_to_json(const Dialogue& d) {
  nlohmann::json j;
  j["id"] = d.id;
  j["source"] = std::string(source_tag(d.source));
  j["social_context"] = d.social_context;
  nlohmann::json turns = nlohmann::json::array();
  for (const Turn& t : d.turns) turns.push_back(turn_to_json(t));
  j["turns"] = std::move(turns);
  j["golden_next"] = d.golden_next ? turn_to_json(*d.golden_next) : nlohmann::json(nullptr);
  return j;
}

inline Dialogue dialogue_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("dialogue must be an object");
  for (const char* field : {"id", "source", "turns"}) {
    if (!j.contains(field)) throw ParseError(std::string("dialogue missing field \"") + field + "\"");
  }
  Dialogue d;
  if (!j["id"].is_string()) throw ParseError("\"id\" must be a string");
  d.id = j["id"].get<std::string>();
  if (!j["source"].is_string()) throw ParseError("\"source\" must be a string");
  auto source = source_from_tag(j["source"].get<std::string>());
  if (!source) throw ParseError("unknown source tag: " + j["source"].get<std::string>());
  d.source = *source;
  if (j.contains("social_context") && j["social_context"].is_object()) {
    for (const auto& [key, value] : j["social_context"].items()) {
      if (!value.is_string()) throw ParseError("social_context values must be strings");
      d.social_context[key] = value.get<std::string>();
    }
  }
  if (!j["turns"].is_array()) throw ParseError("\"turns\" must be an array");
  for (const auto& t : j["turns"]) d.turns.push_back(turn_from_json(t));
  if (j.contains("golden_next") && !j["golden_next"].is_null()) {
    d.golden_next = turn_from_json(j["golden_next"]);
  }
  validate_alternation(d);
  return d;
}

inline nlohmann::json subdialogue_to_json(const SubDialogue& s) {
  nlohmann::json j;
  j["parent_id"] = s.parent_id;
  j["source"] = std::string(source_tag(s.source));
  j["social_context"] = s.social_context;
  nlohmann::json ctx = nlohmann::json::array();
  for (const Turn& t : s.context) ctx.push_back(turn_to_json(t));
  j["context"] = std::move(ctx);
  j["next_response"] = turn_to_json(s.next_response);
  j["context_turns"] = s.context_turns;
  return j;
}

inline SubDialogue subdialogue_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("sub-dialogue must be an object");
  for (const char* field : {"parent_id", "source", "context", "next_response"}) {
    if (!j.contains(field)) {
      throw ParseError(std::string("sub-dialogue missing field \"") + field + "\"");
    }
  }
  SubDialogue s;
  s.parent_id = j["parent_id"].get<std::string>();
  auto source = source_from_tag(j["source"].get<std::string>());
  if (!source) throw ParseError("unknown source tag: " + j["source"].get<std::string>());
  s.source = *source;
  if (j.contains("social_context") && j["social_context"].is_object()) {
    for (const auto& [key, value] : j["social_context"].items()) {
      s.social_context[key] = value.get<std::string>();
    }
  }
  for (const auto& t : j["context"]) s.context.push_back(turn_from_json(t));
  s.next_response = turn_from_json(j["next_response"]);
  s.context_turns = j.contains("context_turns") ? j["context_turns"].get<int>()
                                                : static_cast<int>(s.context.size());
  if (s.context_turns != static_cast<int>(s.context.size())) {
    throw ParseError("context_turns does not match context length");
  }
  return s;
}

namespace detail {

template <typename T, typename FromJson>
std::vector<T> load_jsonl(const std::filesystem::path& path, FromJson&& from_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      out.push_back(from_json(j));
    } catch (const ParseError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

template <typename T, typename ToJson>
void save_jsonl(const std::vector<T>& items, const std::filesystem::path& path, ToJson&& to_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const T& item : items) {
    out << to_json(item).dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline std::vector<Dialogue> load_corpus(const std::filesystem::path& path) {
  return detail::load_jsonl<Dialogue>(path, dialogue_from_json);
}

inline void save_corpus(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path) {
  detail::save_jsonl(dialogues, path, dialogue_to_json);
}

inline std::vector<SubDialogue> load_subdialogues(const std::filesystem::path& path) {
  return detail::load_jsonl<SubDialogue>(path, subdialogue_from_json);
}

inline void save_subdialogues(const std::vector<SubDialogue>& subs,
                              const std::filesystem::path& path) {
  detail::save_jsonl(subs, path, subdialogue_to_json);
}

// ---------------------------------------------------------------------------
// Stats
// ---------------------------------------------------------------------------

struct CorpusStats {
  std::size_t dialogue_count = 0;
  std::map<std::string, std::size_t> dialogues_per_source;
  std::map<std::string, std::size_t> subdialogues_per_source;  // with default split settings
  std::map<int, std::size_t> turn_count_histogram;
};

inline CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues, int stride_pairs = 2,
                                int min_turns = 4) {
  CorpusStats stats;
  stats.dialogue_count = dialogues.size();
  for (const Dialogue& d : dialogues) {
    stats.dialogues_per_source[std::string(source_tag(d.source))] += 1;
    stats.turn_count_histogram[static_cast<int>(d.turns.size())] += 1;
    std::size_t subs = 0;
    try {
      subs = split_one_sided(d, stride_pairs, min_turns).size();
    } catch (const TooShortError&) {
      subs = 0;
    }
    stats.subdialogues_per_source[std::string(source_tag(d.source))] += subs;
  }
  return stats;
}

inline nlohmann::json corpus_stats_to_json(const CorpusStats& stats) {
  nlohmann::json j;
  j["dialogue_count"] = stats.dialogue_count;
  j["dialogues_per_source"] = stats.dialogues_per_source;
  j["subdialogues_per_source"] = stats.subdialogues_per_source;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [turns, count] : stats.turn_count_histogram) {
    hist[std::to_string(turns)] = count;
  }
  j["turn_count_histogram"] = std::move(hist);
  return j;
}

}  // namespace skillmind
