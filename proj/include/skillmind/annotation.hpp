#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "skillmind/chat_backend.hpp"
#include "skillmind/context_templates.hpp"
#include "skillmind/corpus.hpp"
#include "skillmind/errors.hpp"
#include "skillmind/rng.hpp"
#include "skillmind/som_runtime.hpp"
#include "skillmind/taxonomy.hpp"

namespace skillmind {

struct AnnotationRecord {
  std::string explanation;
  SkillMatch skill;

  bool operator==(const AnnotationRecord&) const = default;
};

enum class Split { train, test, unassigned };

inline std::string_view split_tag(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

inline std::optional<Split> split_from_tag(std::string_view tag) {
  if (tag == "train") return Split::train;
  if (tag == "test") return Split::test;
  if (tag == "unassigned") return Split::unassigned;
  return std::nullopt;
}

struct DatasetEntry {
  std::string id;
  SourceKind source = SourceKind::other;
  std::string social_context_text;
  std::map<std::string, std::string> social_context;  // raw bindings, kept for re-rendering
  std::vector<Turn> context;
  Turn next_response;
  std::vector<AnnotationRecord> annotations;
  Split split = Split::unassigned;
};

struct AnnotationFailure {
  std::string id;
  std::string cause;
  std::string raw_output;
};

using FailureLog = std::vector<AnnotationFailure>;

struct EmptyDialogueError : Error {
  EmptyDialogueError() : Error("empty_dialogue", "dialogue context has no turns") {}
};

// ---------------------------------------------------------------------------
// Annotation prompt
// ---------------------------------------------------------------------------

inline constexpr std::string_view kAnnotationSystemMessage =
    "You are a helpful assistant that generates the most appropriate conversational skill and "
    "corresponding explanation. Read the provided instruction carefully.";

inline constexpr std::string_view kAnnotationInstructionHeader =
    "In the given dialogue, two speakers are communicating with each other, and each speaker has "
    "their own information such as demographics, preferences, persona, current "
    "situation/narrative, past dialogue summaries, episodic memory, or other relevant details. "
    "This information is represented in the \"[Social Context]\" part. In this dialogue, "
    "image-sharing moments sometimes occur, represented in the format of \"[Sharing Image] "
    "<image_description>\", where <image_description> represents the description of the shared "
    "image. You are also given the ideal response for the next turn in the given dialogue. Your "
    "task is to identify the most appropriate conversational skill that would lead to the ideal "
    "response in the given dialogue from the skill collection below, and explain why this "
    "particular skill was chosen. When generating the explanation, you should adopt the "
    "perspective of the speaker in the dialogue, selecting the skill based solely on the context "
    "of the given conversation. Do not consider the ideal response when generating your "
    "explanation; focus only on the given dialogue itself and why the chosen skill is the most "
    "suitable in that specific situation.\n"
    "\n"
    "We provide the skill collection:\n"
    "[Skill Collections]\n"
    "- Empathy, Personal Background, Persona Recall, Self-disclosure, Negotiation, Conflict "
    "Resolution, Conflict Avoidance, Persuasion, Memory Recall, Topic Transition, Ethics, "
    "Harmlessness, Helpfulness, Avoiding Social Bias, Cultural Sensitivity, Commonsense "
    "Understanding, Rhetoric, Preference Elicitation, Knowledge Sharing, Knowledge Acquisition, "
    "Knowledge Searching, Active Listening, Factual Problem Solving, Logical Thinking, Critical "
    "Thinking, Creative Problem Solving, Immediate Response, Rephrasing, Echoing, Mentoring, "
    "Reflective Listening, Image-Sharing, Image-Commenting, Recommendation, Task Execution, "
    "Urgency Recognition, Clarification, Confirmation, Decision-making\n"
    "\n"
    "Given the dialogue, social context information, and the next response, please brainstorm "
    "the most appropriate conversation skill and corresponding explanation.\n";

inline constexpr std::string_view kAnnotationGuidelines =
    "You should strictly follow the guidelines below:\n"
    "[Guidelines]\n"
    "- The answer should be represented in the form of a JSON list.\n"
    "- Each entry in the list should be a Python dictionary containing the following keys: "
    "\"skill\", \"explanation\".\n"
    "- The \"skill\" field should contain the one skill that is mostly required to generate the "
    "next response.\n"
    "- The \"explanation\" field should provide a reason that occurs in the actual speaker's "
    "mind before selecting the skill, from the speaker's perspective.\n"
    "- The \"explanation\" should be written from the perspective of the actual speaker who made "
    "the next response.\n"
    "- You can choose one or multiple skills if necessary, but each skill must have its own "
    "explanation.\n"
    "\n"
    "[Generated Skills and Explanations]\n";

/// [system, user] messages asking the annotator for (skill, explanation)
/// pairs. The instruction skeleton is fixed; the three slots carry the
/// rendered social context, the transcript, and the held-out next response.
inline std::vector<ChatMessage> build_annotation_prompt(const std::string& social_context_text,
                                                        const std::vector<Turn>& context,
                                                        const Turn& next_response) {
  if (context.empty()) throw EmptyDialogueError{};
  std::string user;
  user.reserve(kAnnotationInstructionHeader.size() + kAnnotationGuidelines.size() + 1024);
  user += kAnnotationInstructionHeader;
  user += "[Social Context]\n";
  user += social_context_text;
  user += "\n\n[Dialogue]\n";
  user += render_transcript(context);
  user += "\n\n[Next Response]\n";
  user += render_turn_line(next_response);
  user += "\n\n";
  user += kAnnotationGuidelines;
  return {ChatMessage{"system", std::string(kAnnotationSystemMessage)},
          ChatMessage{"user", std::move(user)}};
}

// ---------------------------------------------------------------------------
// Output parsing
// ---------------------------------------------------------------------------

struct NotJsonError : Error {
  explicit NotJsonError(const std::string& detail) : Error("not_json", detail) {}
};

struct NotArrayError : Error {
  NotArrayError() : Error("not_array", "annotator output is not a JSON array") {}
};

struct EmptyArrayError : Error {
  EmptyArrayError() : Error("empty_array", "annotator output is an empty array") {}
};

struct MissingFieldError : Error {
  std::size_t index;
  std::string field;
  MissingFieldError(std::size_t index_, std::string field_)
      : Error("missing_field", "entry " + std::to_string(index_) + " missing string field \"" +
                                   field_ + "\""),
        index(index_),
        field(std::move(field_)) {}
};

struct OpenSetRejectedError : Error {
  explicit OpenSetRejectedError(const std::string& name)
      : Error("open_set_rejected", "skill outside the collection in strict mode: " + name) {}
};

namespace detail {

// Strips one optional ``` fence (with or without a language tag).
inline std::string strip_code_fence(std::string_view text) {
  std::string trimmed = trim_copy(text);
  if (trimmed.size() < 6 || trimmed.rfind("```", 0) != 0) return trimmed;
  std::size_t body_start = trimmed.find('\n');
  std::size_t fence_end = trimmed.rfind("```");
  if (body_start == std::string::npos || fence_end <= body_start) return trimmed;
  return trim_copy(std::string_view(trimmed).substr(body_start + 1, fence_end - body_start - 1));
}

}  // namespace detail

/// Parses the annotator's JSON list of {"skill", "explanation"} objects,
/// resolving skills through the taxonomy. Throws typed errors on any shape
/// violation so callers can log and exclude the record. Open-set skills are
/// kept by default; `reject_open_set` turns them into errors for validation
/// pipelines.
inline std::vector<AnnotationRecord> parse_annotation_output(const std::string& text,
                                                             const Taxonomy& taxonomy,
                                                             bool reject_open_set = false) {
  std::string payload = detail::strip_code_fence(text);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw NotJsonError(e.what());
  }
  if (!doc.is_array()) throw NotArrayError{};
  if (doc.empty()) throw EmptyArrayError{};
  std::vector<AnnotationRecord> records;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    if (!item.is_object() || !item.contains("skill") || !item["skill"].is_string() ||
        normalize_name(item["skill"].get<std::string>()).empty()) {
      throw MissingFieldError(i, "skill");
    }
    if (!item.contains("explanation") || !item["explanation"].is_string() ||
        trim_copy(item["explanation"].get<std::string>()).empty()) {
      throw MissingFieldError(i, "explanation");
    }
    AnnotationRecord record;
    record.explanation = item["explanation"].get<std::string>();
    record.skill = resolve(taxonomy, item["skill"].get<std::string>());
    if (reject_open_set && record.skill.resolution == SkillResolution::OpenSet) {
      throw OpenSetRejectedError(record.skill.skill.canonical_name);
    }
    records.push_back(std::move(record));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Batch annotation
// ---------------------------------------------------------------------------

struct AnnotateItem {
  SubDialogue sub;
  std::string social_context_text;
};

/// Produces the completion text for one item; the index is the item's input
/// position (mocks key deterministic behavior off it, the HTTP annotator
/// ignores it).
using Annotator = std::function<std::string(std::size_t, const std::vector<ChatMessage>&)>;

inline Annotator make_http_annotator(const BackendConfig& config) {
  auto backend = std::make_shared<HttpChatBackend>(config);
  return [backend](std::size_t, const std::vector<ChatMessage>& messages) {
    return backend->complete(messages);
  };
}

/// Annotates every item with at most `max_concurrency` requests in flight.
/// Entries come back in input order no matter how completions interleave;
/// per-item failures land in the log, and only AuthError aborts the batch.
inline std::pair<std::vector<DatasetEntry>, FailureLog> annotate_corpus(
    const std::vector<AnnotateItem>& items, const Annotator& annotate, const Taxonomy& taxonomy,
    int max_concurrency, bool reject_open_set = false) {
  if (max_concurrency < 1) throw Error("bad_argument", "max_concurrency must be >= 1");
  struct Slot {
    std::optional<DatasetEntry> entry;
    std::optional<AnnotationFailure> failure;
  };
  std::vector<Slot> slots(items.size());
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> aborted{false};
  std::mutex abort_mutex;
  std::exception_ptr abort_reason;

  auto worker = [&]() {
    while (!aborted.load(std::memory_order_relaxed)) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= items.size()) break;
      const AnnotateItem& item = items[i];
      const std::string id = item.sub.id();
      std::string raw;
      try {
        auto messages =
            build_annotation_prompt(item.social_context_text, item.sub.context,
                                    item.sub.next_response);
        raw = annotate(i, messages);
        DatasetEntry entry;
        entry.id = id;
        entry.source = item.sub.source;
        entry.social_context_text = item.social_context_text;
        entry.social_context = item.sub.social_context;
        entry.context = item.sub.context;
        entry.next_response = item.sub.next_response;
        entry.annotations = parse_annotation_output(raw, taxonomy, reject_open_set);
        slots[i].entry = std::move(entry);
      } catch (const AuthError&) {
        std::lock_guard lock(abort_mutex);
        if (!abort_reason) abort_reason = std::current_exception();
        aborted.store(true, std::memory_order_relaxed);
        break;
      } catch (const Error& e) {
        slots[i].failure =
            AnnotationFailure{id, std::string(e.kind()) + ": " + e.what(), raw};
      }
    }
  };

  std::size_t worker_count =
      std::min<std::size_t>(static_cast<std::size_t>(max_concurrency), std::max<std::size_t>(items.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(worker_count);
  for (std::size_t t = 0; t < worker_count; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (abort_reason) std::rethrow_exception(abort_reason);

  std::vector<DatasetEntry> entries;
  FailureLog failures;
  for (Slot& slot : slots) {
    if (slot.entry) entries.push_back(std::move(*slot.entry));
    if (slot.failure) failures.push_back(std::move(*slot.failure));
  }
  return {std::move(entries), std::move(failures)};
}

inline std::pair<std::vector<DatasetEntry>, FailureLog> annotate_corpus(
    const std::vector<AnnotateItem>& items, const BackendConfig& backend,
    const Taxonomy& taxonomy) {
  return annotate_corpus(items, make_http_annotator(backend), taxonomy, backend.max_concurrency);
}

// ---------------------------------------------------------------------------
// Split / selection / export
// ---------------------------------------------------------------------------

struct NoAnnotationsError : Error {
  explicit NoAnnotationsError(const std::string& id)
      : Error("no_annotations", "entry " + id + " has no annotations") {}
};

/// Seeded shuffle, then the first round(N * test_fraction) shuffled entries
/// (round half up) become the test split. Original corpus order is preserved
/// inside each output.
inline std::pair<std::vector<DatasetEntry>, std::vector<DatasetEntry>> train_test_split(
    std::vector<DatasetEntry> entries, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("bad_argument", "test_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Engine engine(seed, "train-test-split");
  engine.shuffle(order);
  auto test_count = static_cast<std::size_t>(
      std::floor(static_cast<double>(entries.size()) * test_fraction + 0.5));
  std::vector<bool> is_test(entries.size(), false);
  for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = true;
  std::vector<DatasetEntry> train, test;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].split = is_test[i] ? Split::test : Split::train;
    (is_test[i] ? test : train).push_back(std::move(entries[i]));
  }
  return {std::move(train), std::move(test)};
}

/// Uniform pick among an entry's annotations, deterministic per (seed, id).
inline const AnnotationRecord& select_training_annotation(const DatasetEntry& entry,
                                                          std::uint64_t seed) {
  if (entry.annotations.empty()) throw NoAnnotationsError(entry.id);
  rng::Engine engine(seed, entry.id);
  return entry.annotations[static_cast<std::size_t>(engine.below(entry.annotations.size()))];
}

struct TrainingRecord {
  std::string input;
  std::string target;
};

/// One chain-of-thought record per train entry: the input is a freshly
/// sampled social-context rendering plus the transcript, the target is the
/// selected explanation joined to its skill by the [RESULT SKILL] token.
inline std::vector<TrainingRecord> export_training_records(
    const std::vector<DatasetEntry>& entries, const std::map<SourceKind, TemplateSet>& registry,
    std::uint64_t seed) {
  std::vector<TrainingRecord> records;
  records.reserve(entries.size());
  for (const DatasetEntry& entry : entries) {
    if (entry.split != Split::train) {
      throw Error("not_train_split", "entry " + entry.id + " is not tagged train");
    }
    const AnnotationRecord& annotation = select_training_annotation(entry, seed);
    std::string social_text = entry.social_context_text;
    if (!entry.social_context.empty()) {
      social_text = render_social_context(registry, entry.source, entry.social_context,
                                          rng::derive_seed(seed, "export/" + entry.id))
                        .text;
    }
    TrainingRecord record;
    record.input = build_planner_input(
        social_text.empty() ? std::nullopt : std::optional<std::string>(social_text),
        entry.context);
    record.target = format_som_output(SomResult{annotation.explanation, {annotation.skill}});
    records.push_back(std::move(record));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline nlohmann::json dataset_entry_to_json(const DatasetEntry& entry) {
  nlohmann::json j;
  j["id"] = entry.id;
  j["source"] = std::string(source_tag(entry.source));
  j["social_context_text"] = entry.social_context_text;
  if (!entry.social_context.empty()) j["social_context"] = entry.social_context;
  nlohmann::json ctx = nlohmann::json::array();
  for (const Turn& t : entry.context) ctx.push_back(turn_to_json(t));
  j["context"] = std::move(ctx);
  j["next_response"] = turn_to_json(entry.next_response);
  nlohmann::json anns = nlohmann::json::array();
  for (const AnnotationRecord& a : entry.annotations) {
    anns.push_back({{"explanation", a.explanation},
                    {"skill", a.skill.skill.canonical_name},
                    {"skill_resolution", std::string(resolution_tag(a.skill.resolution))}});
  }
  j["annotations"] = std::move(anns);
  j["split"] = std::string(split_tag(entry.split));
  return j;
}

inline DatasetEntry dataset_entry_from_json(const nlohmann::json& j, const Taxonomy& taxonomy) {
  if (!j.is_object()) throw ParseError("dataset entry must be an object");
  for (const char* field : {"id", "source", "social_context_text", "context", "next_response",
                            "annotations", "split"}) {
    if (!j.contains(field)) {
      throw ParseError(std::string("dataset entry missing field \"") + field + "\"");
    }
  }
  DatasetEntry entry;
  entry.id = j["id"].get<std::string>();
  auto source = source_from_tag(j["source"].get<std::string>());
  if (!source) throw ParseError("unknown source tag: " + j["source"].get<std::string>());
  entry.source = *source;
  entry.social_context_text = j["social_context_text"].get<std::string>();
  if (j.contains("social_context") && j["social_context"].is_object()) {
    for (const auto& [key, value] : j["social_context"].items()) {
      entry.social_context[key] = value.get<std::string>();
    }
  }
  for (const auto& t : j["context"]) entry.context.push_back(turn_from_json(t));
  entry.next_response = turn_from_json(j["next_response"]);
  if (!j["annotations"].is_array() || j["annotations"].empty()) {
    throw ParseError("dataset entry has no annotations");
  }
  for (const auto& a : j["annotations"]) {
    if (!a.contains("explanation") || !a.contains("skill")) {
      throw ParseError("annotation requires \"explanation\" and \"skill\"");
    }
    AnnotationRecord record;
    record.explanation = a["explanation"].get<std::string>();
    record.skill = resolve(taxonomy, a["skill"].get<std::string>());
    entry.annotations.push_back(std::move(record));
  }
  auto split = split_from_tag(j["split"].get<std::string>());
  if (!split) throw ParseError("unknown split tag: " + j["split"].get<std::string>());
  entry.split = *split;
  return entry;
}

inline std::vector<DatasetEntry> load_dataset(const std::filesystem::path& path,
                                              const Taxonomy& taxonomy) {
  return detail::load_jsonl<DatasetEntry>(
      path, [&taxonomy](const nlohmann::json& j) { return dataset_entry_from_json(j, taxonomy); });
}

inline void save_dataset(const std::vector<DatasetEntry>& entries,
                         const std::filesystem::path& path) {
  detail::save_jsonl(entries, path, dataset_entry_to_json);
}

inline void save_failure_log(const FailureLog& failures, const std::filesystem::path& path) {
  detail::save_jsonl(failures, path, [](const AnnotationFailure& f) {
    return nlohmann::json{{"id", f.id}, {"cause", f.cause}, {"raw_output", f.raw_output}};
  });
}

inline void save_training_records(const std::vector<TrainingRecord>& records,
                                  const std::filesystem::path& path) {
  detail::save_jsonl(records, path, [](const TrainingRecord& r) {
    return nlohmann::json{{"input", r.input}, {"target", r.target}};
  });
}

inline std::vector<TrainingRecord> load_training_records(const std::filesystem::path& path) {
  return detail::load_jsonl<TrainingRecord>(path, [](const nlohmann::json& j) {
    if (!j.contains("input") || !j.contains("target")) {
      throw ParseError("training record requires \"input\" and \"target\"");
    }
    return TrainingRecord{j["input"].get<std::string>(), j["target"].get<std::string>()};
  });
}

}  // namespace skillmind
