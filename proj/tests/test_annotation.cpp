#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "skillmind/annotation.hpp"
#include "test_util.hpp"

using namespace skillmind;
using testutil::TempDir;

namespace {

SubDialogue make_sub(const std::string& parent, int turns, SourceKind source = SourceKind::soda) {
  SubDialogue sub;
  sub.parent_id = parent;
  sub.source = source;
  for (int i = 0; i < turns; ++i) {
    sub.context.push_back(Turn{i % 2 == 0 ? "A" : "B", "turn " + std::to_string(i + 1), {}});
  }
  sub.next_response = Turn{turns % 2 == 0 ? "A" : "B", "the next reply", {}};
  sub.context_turns = turns;
  return sub;
}

std::vector<AnnotateItem> make_items(int n) {
  std::vector<AnnotateItem> items;
  for (int i = 0; i < n; ++i) {
    items.push_back(AnnotateItem{make_sub("dlg-" + std::to_string(i), 4),
                                 "context for dialogue " + std::to_string(i)});
  }
  return items;
}

const std::string kGoodOutput =
    R"([{"skill": "Active Listening", "explanation": "In responding, I want to show I heard them."}])";

}  // namespace

TEST_CASE("build_annotation_prompt matches the golden fixture byte for byte", "[annotation]") {
  std::vector<Turn> context{
      {"Riya", "Sam, can you keep a secret?", {}},
      {"Sam", "Of course. What's going on?", {}},
      {"Riya", "", "a wicker basket packed with sandwiches and lemonade"},
      {"Sam", "That looks amazing. Who is it for?", {}},
  };
  Turn next{"Riya", "It's for Maya. She aced her exams and I want to celebrate her.", {}};
  std::string social =
      "Riya is feeling excited because she is planning a surprise picnic for her best friend.";

  auto messages = build_annotation_prompt(social, context, next);
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].role == "system");
  CHECK(messages[1].role == "user");

  std::string system_golden = testutil::read_file(testutil::fixture_dir() / "annotation_prompt_system.txt");
  if (!system_golden.empty() && system_golden.back() == '\n') system_golden.pop_back();
  CHECK(messages[0].content == system_golden);

  std::string user_golden =
      testutil::read_file(testutil::fixture_dir() / "annotation_prompt_user_golden.txt");
  CHECK(messages[1].content == user_golden);
}

TEST_CASE("annotation prompt carries the documented literal markers", "[annotation]") {
  auto items = make_items(1);
  auto messages = build_annotation_prompt(items[0].social_context_text, items[0].sub.context,
                                          items[0].sub.next_response);
  const std::string& user = messages[1].content;
  CHECK(user.find("- The answer should be represented in the form of a JSON list.") !=
        std::string::npos);
  CHECK(user.find("[Skill Collections]") != std::string::npos);
  CHECK(user.find("[Social Context]") != std::string::npos);
  CHECK(user.find("[Next Response]") != std::string::npos);
  CHECK(user.find("[Sharing Image]") != std::string::npos);

  SECTION("image turns render with the sharing marker") {
    std::vector<Turn> context{{"A", "look at this", {}}, {"B", "", "two pizzas on a table"}};
    auto msgs = build_annotation_prompt("ctx", context, Turn{"A", "nice", {}});
    CHECK(msgs[1].content.find("B: [Sharing Image] two pizzas on a table") != std::string::npos);
  }

  SECTION("deterministic across calls") {
    auto again = build_annotation_prompt(items[0].social_context_text, items[0].sub.context,
                                         items[0].sub.next_response);
    CHECK(again == messages);
  }

  SECTION("empty dialogue is rejected") {
    CHECK_THROWS_AS(build_annotation_prompt("ctx", {}, Turn{"A", "x", {}}),
                    EmptyDialogueError);
  }
}

TEST_CASE("parse_annotation_output accepts well-formed lists", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();

  auto records = parse_annotation_output(
      R"([{"skill": "Active Listening", "explanation": "In responding to Sawyer, I want to show I have been listening."}])",
      t);
  REQUIRE(records.size() == 1);
  CHECK(records[0].skill.resolution == SkillResolution::Canonical);
  CHECK(records[0].skill.skill.canonical_name == "Active Listening");

  SECTION("multiple annotations preserve order") {
    auto multi = parse_annotation_output(
        R"([{"skill": "Empathy", "explanation": "e1"}, {"skill": "Ethics", "explanation": "e2"}])",
        t);
    REQUIRE(multi.size() == 2);
    CHECK(multi[0].skill.skill.canonical_name == "Empathy");
    CHECK(multi[1].skill.skill.canonical_name == "Ethics");
  }

  SECTION("open-set skills are kept and tagged") {
    auto open = parse_annotation_output(
        R"([{"skill": "Feedback Giving", "explanation": "they need pointers"}])", t);
    CHECK(open[0].skill.resolution == SkillResolution::OpenSet);
  }

  SECTION("strict mode rejects open-set skills") {
    CHECK_THROWS_AS(
        parse_annotation_output(
            R"([{"skill": "Feedback Giving", "explanation": "they need pointers"}])", t, true),
        OpenSetRejectedError);
    CHECK_NOTHROW(parse_annotation_output(kGoodOutput, t, true));
  }

  SECTION("a fenced code block is tolerated") {
    auto fenced = parse_annotation_output("```json\n" + kGoodOutput + "\n```", t);
    CHECK(fenced.size() == 1);
  }
}

TEST_CASE("parse_annotation_output rejects malformed output with typed errors", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  CHECK_THROWS_AS(parse_annotation_output("total garbage", t), NotJsonError);
  CHECK_THROWS_AS(parse_annotation_output(R"({"skill": "Empathy"})", t), NotArrayError);
  CHECK_THROWS_AS(parse_annotation_output("[]", t), EmptyArrayError);

  try {
    parse_annotation_output(R"([{"skill": "Empathy"}])", t);
    FAIL("expected MissingFieldError");
  } catch (const MissingFieldError& e) {
    CHECK(e.index == 0);
    CHECK(e.field == "explanation");
  }

  try {
    parse_annotation_output(R"([{"explanation": "only"}])", t);
    FAIL("expected MissingFieldError");
  } catch (const MissingFieldError& e) {
    CHECK(e.field == "skill");
  }
}

TEST_CASE("parsing is total over adversarial bytes", "[annotation][property]") {
  const Taxonomy& t = builtin_taxonomy();
  rng::Engine engine(33, "adversarial-parse");
  const std::string alphabet = "[]{}\",:abc \n\\0";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    std::size_t len = engine.below(40);
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[engine.below(alphabet.size())]);
    try {
      auto records = parse_annotation_output(s, t);
      CHECK_FALSE(records.empty());
    } catch (const Error&) {
      // typed rejection is the other acceptable outcome
    }
  }
}

TEST_CASE("annotate_corpus conserves inputs and keeps input order", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  auto items = make_items(10);

  Annotator mock = [&](std::size_t index, const std::vector<ChatMessage>&) -> std::string {
    if (index == 3 || index == 7) return "not json at all";
    return R"([{"skill": "Empathy", "explanation": "explanation for item )" +
           std::to_string(index) + R"("}])";
  };

  auto [entries, failures] = annotate_corpus(items, mock, t, 4);
  CHECK(entries.size() == 8);
  CHECK(failures.size() == 2);
  CHECK(entries.size() + failures.size() == items.size());
  CHECK(failures[0].id == "dlg-3#4");
  CHECK(failures[1].id == "dlg-7#4");
  CHECK(failures[0].raw_output == "not json at all");

  // entries follow input order
  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.id);
  std::vector<std::string> expected;
  for (int i = 0; i < 10; ++i) {
    if (i != 3 && i != 7) expected.push_back("dlg-" + std::to_string(i) + "#4");
  }
  CHECK(ids == expected);

  auto [entries2, failures2] = annotate_corpus(items, mock, t, 4);
  CHECK(entries2.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) CHECK(entries2[i].id == entries[i].id);
}

TEST_CASE("annotate_corpus reorders scrambled completions back to input order", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  auto items = make_items(12);
  Annotator slow_evens = [&](std::size_t index, const std::vector<ChatMessage>&) -> std::string {
    if (index % 2 == 0) std::this_thread::sleep_for(std::chrono::milliseconds(15));
    return R"([{"skill": "Ethics", "explanation": "e)" + std::to_string(index) + R"("}])";
  };
  auto [entries, failures] = annotate_corpus(items, slow_evens, t, 6);
  REQUIRE(failures.empty());
  REQUIRE(entries.size() == 12);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(entries[i].id == "dlg-" + std::to_string(i) + "#4");
    CHECK(entries[i].annotations[0].explanation == "e" + std::to_string(i));
  }
}

TEST_CASE("annotate_corpus bounds in-flight requests", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  auto items = make_items(20);
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  Annotator counting = [&](std::size_t, const std::vector<ChatMessage>&) -> std::string {
    int now = in_flight.fetch_add(1) + 1;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    in_flight.fetch_sub(1);
    return kGoodOutput;
  };
  auto [entries, failures] = annotate_corpus(items, counting, t, 3);
  CHECK(entries.size() == 20);
  CHECK(peak.load() <= 3);
}

TEST_CASE("AuthError aborts the batch", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  auto items = make_items(6);
  Annotator failing = [&](std::size_t index, const std::vector<ChatMessage>&) -> std::string {
    if (index == 2) throw AuthError("key missing");
    return kGoodOutput;
  };
  CHECK_THROWS_AS(annotate_corpus(items, failing, t, 2), AuthError);
}

TEST_CASE("strict annotation excludes open-set records as failures", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  auto items = make_items(6);
  Annotator sometimes_open = [&](std::size_t index, const std::vector<ChatMessage>&) {
    return index % 2 == 0
               ? std::string(R"([{"skill": "Empathy", "explanation": "e"}])")
               : std::string(R"([{"skill": "Vibe Curation", "explanation": "e"}])");
  };
  auto [lenient_entries, lenient_failures] = annotate_corpus(items, sometimes_open, t, 2);
  CHECK(lenient_entries.size() == 6);
  CHECK(lenient_failures.empty());

  auto [strict_entries, strict_failures] = annotate_corpus(items, sometimes_open, t, 2, true);
  CHECK(strict_entries.size() == 3);
  REQUIRE(strict_failures.size() == 3);
  CHECK(strict_failures[0].cause.find("open_set_rejected") != std::string::npos);
}

TEST_CASE("transport errors are per-item failures, not aborts", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  auto items = make_items(5);
  Annotator flaky = [&](std::size_t index, const std::vector<ChatMessage>&) -> std::string {
    if (index == 1) throw TransportError("connection reset");
    return kGoodOutput;
  };
  auto [entries, failures] = annotate_corpus(items, flaky, t, 2);
  CHECK(entries.size() == 4);
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].cause.find("transport") != std::string::npos);
}

TEST_CASE("train_test_split partitions deterministically", "[annotation]") {
  auto make_entries = [](int n) {
    std::vector<DatasetEntry> entries;
    for (int i = 0; i < n; ++i) {
      DatasetEntry e;
      e.id = "e-" + std::to_string(i);
      e.annotations.push_back(
          AnnotationRecord{"x", resolve(builtin_taxonomy(), "Empathy")});
      entries.push_back(std::move(e));
    }
    return entries;
  };

  SECTION("50 entries at 0.1 give 45/5") {
    auto [train, test] = train_test_split(make_entries(50), 0.1, 3);
    CHECK(train.size() == 45);
    CHECK(test.size() == 5);
    for (const auto& e : train) CHECK(e.split == Split::train);
    for (const auto& e : test) CHECK(e.split == Split::test);
  }

  SECTION("same seed, same membership") {
    auto [train_a, test_a] = train_test_split(make_entries(50), 0.1, 9);
    auto [train_b, test_b] = train_test_split(make_entries(50), 0.1, 9);
    std::vector<std::string> a, b;
    for (const auto& e : test_a) a.push_back(e.id);
    for (const auto& e : test_b) b.push_back(e.id);
    CHECK(a == b);
  }

  SECTION("disjoint and exhaustive") {
    auto entries = make_entries(33);
    auto [train, test] = train_test_split(entries, 0.25, 5);
    CHECK(train.size() + test.size() == entries.size());
    std::set<std::string> ids;
    for (const auto& e : train) ids.insert(e.id);
    for (const auto& e : test) ids.insert(e.id);
    CHECK(ids.size() == entries.size());
  }

  SECTION("the documented corpus size splits 89,997 / 10,000") {
    auto [train, test] = train_test_split(make_entries(99997), 0.1, 1);
    CHECK(train.size() == 89997);
    CHECK(test.size() == 10000);
  }

  SECTION("fraction bounds are enforced") {
    CHECK_THROWS_AS(train_test_split(make_entries(5), 0.0, 1), Error);
    CHECK_THROWS_AS(train_test_split(make_entries(5), 1.0, 1), Error);
  }
}

TEST_CASE("select_training_annotation picks deterministically and uniformly", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  DatasetEntry entry;
  entry.id = "entry-0";

  SECTION("sole annotation is always chosen") {
    entry.annotations = {AnnotationRecord{"only", resolve(t, "Empathy")}};
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      CHECK(select_training_annotation(entry, seed).explanation == "only");
    }
  }

  SECTION("two annotations appear with near-equal frequency across seeds") {
    entry.annotations = {AnnotationRecord{"first", resolve(t, "Empathy")},
                         AnnotationRecord{"second", resolve(t, "Ethics")}};
    int first = 0;
    const int sweeps = 4000;
    for (int seed = 0; seed < sweeps; ++seed) {
      if (select_training_annotation(entry, static_cast<std::uint64_t>(seed)).explanation ==
          "first") {
        ++first;
      }
    }
    double share = static_cast<double>(first) / sweeps;
    CHECK(share > 0.45);
    CHECK(share < 0.55);
  }

  SECTION("no annotations is an error") {
    CHECK_THROWS_AS(select_training_annotation(entry, 1), NoAnnotationsError);
  }
}

TEST_CASE("export_training_records emits [RESULT SKILL] targets", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  const auto& registry = builtin_registry();

  std::vector<DatasetEntry> entries;
  for (int i = 0; i < 6; ++i) {
    DatasetEntry e;
    e.id = "train-" + std::to_string(i);
    e.source = SourceKind::empathetic_dialogues;
    e.social_context = {{"emotion", "hopeful"}, {"situation", "a new job starts tomorrow"}};
    e.social_context_text = "unused because bindings are present";
    e.context = {{"A", "big day tomorrow", {}}, {"B", "how are you feeling?", {}}};
    e.next_response = {"A", "nervous but excited", {}};
    e.annotations = {AnnotationRecord{"E" + std::to_string(i), resolve(t, "Empathy")}};
    e.split = Split::train;
    entries.push_back(std::move(e));
  }

  auto records = export_training_records(entries, registry, 11);
  REQUIRE(records.size() == entries.size());
  CHECK(records[0].target == "E0 [RESULT SKILL] Empathy");
  for (const auto& r : records) {
    // exactly one separator occurrence
    std::size_t first = r.target.find(" [RESULT SKILL] ");
    REQUIRE(first != std::string::npos);
    CHECK(r.target.find(" [RESULT SKILL] ", first + 1) == std::string::npos);
    // input = rendered context, blank line, transcript
    CHECK(r.input.find("hopeful") != std::string::npos);
    CHECK(r.input.find("\n\nA: big day tomorrow\nB: how are you feeling?") != std::string::npos);
  }

  SECTION("fixed seed gives byte-identical exports") {
    auto again = export_training_records(entries, registry, 11);
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(again[i].input == records[i].input);
      CHECK(again[i].target == records[i].target);
    }
  }

  SECTION("non-train entries are rejected") {
    auto bad = entries;
    bad[0].split = Split::test;
    CHECK_THROWS_AS(export_training_records(bad, registry, 11), Error);
  }

  SECTION("entries without bindings fall back to stored context text") {
    auto plain = entries;
    for (auto& e : plain) {
      e.social_context.clear();
      e.social_context_text = "stored narrative";
    }
    auto rec = export_training_records(plain, registry, 11);
    CHECK(rec[0].input.rfind("stored narrative\n\n", 0) == 0);
  }
}

TEST_CASE("dataset and failure-log persistence round-trips", "[annotation]") {
  const Taxonomy& t = builtin_taxonomy();
  TempDir dir;

  std::vector<DatasetEntry> entries;
  for (int i = 0; i < 4; ++i) {
    DatasetEntry e;
    e.id = "d-" + std::to_string(i);
    e.source = SourceKind::stark;
    e.social_context_text = "ctx " + std::to_string(i);
    e.social_context = {{"name", "Mina"}};
    e.context = {{"A", "hello", {}}, {"B", "", "a common photo"}};
    e.next_response = {"A", "next", {}};
    e.annotations = {AnnotationRecord{"exp", resolve(t, "Image Commenting")},
                     AnnotationRecord{"exp2", resolve(t, "Feedback Giving")}};
    e.split = i % 2 == 0 ? Split::train : Split::test;
    entries.push_back(std::move(e));
  }

  auto path = dir.path / "dataset.jsonl";
  save_dataset(entries, path);
  auto loaded = load_dataset(path, t);
  REQUIRE(loaded.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(loaded[i].id == entries[i].id);
    CHECK(loaded[i].split == entries[i].split);
    CHECK(loaded[i].social_context == entries[i].social_context);
    CHECK(loaded[i].annotations == entries[i].annotations);
  }

  FailureLog failures{{"d-9", "not_json: oops", "raw text"}};
  auto fail_path = dir.path / "failures.jsonl";
  save_failure_log(failures, fail_path);
  std::string content = testutil::read_file(fail_path);
  CHECK(content.find("\"cause\":\"not_json: oops\"") != std::string::npos);

  std::vector<TrainingRecord> records{{"in", "out [RESULT SKILL] Empathy"}};
  auto rec_path = dir.path / "train.jsonl";
  save_training_records(records, rec_path);
  auto rec_loaded = load_training_records(rec_path);
  REQUIRE(rec_loaded.size() == 1);
  CHECK(rec_loaded[0].target == records[0].target);
}
