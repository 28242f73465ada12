#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "skillmind/corpus.hpp"
#include "test_util.hpp"

using namespace skillmind;
using testutil::TempDir;

namespace {

Dialogue make_dialogue(const std::string& id, int turns, SourceKind source = SourceKind::soda) {
  Dialogue d;
  d.id = id;
  d.source = source;
  for (int i = 0; i < turns; ++i) {
    Turn t;
    t.speaker = i % 2 == 0 ? "A" : "B";
    t.text = "turn " + std::to_string(i + 1);
    d.turns.push_back(std::move(t));
  }
  return d;
}

}  // namespace

TEST_CASE("split_one_sided emits pair-boundary prefixes with successors", "[corpus]") {
  SECTION("9 turns, stride 2 matches the two-sub-dialogue example") {
    Dialogue d = make_dialogue("d9", 9);
    auto subs = split_one_sided(d, 2);
    REQUIRE(subs.size() == 2);
    CHECK(subs[0].context_turns == 4);
    CHECK(subs[0].next_response.text == "turn 5");
    CHECK(subs[1].context_turns == 8);
    CHECK(subs[1].next_response.text == "turn 9");
    CHECK(subs[0].parent_id == "d9");
    CHECK(subs[0].id() == "d9#4");
  }

  SECTION("3 turns is too short") {
    Dialogue d = make_dialogue("d3", 3);
    CHECK_THROWS_AS(split_one_sided(d, 2), TooShortError);
  }

  SECTION("13 turns, stride 1 emits every even prefix with a successor") {
    Dialogue d = make_dialogue("d13", 13);
    auto subs = split_one_sided(d, 1);
    REQUIRE(subs.size() == 5);
    std::vector<int> lengths;
    for (const auto& s : subs) lengths.push_back(s.context_turns);
    CHECK(lengths == std::vector<int>{4, 6, 8, 10, 12});
    CHECK(subs.back().next_response.text == "turn 13");
  }

  SECTION("prefix with no following turn is not emitted") {
    Dialogue d = make_dialogue("d4", 4);
    CHECK_THROWS_AS(split_one_sided(d, 2), TooShortError);  // 4-turn prefix has no successor
    Dialogue d5 = make_dialogue("d5", 5);
    auto subs = split_one_sided(d5, 2);
    REQUIRE(subs.size() == 1);
    CHECK(subs[0].context_turns == 4);
  }
}

TEST_CASE("split_one_sided properties over random dialogues", "[corpus][property]") {
  rng::Engine engine(77, "split-property");
  for (int trial = 0; trial < 1000; ++trial) {
    int turns = 5 + static_cast<int>(engine.below(20));
    int stride = 1 + static_cast<int>(engine.below(3));
    Dialogue d = make_dialogue("r" + std::to_string(trial), turns);
    std::vector<SubDialogue> subs;
    try {
      subs = split_one_sided(d, stride);
    } catch (const TooShortError&) {
      CHECK(turns <= 4);
      continue;
    }
    int prev = 0;
    for (const auto& s : subs) {
      CHECK(s.context_turns >= 4);
      CHECK(s.context_turns % 2 == 0);
      CHECK(s.context_turns > prev);
      prev = s.context_turns;
      // next_response immediately follows the context in the parent
      CHECK(s.next_response == d.turns[static_cast<std::size_t>(s.context_turns)]);
      // contexts are strict prefixes of the parent
      for (int i = 0; i < s.context_turns; ++i) {
        CHECK(s.context[static_cast<std::size_t>(i)] == d.turns[static_cast<std::size_t>(i)]);
      }
    }
    // deterministic
    CHECK(split_one_sided(d, stride) == subs);
  }
}

TEST_CASE("proportional_sample draws exact counts deterministically", "[corpus]") {
  std::map<SourceKind, std::vector<SubDialogue>> groups;
  for (SourceKind s : {SourceKind::soda, SourceKind::pearl}) {
    for (int i = 0; i < 100; ++i) {
      SubDialogue sub;
      sub.parent_id = std::string(source_tag(s)) + "-" + std::to_string(i);
      sub.source = s;
      sub.context_turns = 4;
      groups[s].push_back(std::move(sub));
    }
  }
  std::map<SourceKind, double> proportions{{SourceKind::soda, 0.5}, {SourceKind::pearl, 0.5}};

  auto picked = proportional_sample(groups, proportions, 10, 7);
  REQUIRE(picked.size() == 10);
  std::size_t soda = 0, pearl = 0;
  for (const auto& s : picked) (s.source == SourceKind::soda ? soda : pearl)++;
  CHECK(soda == 5);
  CHECK(pearl == 5);

  auto again = proportional_sample(groups, proportions, 10, 7);
  CHECK(again == picked);

  auto different = proportional_sample(groups, proportions, 10, 8);
  CHECK(different != picked);
}

TEST_CASE("proportional_sample validates proportions", "[corpus]") {
  std::map<SourceKind, std::vector<SubDialogue>> groups;
  groups[SourceKind::soda].resize(10);
  groups[SourceKind::pearl].resize(10);
  std::map<SourceKind, double> bad{{SourceKind::soda, 0.6}, {SourceKind::pearl, 0.5}};
  CHECK_THROWS_AS(proportional_sample(groups, bad, 10, 1), BadProportionsError);
}

TEST_CASE("proportional_sample applies largest-remainder apportionment", "[corpus]") {
  std::map<SourceKind, std::vector<SubDialogue>> groups;
  for (SourceKind s : {SourceKind::soda, SourceKind::pearl, SourceKind::stark}) {
    groups[s].resize(10);
    for (auto& sub : groups[s]) sub.source = s;
  }
  std::map<SourceKind, double> thirds{{SourceKind::soda, 1.0 / 3.0},
                                      {SourceKind::pearl, 1.0 / 3.0},
                                      {SourceKind::stark, 1.0 / 3.0}};
  auto picked = proportional_sample(groups, thirds, 10, 1);
  std::map<SourceKind, int> counts;
  for (const auto& s : picked) counts[s.source]++;
  // floor gives (3,3,3); the extra goes to the first group in source order
  CHECK(counts[SourceKind::soda] == 4);
  CHECK(counts[SourceKind::pearl] == 3);
  CHECK(counts[SourceKind::stark] == 3);
}

TEST_CASE("proportional_sample reports the deficient group", "[corpus]") {
  std::map<SourceKind, std::vector<SubDialogue>> groups;
  groups[SourceKind::soda].resize(100);
  groups[SourceKind::pearl].resize(2);
  std::map<SourceKind, double> proportions{{SourceKind::soda, 0.5}, {SourceKind::pearl, 0.5}};
  try {
    proportional_sample(groups, proportions, 10, 1);
    FAIL("expected InsufficientGroupError");
  } catch (const InsufficientGroupError& e) {
    CHECK(e.source == SourceKind::pearl);
  }
}

TEST_CASE("sampled counts always sum to the requested total", "[corpus][property]") {
  rng::Engine engine(88, "sample-total");
  const std::vector<SourceKind> sources{SourceKind::soda, SourceKind::pearl, SourceKind::stark,
                                        SourceKind::cactus, SourceKind::casino};
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t group_count = 2 + engine.below(4);
    std::map<SourceKind, std::vector<SubDialogue>> groups;
    std::map<SourceKind, double> proportions;
    double weight_sum = 0.0;
    std::vector<double> weights;
    for (std::size_t g = 0; g < group_count; ++g) {
      double w = 1.0 + static_cast<double>(engine.below(9));
      weights.push_back(w);
      weight_sum += w;
    }
    for (std::size_t g = 0; g < group_count; ++g) {
      SourceKind s = sources[g];
      groups[s].resize(200);
      proportions[s] = weights[g] / weight_sum;
    }
    int total = static_cast<int>(engine.below(150));
    auto picked = proportional_sample(groups, proportions, total, trial);
    CHECK(picked.size() == static_cast<std::size_t>(total));
  }
}

TEST_CASE("per-group draws are independent of other groups' pools", "[corpus][property]") {
  auto build_groups = [](std::size_t pearl_size) {
    std::map<SourceKind, std::vector<SubDialogue>> groups;
    for (int i = 0; i < 50; ++i) {
      SubDialogue sub;
      sub.parent_id = "soda-" + std::to_string(i);
      sub.source = SourceKind::soda;
      groups[SourceKind::soda].push_back(sub);
    }
    for (std::size_t i = 0; i < pearl_size; ++i) {
      SubDialogue sub;
      sub.parent_id = "pearl-" + std::to_string(i);
      sub.source = SourceKind::pearl;
      groups[SourceKind::pearl].push_back(sub);
    }
    return groups;
  };
  std::map<SourceKind, double> proportions{{SourceKind::soda, 0.5}, {SourceKind::pearl, 0.5}};
  auto a = proportional_sample(build_groups(30), proportions, 10, 42);
  auto b = proportional_sample(build_groups(300), proportions, 10, 42);
  std::vector<std::string> soda_a, soda_b;
  for (const auto& s : a) {
    if (s.source == SourceKind::soda) soda_a.push_back(s.parent_id);
  }
  for (const auto& s : b) {
    if (s.source == SourceKind::soda) soda_b.push_back(s.parent_id);
  }
  CHECK(soda_a == soda_b);
}

TEST_CASE("corpus JSONL round-trips", "[corpus]") {
  TempDir dir;
  rng::Engine engine(3, "corpus-roundtrip");
  std::vector<Dialogue> dialogues;
  for (int i = 0; i < 25; ++i) {
    Dialogue d = make_dialogue("dlg-" + std::to_string(i), 5 + static_cast<int>(engine.below(8)),
                               i % 2 == 0 ? SourceKind::soda : SourceKind::stark);
    d.social_context["narrative"] = "narrative " + std::to_string(i);
    if (i % 3 == 0) d.turns[2].shared_image = "a photo " + std::to_string(i);
    if (i % 4 == 0) d.golden_next = Turn{"B", "golden", std::nullopt};
    dialogues.push_back(std::move(d));
  }
  auto path = dir.path / "corpus.jsonl";
  save_corpus(dialogues, path);
  auto loaded = load_corpus(path);
  CHECK(loaded == dialogues);
}

TEST_CASE("load_corpus reports schema violations with line numbers", "[corpus]") {
  TempDir dir;
  auto path = dir.path / "bad.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"ok","source":"soda","social_context":{},"turns":[{"speaker":"A","text":"hi"},{"speaker":"B","text":"yo"}],"golden_next":null})"
        << "\n";
    out << R"({"id":"bad","source":"soda"})" << "\n";
  }
  try {
    load_corpus(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("turns") != std::string::npos);
  }
}

TEST_CASE("load_corpus rejects non-alternating dialogues", "[corpus]") {
  TempDir dir;
  auto path = dir.path / "nonalt.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"x","source":"soda","turns":[{"speaker":"A","text":"a"},{"speaker":"A","text":"b"}]})"
        << "\n";
  }
  CHECK_THROWS_AS(load_corpus(path), ParseError);
}

TEST_CASE("load_corpus on an empty file yields an empty corpus", "[corpus]") {
  TempDir dir;
  auto path = dir.path / "empty.jsonl";
  std::ofstream(path).close();
  CHECK(load_corpus(path).empty());
}

TEST_CASE("unknown source tag is a parse error", "[corpus]") {
  TempDir dir;
  auto path = dir.path / "unknown.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"x","source":"reddit","turns":[{"speaker":"A","text":"a"},{"speaker":"B","text":"b"}]})"
        << "\n";
  }
  CHECK_THROWS_AS(load_corpus(path), ParseError);
}

TEST_CASE("corpus_stats counts exactly", "[corpus]") {
  SECTION("empty corpus") {
    CorpusStats stats = corpus_stats({});
    CHECK(stats.dialogue_count == 0);
    CHECK(stats.dialogues_per_source.empty());
    CHECK(stats.turn_count_histogram.empty());
  }

  SECTION("per-source counts") {
    std::vector<Dialogue> dialogues{make_dialogue("a", 9, SourceKind::soda),
                                    make_dialogue("b", 9, SourceKind::soda),
                                    make_dialogue("c", 9, SourceKind::pearl)};
    CorpusStats stats = corpus_stats(dialogues);
    CHECK(stats.dialogue_count == 3);
    CHECK(stats.dialogues_per_source.at("soda") == 2);
    CHECK(stats.dialogues_per_source.at("pearl") == 1);
    CHECK(stats.subdialogues_per_source.at("soda") == 4);  // two subs each at stride 2
  }

  SECTION("histogram matches an independent recount") {
    rng::Engine engine(11, "stats-histogram");
    std::vector<Dialogue> dialogues;
    std::map<int, std::size_t> expected;
    for (int i = 0; i < 200; ++i) {
      int turns = 2 + static_cast<int>(engine.below(15));
      expected[turns] += 1;
      dialogues.push_back(make_dialogue("h" + std::to_string(i), turns));
    }
    CorpusStats stats = corpus_stats(dialogues);
    CHECK(stats.turn_count_histogram == expected);
    nlohmann::json j = corpus_stats_to_json(stats);
    CHECK(j["dialogue_count"] == 200);
  }
}
