#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "test_util.hpp"

using testutil::TempDir;

namespace {

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::string& stdin_text = "") {
  TempDir dir;
  auto out_path = dir.path / "out", err_path = dir.path / "err", in_path = dir.path / "in";
  std::ofstream(in_path) << stdin_text;
  std::string command = std::string(SKILLMIND_CLI_PATH) + " " + args + " < " + in_path.string() +
                        " > " + out_path.string() + " 2> " + err_path.string();
  int rc = std::system(command.c_str());
  return CliResult{rc == -1 ? -1 : WEXITSTATUS(rc), testutil::read_file(out_path),
                   testutil::read_file(err_path)};
}

std::string sample_corpus() {
  return (testutil::data_dir() / "sample_corpus.jsonl").string();
}

}  // namespace

TEST_CASE("version reports the toolkit and catalog fingerprint", "[cli]") {
  CliResult r = run_cli("--version --json");
  REQUIRE(r.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["version"] == "0.1.0");
  CHECK(j["taxonomy_skills"] == 38);
  CHECK(j["taxonomy_fingerprint"].get<std::string>().size() == 16);
}

TEST_CASE("taxonomy resolve emits the documented JSON shape", "[cli]") {
  CliResult r = run_cli("taxonomy resolve \"active listening\" --json");
  REQUIRE(r.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["resolution"] == "canonical");
  CHECK(j["skill"] == "Active Listening");
  CHECK(j["category"] == "Communication & Listening Skills");

  CliResult open = run_cli("taxonomy resolve \"feedback giving\" --json");
  CHECK(nlohmann::json::parse(open.out)["resolution"] == "open_set");
}

TEST_CASE("exit codes distinguish usage, data, and strict errors", "[cli]") {
  CHECK(run_cli("taxonomy resolve").exit_code == 1);                 // missing argument
  CHECK(run_cli("corpus stats --in /no/such/file.jsonl").exit_code == 2);
  CHECK(run_cli("taxonomy resolve \"feedback giving\" --strict").exit_code == 2);
  CHECK(run_cli("nonsense-command").exit_code != 0);
}

TEST_CASE("--json turns errors into single-line JSON on stderr", "[cli]") {
  CliResult r = run_cli("corpus stats --in /no/such/file.jsonl --json");
  CHECK(r.exit_code == 2);
  nlohmann::json j = nlohmann::json::parse(r.err);
  CHECK(j["error"] == "io");
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

TEST_CASE("config paths provide --in/--out fallbacks", "[cli]") {
  TempDir dir;
  auto dataset = dir.path / "dataset.jsonl";
  auto config = dir.path / "config.json";
  std::ofstream(config) << nlohmann::json{
      {"seed", 42},
      {"paths",
       {{"corpus", sample_corpus()}, {"dataset", dataset.string()}, {"reports", dir.path.string()}}}}
                               .dump();

  // corpus stats without --in reads the configured corpus
  CliResult stats = run_cli("corpus stats --config " + config.string() + " --json");
  REQUIRE(stats.exit_code == 0);
  CHECK(nlohmann::json::parse(stats.out)["dialogue_count"] == 10);

  // annotate run without --out writes the configured dataset path
  auto subs = dir.path / "subs.jsonl";
  REQUIRE(run_cli("corpus split --in " + sample_corpus() + " --out " + subs.string() +
                  " --stride 1")
              .exit_code == 0);
  CliResult annotate = run_cli("annotate run --config " + config.string() + " --in " +
                               subs.string() + " --mock --json");
  REQUIRE(annotate.exit_code == 0);
  CHECK(nlohmann::json::parse(annotate.out)["entries"] == 50);
  CHECK(std::filesystem::exists(dataset));

  // eval reports land in the configured reports directory
  auto labels = dir.path / "labels.txt";
  std::ofstream(labels) << "casual\ncasual\nneeds_caution\n";
  CliResult safety =
      run_cli("eval safety --config " + config.string() + " --in " + labels.string());
  REQUIRE(safety.exit_code == 0);
  CHECK(std::filesystem::exists(dir.path / "safety.json"));

  // no path anywhere is a usage error
  CHECK(run_cli("corpus stats").exit_code == 1);
}

TEST_CASE("--strict-skills excludes open-set annotations", "[cli]") {
  TempDir dir;
  auto subs = dir.path / "subs.jsonl";
  REQUIRE(run_cli("corpus split --in " + sample_corpus() + " --out " + subs.string() +
                  " --stride 1")
              .exit_code == 0);

  auto lenient = dir.path / "lenient.jsonl";
  CliResult keep = run_cli("annotate run --in " + subs.string() + " --out " + lenient.string() +
                           " --mock --mock-open-set-every 5 --seed 1 --json");
  REQUIRE(keep.exit_code == 0);
  nlohmann::json kept = nlohmann::json::parse(keep.out);
  CHECK(kept["entries"] == 50);
  CHECK(kept["failures"] == 0);
  CHECK(testutil::read_file(lenient).find("\"skill_resolution\":\"open_set\"") !=
        std::string::npos);

  auto strict = dir.path / "strict.jsonl";
  CliResult reject = run_cli("annotate run --in " + subs.string() + " --out " + strict.string() +
                             " --mock --mock-open-set-every 5 --seed 1 --strict-skills --json");
  REQUIRE(reject.exit_code == 0);
  nlohmann::json rejected = nlohmann::json::parse(reject.out);
  CHECK(rejected["entries"] == 40);
  CHECK(rejected["failures"] == 10);
  CHECK(testutil::read_file(strict).find("open_set") == std::string::npos);
}

TEST_CASE("--templates overrides a built-in source for export", "[cli]") {
  TempDir dir;

  // one train entry with pearl bindings
  nlohmann::json entry{
      {"id", "p-1"},
      {"source", "pearl"},
      {"social_context_text", "old text"},
      {"social_context", {{"user persona", "loves quiet space operas"}}},
      {"context", nlohmann::json::array(
                      {{{"speaker", "A"}, {"text", "any picks?"}, {"shared_image", nullptr}},
                       {{"speaker", "B"}, {"text", "thinking"}, {"shared_image", nullptr}}})},
      {"next_response", {{"speaker", "A"}, {"text", "thanks"}, {"shared_image", nullptr}}},
      {"annotations", nlohmann::json::array({{{"explanation", "they want a recommendation"},
                                              {"skill", "Recommendation"},
                                              {"skill_resolution", "canonical"}}})},
      {"split", "train"}};
  auto train = dir.path / "train.jsonl";
  std::ofstream(train) << entry.dump() << "\n";

  auto templates = dir.path / "templates.json";
  std::ofstream(templates) << nlohmann::json{{"source", "pearl"},
                                             {"variants", {"CUSTOM: {user persona}"}}}
                                  .dump();

  auto records = dir.path / "records.jsonl";
  CliResult r = run_cli("dataset export-train --in " + train.string() + " --out " +
                        records.string() + " --templates " + templates.string() + " --seed 3");
  REQUIRE(r.exit_code == 0);
  std::string exported = testutil::read_file(records);
  CHECK(exported.find("CUSTOM: loves quiet space operas") != std::string::npos);
  CHECK(exported.find(" [RESULT SKILL] Recommendation") != std::string::npos);
}

TEST_CASE("som respond --baseline omits the plan", "[cli]") {
  TempDir dir;
  auto dlg = dir.path / "dlg.json";
  {
    std::ifstream corpus(sample_corpus());
    std::string first_line;
    std::getline(corpus, first_line);
    std::ofstream(dlg) << first_line;
  }
  CliResult guided = run_cli("som respond --in " + dlg.string() + " --mock --seed 5");
  REQUIRE(guided.exit_code == 0);
  nlohmann::json g = nlohmann::json::parse(guided.out);
  CHECK_FALSE(g["som"].is_null());
  CHECK(g["response"].is_string());

  CliResult baseline = run_cli("som respond --in " + dlg.string() + " --mock --seed 5 --baseline");
  REQUIRE(baseline.exit_code == 0);
  nlohmann::json b = nlohmann::json::parse(baseline.out);
  CHECK(b["som"].is_null());

  CliResult infer = run_cli("som infer --in " + dlg.string() + " --mock --seed 5");
  REQUIRE(infer.exit_code == 0);
  CHECK(nlohmann::json::parse(infer.out).contains("explanation"));
}

TEST_CASE("som chat answers each stdin line", "[cli]") {
  CliResult r = run_cli("som chat --mock --seed 5", "hello there\nsecond message\n");
  REQUIRE(r.exit_code == 0);
  std::size_t lines = 0;
  for (char c : r.out) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 2);
  CHECK(r.out.find('[') != std::string::npos);  // skill tag prefix
}
