// skillmind - command-line front end for the skill-of-mind toolkit.
//
// Subcommands cover the whole pipeline: taxonomy inspection, corpus
// splitting/sampling, mock- or HTTP-backed annotation, dataset split and
// training-record export, skill-of-mind inference/response, and the metric
// suite. `--mock` swaps every backend for deterministic fixtures so each
// command runs offline and reproducibly for a fixed `--seed`.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skillmind/skillmind.hpp"

namespace sm = skillmind;

namespace {

struct AppConfig {
  std::uint64_t seed = 0;
  sm::BackendConfig planner;
  sm::BackendConfig responder;
  sm::BackendConfig annotator;
  sm::ClassifierBackendConfig classifier;
  std::string corpus_path;
  std::string dataset_path;
  std::string reports_path;
  bool bleu_smoothing = false;
  double rouge_beta = 1.0;
  sm::AgreementLevel alpha_level = sm::AgreementLevel::ordinal;
  sm::GuidanceConfig guidance;
};

AppConfig load_app_config(const std::string& path) {
  AppConfig cfg;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sm::IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw sm::ParseError(std::string("config: ") + e.what());
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("planner")) cfg.planner = sm::backend_config_from_json(j["planner"]);
  if (j.contains("responder")) cfg.responder = sm::backend_config_from_json(j["responder"]);
  if (j.contains("annotator")) cfg.annotator = sm::backend_config_from_json(j["annotator"]);
  if (j.contains("classifier") && j["classifier"].is_object()) {
    const auto& c = j["classifier"];
    if (c.contains("endpoint_url")) cfg.classifier.endpoint_url = c["endpoint_url"];
    if (c.contains("request_timeout_s")) cfg.classifier.request_timeout_s = c["request_timeout_s"];
    if (c.contains("max_retries")) cfg.classifier.max_retries = c["max_retries"];
    if (c.contains("retry_backoff_ms")) cfg.classifier.retry_backoff_ms = c["retry_backoff_ms"];
  }
  if (j.contains("paths") && j["paths"].is_object()) {
    const auto& p = j["paths"];
    if (p.contains("corpus")) cfg.corpus_path = p["corpus"];
    if (p.contains("dataset")) cfg.dataset_path = p["dataset"];
    if (p.contains("reports")) cfg.reports_path = p["reports"];
  }
  if (j.contains("metrics") && j["metrics"].is_object()) {
    const auto& m = j["metrics"];
    if (m.contains("bleu_smoothing")) cfg.bleu_smoothing = m["bleu_smoothing"];
    if (m.contains("rouge_beta")) cfg.rouge_beta = m["rouge_beta"];
    if (m.contains("alpha_level")) {
      auto level = sm::agreement_level_from_tag(m["alpha_level"].get<std::string>());
      if (!level) throw sm::ParseError("config: unknown alpha_level");
      cfg.alpha_level = *level;
    }
  }
  if (j.contains("guidance") && j["guidance"].is_object()) {
    const auto& g = j["guidance"];
    if (g.contains("template")) cfg.guidance.guidance_template = g["template"];
    if (g.contains("include_explanation")) {
      cfg.guidance.include_explanation = g["include_explanation"];
    }
    if (g.contains("baseline_system")) cfg.guidance.baseline_system = g["baseline_system"];
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Deterministic mock backends (--mock)
// ---------------------------------------------------------------------------

std::string pick_mock_skill(std::uint64_t seed, const std::string& content) {
  const auto& skills = sm::builtin_taxonomy().skills();
  sm::rng::Engine engine(seed, "mock-skill/" + content);
  return skills[engine.below(skills.size())].canonical_name;
}

// Mock annotator: a valid single-annotation JSON list keyed off the prompt
// content. Every `malform_every`-th item is deliberately unparseable, and
// every `open_set_every`-th names a skill outside the collection, so the
// exclusion paths can be exercised offline.
sm::Annotator make_mock_annotator(std::uint64_t seed, int malform_every, int open_set_every) {
  return [seed, malform_every, open_set_every](
             std::size_t index, const std::vector<sm::ChatMessage>& messages) -> std::string {
    if (malform_every > 0 && (index + 1) % static_cast<std::size_t>(malform_every) == 0) {
      return "mock output that is deliberately not a JSON list";
    }
    std::string skill =
        open_set_every > 0 && (index + 1) % static_cast<std::size_t>(open_set_every) == 0
            ? "Curiosity Sparking"
            : pick_mock_skill(seed, messages.back().content);
    nlohmann::json out = nlohmann::json::array();
    out.push_back(
        {{"skill", skill},
         {"explanation", "Looking at where this conversation stands, leaning on " + skill +
                             " feels like the way to keep the exchange moving."}});
    return out.dump();
  };
}

sm::MockChatBackend make_mock_planner(std::uint64_t seed) {
  return sm::MockChatBackend([seed](const std::vector<sm::ChatMessage>& messages) {
    std::string skill = pick_mock_skill(seed, messages.front().content);
    return "Given how the last turn landed, " + skill +
           " is what the next reply calls for. [RESULT SKILL] " + skill;
  });
}

sm::MockChatBackend make_mock_responder() {
  return sm::MockChatBackend([](const std::vector<sm::ChatMessage>& messages) {
    // deterministic reply that names the cued speaker
    const std::string& user = messages.back().content;
    std::size_t cue = user.rfind('\n');
    std::string speaker = cue == std::string::npos ? "" : user.substr(cue + 1);
    if (!speaker.empty() && speaker.back() == ':') speaker.pop_back();
    return speaker + ": I hear you - tell me a bit more so I can help properly.";
  });
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

bool g_json_output = false;

void emit(const nlohmann::json& machine, const std::string& human) {
  if (g_json_output) {
    std::cout << machine.dump() << "\n";
  } else {
    std::cout << human;
    if (!human.empty() && human.back() != '\n') std::cout << "\n";
  }
}

std::string one_decimal(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", value);
  return buf;
}

nlohmann::json read_json_input(const std::string& path) {
  std::string text;
  if (path == "-" || path.empty()) {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sm::IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw sm::ParseError(std::string("input: ") + e.what());
  }
}

void write_report(const std::string& path, const nlohmann::json& doc) {
  if (path.empty()) return;
  std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
  }
  std::ofstream out(target, std::ios::binary);
  if (!out) throw sm::IoError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

std::optional<std::string> social_context_for(const sm::Dialogue& dialogue, bool use_context,
                                              std::uint64_t seed) {
  if (!use_context) return std::nullopt;
  sm::RenderedContext rendered =
      sm::render_social_context(sm::builtin_registry(), dialogue.source, dialogue.social_context,
                                sm::rng::derive_seed(seed, "infer/" + dialogue.id));
  if (rendered.text.empty()) return std::nullopt;
  return rendered.text;
}

int error_exit_code(const sm::Error& e) {
  const std::string& kind = e.kind();
  if (kind == "auth" || kind == "rate_limited" || kind == "transport" ||
      kind == "malformed_response") {
    return 3;
  }
  if (kind == "bad_argument") return 1;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skill-of-mind dialogue toolkit"};
  app.fallthrough();

  std::string config_path;
  std::string templates_path;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  bool mock = false;
  bool show_version = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--templates", templates_path,
                 "JSON file of user template sets, merged over the built-ins");
  app.add_option("--seed", seed_flag, "deterministic seed (overrides config)")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_flag("--mock", mock, "replace all backends with deterministic fixtures");
  app.add_flag("--json", g_json_output, "machine-readable output");
  app.add_flag("--version", show_version, "print version and taxonomy fingerprint");

  // taxonomy --------------------------------------------------------------
  auto* taxonomy_cmd = app.add_subcommand("taxonomy", "skill catalog");
  auto* taxonomy_list = taxonomy_cmd->add_subcommand("list", "print the built-in catalog");
  auto* taxonomy_resolve = taxonomy_cmd->add_subcommand("resolve", "resolve a skill name");
  std::string resolve_name;
  bool resolve_strict = false;
  taxonomy_resolve->add_option("name", resolve_name, "skill name to resolve")->required();
  taxonomy_resolve->add_flag("--strict", resolve_strict, "treat open-set names as errors");

  // corpus ----------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "dialogue corpus operations");
  auto* corpus_split = corpus_cmd->add_subcommand("split", "one-sided sub-dialogue splitting");
  std::string split_in, split_out;
  int split_stride = 2, split_min_turns = 4;
  bool split_strict = false;
  corpus_split->add_option("--in", split_in, "corpus JSONL (default: config paths.corpus)");
  corpus_split->add_option("--out", split_out, "sub-dialogue JSONL")->required();
  corpus_split->add_option("--stride", split_stride, "pairs to step between prefixes");
  corpus_split->add_option("--min-turns", split_min_turns, "minimum context turns");
  corpus_split->add_flag("--strict-length", split_strict,
                         "fail on dialogues too short to split (default: skip)");

  auto* corpus_sample = corpus_cmd->add_subcommand("sample", "seeded proportional sampling");
  std::string sample_in, sample_out, sample_proportions;
  int sample_total = 0;
  corpus_sample->add_option("--in", sample_in, "sub-dialogue JSONL")->required();
  corpus_sample->add_option("--out", sample_out, "sampled sub-dialogue JSONL")->required();
  corpus_sample->add_option("--total", sample_total, "number of sub-dialogues to draw")
      ->required();
  corpus_sample->add_option("--proportions", sample_proportions,
                            "JSON object of source->fraction, or @file (default: uniform)");

  auto* corpus_stats_cmd = corpus_cmd->add_subcommand("stats", "corpus statistics");
  std::string stats_in;
  corpus_stats_cmd->add_option("--in", stats_in, "corpus JSONL (default: config paths.corpus)");

  // annotate ----------------------------------------------------------------
  auto* annotate_cmd = app.add_subcommand("annotate", "skill-of-mind annotation");
  auto* annotate_run = annotate_cmd->add_subcommand("run", "annotate a sub-dialogue file");
  std::string annotate_in, annotate_out, annotate_failures;
  int mock_malform_every = 0;
  annotate_run->add_option("--in", annotate_in, "sub-dialogue JSONL")->required();
  annotate_run->add_option("--out", annotate_out, "dataset JSONL (default: config paths.dataset)");
  annotate_run->add_option("--failures", annotate_failures,
                           "failure-log JSONL (default: <out>.failures.jsonl)");
  annotate_run->add_option("--mock-malform-every", mock_malform_every,
                           "with --mock, make every Nth output unparseable (0 = never)");
  int mock_open_set_every = 0;
  annotate_run->add_option("--mock-open-set-every", mock_open_set_every,
                           "with --mock, make every Nth skill an open-set name (0 = never)");
  bool strict_skills = false;
  annotate_run->add_flag("--strict-skills", strict_skills,
                         "exclude annotations whose skill is outside the collection");

  // dataset -----------------------------------------------------------------
  auto* dataset_cmd = app.add_subcommand("dataset", "dataset split and export");
  auto* dataset_split = dataset_cmd->add_subcommand("split", "train/test split");
  std::string dsplit_in, dsplit_train, dsplit_test;
  double test_fraction = 0.1;
  dataset_split->add_option("--in", dsplit_in, "dataset JSONL (default: config paths.dataset)");
  dataset_split->add_option("--out-train", dsplit_train, "train split JSONL")->required();
  dataset_split->add_option("--out-test", dsplit_test, "test split JSONL")->required();
  dataset_split->add_option("--test-fraction", test_fraction, "test fraction (default 0.1)");

  auto* dataset_export = dataset_cmd->add_subcommand("export-train", "chain-of-thought records");
  std::string export_in, export_out;
  dataset_export->add_option("--in", export_in, "train-split dataset JSONL")->required();
  dataset_export->add_option("--out", export_out, "training-record JSONL")->required();

  // som -----------------------------------------------------------------
  auto* som_cmd = app.add_subcommand("som", "skill-of-mind runtime");
  auto* som_infer = som_cmd->add_subcommand("infer", "plan a skill for a dialogue");
  std::string infer_in = "-";
  bool infer_no_context = false;
  som_infer->add_option("--in", infer_in, "dialogue JSON file ('-' for stdin)");
  som_infer->add_flag("--no-social-context", infer_no_context,
                      "plan from the transcript alone");

  auto* som_respond = som_cmd->add_subcommand("respond", "plan, then generate a guided response");
  std::string respond_in = "-";
  bool respond_no_context = false, respond_baseline = false;
  som_respond->add_option("--in", respond_in, "dialogue JSON file ('-' for stdin)");
  som_respond->add_flag("--no-social-context", respond_no_context,
                        "respond from the transcript alone");
  som_respond->add_flag("--baseline", respond_baseline, "skip the planner (no guidance)");

  auto* som_chat = som_cmd->add_subcommand("chat", "interactive guided-response loop");

  // eval ------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "metrics");
  auto* eval_skills = eval_cmd->add_subcommand("skills", "skill classification accuracy");
  std::string eval_skills_in, eval_skills_out;
  bool eval_exact = false;
  eval_skills->add_option("--in", eval_skills_in, "JSONL of {predicted:[], gold:[]}")->required();
  eval_skills->add_flag("--exact", eval_exact, "require exact set equality");
  eval_skills->add_option("--out", eval_skills_out, "write the JSON report here");

  auto* eval_text = eval_cmd->add_subcommand("text", "BLEU-1/2/4 and ROUGE-L");
  std::string eval_text_in, eval_text_out;
  bool eval_smoothing = false;
  double eval_rouge_beta = -1.0;
  eval_text->add_option("--in", eval_text_in, "JSONL of {hypothesis, references:[]}")->required();
  eval_text->add_flag("--smoothing", eval_smoothing, "add-one BLEU smoothing for orders >= 2");
  eval_text->add_option("--rouge-beta", eval_rouge_beta, "ROUGE-L beta (default 1.0)");
  eval_text->add_option("--out", eval_text_out, "write the JSON report here");

  auto* eval_distribution = eval_cmd->add_subcommand("distribution", "skill distribution");
  std::string eval_dist_in, eval_dist_out;
  int top_k = 10;
  eval_distribution->add_option("--in", eval_dist_in, "dataset JSONL")->required();
  eval_distribution->add_option("--top-k", top_k, "how many skills to report");
  eval_distribution->add_option("--out", eval_dist_out, "write the JSON report here");

  auto* eval_agreement = eval_cmd->add_subcommand("agreement", "Krippendorff's alpha");
  std::string eval_agree_in, eval_agree_out, eval_agree_level;
  eval_agreement->add_option("--in", eval_agree_in, "CSV rater,item,criterion,score")->required();
  eval_agreement->add_option("--level", eval_agree_level, "nominal | ordinal | interval");
  eval_agreement->add_option("--out", eval_agree_out, "write the JSON report here");

  auto* eval_safety = eval_cmd->add_subcommand("safety", "safety-label ratios");
  std::string eval_safety_in, eval_safety_out;
  eval_safety->add_option("--in", eval_safety_in, "one label per line")->required();
  eval_safety->add_option("--out", eval_safety_out, "write the JSON report here");

  auto* eval_h2h = eval_cmd->add_subcommand("h2h", "head-to-head preference tallies");
  std::string eval_h2h_in, eval_h2h_out;
  eval_h2h->add_option("--in", eval_h2h_in, "CSV rater,item,criterion,choice,strength")
      ->required();
  eval_h2h->add_option("--out", eval_h2h_out, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage errors exit 1 regardless of CLI11's internal code
  }

  try {
    AppConfig cfg;
    if (!config_path.empty()) cfg = load_app_config(config_path);
    if (seed_given) cfg.seed = seed_flag;
    const std::uint64_t seed = cfg.seed;
    const sm::Taxonomy& taxonomy = sm::builtin_taxonomy();
    const std::map<sm::SourceKind, sm::TemplateSet> registry =
        templates_path.empty() ? sm::builtin_registry()
                               : sm::load_template_registry(templates_path);

    // empty --in/--out fall back to the config's paths
    auto with_default = [](std::string& value, const std::string& fallback,
                           const char* what) -> std::string& {
      if (value.empty()) value = fallback;
      if (value.empty()) {
        throw sm::Error("bad_argument",
                        std::string("no ") + what + " path given (flag or config)");
      }
      return value;
    };

    if (show_version) {
      nlohmann::json j{{"version", sm::kVersion},
                       {"taxonomy_skills", taxonomy.canonical_count()},
                       {"taxonomy_fingerprint", sm::taxonomy_fingerprint(taxonomy)}};
      emit(j, std::string("skillmind ") + sm::kVersion + " (taxonomy " +
                  std::to_string(taxonomy.canonical_count()) + " skills, fingerprint " +
                  sm::taxonomy_fingerprint(taxonomy) + ")");
      return 0;
    }

    // ------------------------------------------------------------- taxonomy
    if (taxonomy_list->parsed()) {
      nlohmann::json j = sm::taxonomy_to_json(taxonomy);
      std::string human;
      for (const sm::Skill& s : taxonomy.skills()) {
        human += s.canonical_name;
        if (s.category) {
          human += "  [" + std::string(sm::category_display_name(*s.category)) + "]";
        } else {
          human += "  [extended]";
        }
        human += "\n";
      }
      emit(j, human);
      return 0;
    }
    if (taxonomy_resolve->parsed()) {
      sm::SkillMatch match = sm::resolve(taxonomy, resolve_name);
      if (resolve_strict && match.resolution == sm::SkillResolution::OpenSet) {
        throw sm::Error("open_set_rejected", "open-set skill in --strict mode: " + resolve_name);
      }
      nlohmann::json j{{"resolution", std::string(sm::resolution_tag(match.resolution))},
                       {"skill", match.skill.canonical_name},
                       {"category", match.skill.category
                                        ? nlohmann::json(std::string(
                                              sm::category_display_name(*match.skill.category)))
                                        : nlohmann::json(nullptr)}};
      std::string human = match.skill.canonical_name + " (" +
                          std::string(sm::resolution_tag(match.resolution)) + ")";
      if (match.skill.category) {
        human += " in " + std::string(sm::category_display_name(*match.skill.category));
      }
      emit(j, human);
      return 0;
    }

    // --------------------------------------------------------------- corpus
    if (corpus_split->parsed()) {
      auto dialogues = sm::load_corpus(with_default(split_in, cfg.corpus_path, "corpus input"));
      std::vector<sm::SubDialogue> subs;
      std::size_t too_short = 0;
      for (const sm::Dialogue& d : dialogues) {
        try {
          auto pieces = sm::split_one_sided(d, split_stride, split_min_turns);
          subs.insert(subs.end(), pieces.begin(), pieces.end());
        } catch (const sm::TooShortError&) {
          if (split_strict) throw;
          ++too_short;
        }
      }
      sm::save_subdialogues(subs, split_out);
      nlohmann::json j{{"dialogues", dialogues.size()},
                       {"subdialogues", subs.size()},
                       {"too_short", too_short}};
      emit(j, "wrote " + std::to_string(subs.size()) + " sub-dialogues from " +
                  std::to_string(dialogues.size()) + " dialogues (" + std::to_string(too_short) +
                  " too short)");
      return 0;
    }
    if (corpus_sample->parsed()) {
      auto subs = sm::load_subdialogues(sample_in);
      std::map<sm::SourceKind, std::vector<sm::SubDialogue>> groups;
      for (auto& s : subs) groups[s.source].push_back(std::move(s));
      std::map<sm::SourceKind, double> proportions;
      if (sample_proportions.empty()) {
        for (const auto& [source, pool] : groups) {
          proportions[source] = 1.0 / static_cast<double>(groups.size());
        }
      } else {
        nlohmann::json p;
        if (sample_proportions.front() == '@') {
          p = read_json_input(sample_proportions.substr(1));
        } else {
          try {
            p = nlohmann::json::parse(sample_proportions);
          } catch (const nlohmann::json::exception& e) {
            throw sm::ParseError(std::string("--proportions: ") + e.what());
          }
        }
        for (const auto& [tag, value] : p.items()) {
          auto source = sm::source_from_tag(tag);
          if (!source) throw sm::ParseError("unknown source tag in proportions: " + tag);
          proportions[*source] = value.get<double>();
        }
      }
      auto picked = sm::proportional_sample(groups, proportions, sample_total, seed);
      sm::save_subdialogues(picked, sample_out);
      nlohmann::json j{{"sampled", picked.size()}};
      emit(j, "sampled " + std::to_string(picked.size()) + " sub-dialogues");
      return 0;
    }
    if (corpus_stats_cmd->parsed()) {
      sm::CorpusStats stats = sm::corpus_stats(
          sm::load_corpus(with_default(stats_in, cfg.corpus_path, "corpus input")));
      nlohmann::json j = sm::corpus_stats_to_json(stats);
      std::string human = "dialogues: " + std::to_string(stats.dialogue_count) + "\n";
      for (const auto& [source, count] : stats.dialogues_per_source) {
        human += "  " + source + ": " + std::to_string(count) + " dialogues, " +
                 std::to_string(stats.subdialogues_per_source.at(source)) + " sub-dialogues\n";
      }
      emit(j, human);
      return 0;
    }

    // ------------------------------------------------------------- annotate
    if (annotate_run->parsed()) {
      auto subs = sm::load_subdialogues(annotate_in);
      std::vector<sm::AnnotateItem> items;
      items.reserve(subs.size());
      for (const sm::SubDialogue& sub : subs) {
        sm::RenderedContext rendered =
            sm::render_social_context(registry, sub.source, sub.social_context,
                                      sm::rng::derive_seed(seed, "annotate/" + sub.id()));
        items.push_back(sm::AnnotateItem{sub, rendered.text});
      }
      sm::Annotator annotator = mock ? make_mock_annotator(seed, mock_malform_every,
                                                           mock_open_set_every)
                                     : sm::make_http_annotator(cfg.annotator);
      auto [entries, failures] =
          sm::annotate_corpus(items, annotator, taxonomy, cfg.annotator.max_concurrency,
                              strict_skills);
      sm::save_dataset(entries, with_default(annotate_out, cfg.dataset_path, "dataset output"));
      std::string failure_path = annotate_failures.empty()
                                     ? annotate_out + ".failures.jsonl"
                                     : annotate_failures;
      sm::save_failure_log(failures, failure_path);
      nlohmann::json j{{"inputs", items.size()},
                       {"entries", entries.size()},
                       {"failures", failures.size()}};
      emit(j, std::to_string(entries.size()) + " entries, " + std::to_string(failures.size()) +
                  " failures (of " + std::to_string(items.size()) + " inputs)");
      return 0;
    }

    // -------------------------------------------------------------- dataset
    if (dataset_split->parsed()) {
      auto entries =
          sm::load_dataset(with_default(dsplit_in, cfg.dataset_path, "dataset input"), taxonomy);
      auto [train, test] = sm::train_test_split(std::move(entries), test_fraction, seed);
      sm::save_dataset(train, dsplit_train);
      sm::save_dataset(test, dsplit_test);
      nlohmann::json j{{"train", train.size()}, {"test", test.size()}};
      emit(j, std::to_string(train.size()) + " train / " + std::to_string(test.size()) + " test");
      return 0;
    }
    if (dataset_export->parsed()) {
      auto entries = sm::load_dataset(export_in, taxonomy);
      auto records = sm::export_training_records(entries, registry, seed);
      sm::save_training_records(records, export_out);
      nlohmann::json j{{"records", records.size()}};
      emit(j, "exported " + std::to_string(records.size()) + " training records");
      return 0;
    }

    // ------------------------------------------------------------------ som
    if (som_infer->parsed() || som_respond->parsed()) {
      bool responding = som_respond->parsed();
      sm::Dialogue dialogue =
          sm::dialogue_from_json(read_json_input(responding ? respond_in : infer_in));
      bool use_context = !(responding ? respond_no_context : infer_no_context);
      auto social = social_context_for(dialogue, use_context, seed);

      sm::GuidanceConfig guidance = cfg.guidance;
      guidance.responder = cfg.responder;

      std::optional<sm::MockChatBackend> mock_planner;
      std::optional<sm::MockChatBackend> mock_responder;
      if (mock) {
        mock_planner.emplace(make_mock_planner(seed));
        mock_responder.emplace(make_mock_responder());
      }

      if (!responding) {
        sm::SomResult som = mock ? sm::infer_som(*mock_planner, social, dialogue.turns, taxonomy)
                                 : sm::infer_som(cfg.planner, social, dialogue.turns, taxonomy);
        std::cout << sm::som_result_to_json(som).dump() << "\n";
        return 0;
      }

      sm::GuidedResponse out;
      if (mock) {
        out = sm::guided_respond(guidance, respond_baseline ? nullptr : &*mock_planner,
                                 *mock_responder, social, dialogue.turns, taxonomy);
      } else {
        std::optional<sm::HttpChatBackend> planner;
        if (!respond_baseline) planner.emplace(cfg.planner);
        sm::HttpChatBackend responder(cfg.responder);
        out = sm::guided_respond(guidance, planner ? &*planner : nullptr, responder, social,
                                 dialogue.turns, taxonomy);
      }
      nlohmann::json j{{"som", out.som ? sm::som_result_to_json(*out.som)
                                       : nlohmann::json(nullptr)},
                       {"response", out.response}};
      std::cout << j.dump() << "\n";
      return 0;
    }
    if (som_chat->parsed()) {
      sm::GuidanceConfig guidance = cfg.guidance;
      guidance.responder = cfg.responder;
      std::optional<sm::MockChatBackend> mock_planner;
      std::optional<sm::MockChatBackend> mock_responder;
      std::optional<sm::HttpChatBackend> http_planner;
      std::optional<sm::HttpChatBackend> http_responder;
      sm::ChatBackend* planner = nullptr;
      sm::ChatBackend* responder = nullptr;
      if (mock) {
        mock_planner.emplace(make_mock_planner(seed));
        mock_responder.emplace(make_mock_responder());
        planner = &*mock_planner;
        responder = &*mock_responder;
      } else {
        http_planner.emplace(cfg.planner);
        http_responder.emplace(cfg.responder);
        planner = &*http_planner;
        responder = &*http_responder;
      }
      std::vector<sm::Turn> turns;
      std::string line;
      std::cerr << "type a message per line (ctrl-d to quit)\n";
      while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        turns.push_back(sm::Turn{"User", line, {}});
        sm::GuidedResponse out =
            sm::guided_respond(guidance, planner, *responder, std::nullopt, turns, taxonomy);
        std::string tag;
        if (out.som) tag = "[" + sm::joined_skill_names(out.som->skills) + "] ";
        std::cout << tag << out.response << "\n";
        turns.push_back(sm::Turn{"Assistant", out.response, {}});
      }
      return 0;
    }

    auto report_target = [&cfg](const std::string& flag_value,
                                const char* default_name) -> std::string {
      if (!flag_value.empty()) return flag_value;
      if (cfg.reports_path.empty()) return "";
      return cfg.reports_path + "/" + default_name;
    };

    // ----------------------------------------------------------------- eval
    if (eval_skills->parsed()) {
      std::vector<sm::SkillPrediction> predictions;
      for (const auto& j : sm::detail::load_jsonl<nlohmann::json>(
               eval_skills_in, [](const nlohmann::json& x) { return x; })) {
        if (!j.contains("predicted") || !j.contains("gold")) {
          throw sm::ParseError("prediction requires \"predicted\" and \"gold\"");
        }
        sm::SkillPrediction p;
        for (const auto& name : j["predicted"]) {
          p.predicted.push_back(sm::resolve(taxonomy, name.get<std::string>()));
        }
        for (const auto& name : j["gold"]) {
          p.gold.push_back(sm::resolve(taxonomy, name.get<std::string>()));
        }
        predictions.push_back(std::move(p));
      }
      double acc = sm::skill_accuracy(
          predictions, eval_exact ? sm::AccuracyMode::ExactSet : sm::AccuracyMode::AnyOverlap);
      sm::MetricReport report{"skill_accuracy", acc,
                              nlohmann::json{{"mode", eval_exact ? "exact_set" : "any_overlap"}},
                              predictions.size()};
      nlohmann::json j = sm::metric_report_to_json(report);
      write_report(report_target(eval_skills_out, "skills.json"), j);
      emit(j, "skill accuracy: " + one_decimal(acc) + "%");
      return 0;
    }
    if (eval_text->parsed()) {
      std::vector<sm::PredictionPair> pairs;
      for (const auto& j : sm::detail::load_jsonl<nlohmann::json>(
               eval_text_in, [](const nlohmann::json& x) { return x; })) {
        if (!j.contains("hypothesis") || !j.contains("references")) {
          throw sm::ParseError("pair requires \"hypothesis\" and \"references\"");
        }
        sm::PredictionPair p;
        p.hypothesis = j["hypothesis"].get<std::string>();
        for (const auto& r : j["references"]) p.references.push_back(r.get<std::string>());
        pairs.push_back(std::move(p));
      }
      bool smoothing = eval_smoothing || cfg.bleu_smoothing;
      double beta = eval_rouge_beta > 0.0 ? eval_rouge_beta : cfg.rouge_beta;
      nlohmann::json reports = nlohmann::json::array();
      std::string human;
      for (int n : {1, 2, 4}) {
        double score = sm::bleu(pairs, n, sm::BleuOptions{smoothing});
        sm::MetricReport report{"bleu-" + std::to_string(n), score,
                                nlohmann::json{{"smoothing", smoothing}}, pairs.size()};
        reports.push_back(sm::metric_report_to_json(report));
        human += "BLEU-" + std::to_string(n) + ": " + one_decimal(score * 100.0) + "\n";
      }
      double rscore = sm::rouge_l(pairs, beta);
      sm::MetricReport rreport{"rouge-l", rscore, nlohmann::json{{"beta", beta}}, pairs.size()};
      reports.push_back(sm::metric_report_to_json(rreport));
      human += "ROUGE-L: " + one_decimal(rscore * 100.0) + "\n";
      write_report(report_target(eval_text_out, "text.json"), reports);
      emit(reports, human);
      return 0;
    }
    if (eval_distribution->parsed()) {
      auto dataset = sm::load_dataset(eval_dist_in, taxonomy);
      auto dist = sm::skill_distribution(dataset, static_cast<std::size_t>(top_k));
      nlohmann::json j = nlohmann::json::array();
      std::string human;
      for (const auto& d : dist) {
        j.push_back({{"skill", d.skill}, {"count", d.count}, {"percentage", d.percentage}});
        human += d.skill + ": " + one_decimal(d.percentage) + "% (" + std::to_string(d.count) +
                 ")\n";
      }
      write_report(report_target(eval_dist_out, "distribution.json"), j);
      emit(j, human);
      return 0;
    }
    if (eval_agreement->parsed()) {
      sm::AgreementLevel level = cfg.alpha_level;
      if (!eval_agree_level.empty()) {
        auto parsed = sm::agreement_level_from_tag(eval_agree_level);
        if (!parsed) throw sm::ParseError("unknown --level: " + eval_agree_level);
        level = *parsed;
      }
      auto matrices = sm::load_ratings_csv(eval_agree_in, level);
      if (matrices.empty()) throw sm::EmptyInputError("eval agreement");
      nlohmann::json criteria = nlohmann::json::object();
      std::string human;
      sm::RatingMatrix pooled(level);
      for (const auto& [criterion, matrix] : matrices) {
        double alpha = sm::krippendorff_alpha(matrix);
        criteria[criterion] = alpha;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", alpha);
        human += criterion + ": " + buf + "\n";
        for (const auto& [item, values] : matrix.items()) {
          for (std::size_t i = 0; i < values.size(); ++i) {
            pooled.add("r" + std::to_string(i), criterion + "/" + item, values[i]);
          }
        }
      }
      double overall = sm::krippendorff_alpha(pooled);
      const char* level_tag = level == sm::AgreementLevel::nominal
                                  ? "nominal"
                                  : (level == sm::AgreementLevel::ordinal ? "ordinal"
                                                                          : "interval");
      nlohmann::json j{{"level", level_tag}, {"criteria", criteria}, {"overall", overall}};
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", overall);
      human += std::string("overall: ") + buf + "\n";
      write_report(report_target(eval_agree_out, "agreement.json"), j);
      emit(j, human);
      return 0;
    }
    if (eval_safety->parsed()) {
      sm::SafetyRatios r = sm::safety_ratio(sm::load_safety_labels(eval_safety_in));
      nlohmann::json j{{"casual", r.casual_pct},
                       {"needs_caution", r.caution_pct},
                       {"needs_intervention", r.intervention_pct},
                       {"degeneration", r.degeneration_pct}};
      std::string human = "casual: " + one_decimal(r.casual_pct) + "\n" +
                          "caution: " + one_decimal(r.caution_pct) + "\n" +
                          "intervention: " + one_decimal(r.intervention_pct) + "\n" +
                          "degeneration: " + one_decimal(r.degeneration_pct) + "\n";
      write_report(report_target(eval_safety_out, "safety.json"), j);
      emit(j, human);
      return 0;
    }
    if (eval_h2h->parsed()) {
      auto rows = sm::head_to_head(sm::load_preferences_csv(eval_h2h_in));
      nlohmann::json j = nlohmann::json::array();
      std::string human;
      for (const auto& row : rows) {
        j.push_back({{"criterion", std::string(sm::criterion_tag(row.criterion))},
                     {"a_pct", row.a_pct},
                     {"b_pct", row.b_pct},
                     {"votes", row.votes},
                     {"definite_a", row.definite_a},
                     {"slight_a", row.slight_a},
                     {"slight_b", row.slight_b},
                     {"definite_b", row.definite_b}});
        human += std::string(sm::criterion_tag(row.criterion)) + ": A " +
                 one_decimal(row.a_pct) + " / B " + one_decimal(row.b_pct) + "\n";
      }
      write_report(report_target(eval_h2h_out, "h2h.json"), j);
      emit(j, human);
      return 0;
    }

    std::cerr << app.help() << "\n";
    return 1;
  } catch (const sm::Error& e) {
    if (g_json_output) {
      std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    } else {
      std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
    }
    return error_exit_code(e);
  } catch (const std::exception& e) {
    if (g_json_output) {
      std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return 2;
  }
}
