#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "skillmind/annotation.hpp"
#include "skillmind/errors.hpp"
#include "skillmind/taxonomy.hpp"

namespace skillmind {

struct EmptyInputError : Error {
  explicit EmptyInputError(const std::string& what_for)
      : Error("empty_input", what_for + " requires non-empty input") {}
};

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

/// Lowercases, splits on whitespace, and breaks punctuation into standalone
/// tokens. Bytes outside ASCII are kept inside word tokens untouched.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && !std::isalnum(c)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// BLEU / ROUGE-L
// ---------------------------------------------------------------------------

struct PredictionPair {
  std::string hypothesis;
  std::vector<std::string> references;  // non-empty
};

struct BleuOptions {
  bool smoothing = false;  // add-one on numerator and denominator, orders >= 2
};

namespace detail {

// n-grams packed as token spans joined with '\x1f' for cheap map keys.
inline std::map<std::string, int> packed_ngram_counts(const std::vector<std::string>& tokens,
                                                      int order) {
  std::map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < order; ++k) {
      key.push_back('\x1f');
      key += tokens[i + k];
    }
    counts[key] += 1;
  }
  return counts;
}

}  // namespace detail

/// Corpus-level BLEU-n. Modified k-gram precisions (clipped against the
/// per-gram maximum over references) combined by geometric mean, scaled by
/// the brevity penalty exp(1 - r/c) when the hypothesis corpus is shorter
/// than the effective reference length (closest length per pair, ties to the
/// shorter). An order with no hypothesis k-grams at all counts as vacuously
/// perfect, so identical corpora score 1.0 at every n.
inline double bleu(const std::vector<PredictionPair>& pairs, int max_order,
                   BleuOptions options = {}) {
  if (pairs.empty()) throw EmptyInputError("bleu");
  if (max_order < 1) throw Error("bad_argument", "bleu order must be >= 1");
  std::vector<long long> numerator(static_cast<std::size_t>(max_order) + 1, 0);
  std::vector<long long> denominator(static_cast<std::size_t>(max_order) + 1, 0);
  long long hyp_total = 0;
  long long ref_effective = 0;
  for (const PredictionPair& pair : pairs) {
    if (pair.references.empty()) throw EmptyInputError("bleu references");
    std::vector<std::string> hyp = tokenize(pair.hypothesis);
    std::vector<std::vector<std::string>> refs;
    refs.reserve(pair.references.size());
    for (const std::string& r : pair.references) refs.push_back(tokenize(r));

    hyp_total += static_cast<long long>(hyp.size());
    long long best_len = static_cast<long long>(refs.front().size());
    for (const auto& ref : refs) {
      auto len = static_cast<long long>(ref.size());
      auto hyp_len = static_cast<long long>(hyp.size());
      long long d_new = std::llabs(len - hyp_len), d_old = std::llabs(best_len - hyp_len);
      if (d_new < d_old || (d_new == d_old && len < best_len)) best_len = len;
    }
    ref_effective += best_len;

    for (int order = 1; order <= max_order; ++order) {
      auto hyp_counts = detail::packed_ngram_counts(hyp, order);
      std::map<std::string, int> ref_max;
      for (const auto& ref : refs) {
        for (const auto& [gram, count] : detail::packed_ngram_counts(ref, order)) {
          int& slot = ref_max[gram];
          slot = std::max(slot, count);
        }
      }
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_max.find(gram);
        numerator[order] += std::min<long long>(count, it == ref_max.end() ? 0 : it->second);
        denominator[order] += count;
      }
    }
  }

  double log_precision_sum = 0.0;
  for (int order = 1; order <= max_order; ++order) {
    double p;
    if (denominator[order] == 0) {
      p = 1.0;
    } else if (options.smoothing && order >= 2) {
      p = (static_cast<double>(numerator[order]) + 1.0) /
          (static_cast<double>(denominator[order]) + 1.0);
    } else {
      p = static_cast<double>(numerator[order]) / static_cast<double>(denominator[order]);
    }
    if (p <= 0.0) return 0.0;
    log_precision_sum += std::log(p) / max_order;
  }
  if (hyp_total == 0) return 0.0;
  double brevity = 1.0;
  if (hyp_total < ref_effective) {
    brevity = std::exp(1.0 - static_cast<double>(ref_effective) / static_cast<double>(hyp_total));
  }
  return brevity * std::exp(log_precision_sum);
}

/// Mean per-pair ROUGE-L F(beta) over the best reference. beta=1 is balanced
/// F1; larger beta weights recall.
inline double rouge_l(const std::vector<PredictionPair>& pairs, double beta = 1.0) {
  if (pairs.empty()) throw EmptyInputError("rouge_l");
  double total = 0.0;
  for (const PredictionPair& pair : pairs) {
    if (pair.references.empty()) throw EmptyInputError("rouge_l references");
    std::vector<std::string> hyp = tokenize(pair.hypothesis);
    double best = 0.0;
    for (const std::string& reference : pair.references) {
      std::vector<std::string> ref = tokenize(reference);
      // Two-row LCS table.
      std::vector<int> prev(ref.size() + 1, 0), curr(ref.size() + 1, 0);
      for (std::size_t i = 1; i <= hyp.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
          curr[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1
                                             : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
        std::fill(curr.begin(), curr.end(), 0);
      }
      int lcs = prev[ref.size()];
      double precision = hyp.empty() ? 0.0 : static_cast<double>(lcs) / hyp.size();
      double recall = ref.empty() ? 0.0 : static_cast<double>(lcs) / ref.size();
      double b2 = beta * beta;
      double f = 0.0;
      if (recall + b2 * precision > 0.0) {
        f = (1.0 + b2) * precision * recall / (recall + b2 * precision);
      }
      best = std::max(best, f);
    }
    total += best;
  }
  return total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Skill metrics
// ---------------------------------------------------------------------------

struct SkillPrediction {
  std::vector<SkillMatch> predicted;
  std::vector<SkillMatch> gold;  // non-empty
};

enum class AccuracyMode {
  AnyOverlap,  // hit when any predicted key is in the gold set
  ExactSet,    // predicted and gold key sets must be equal
};

inline double skill_accuracy(const std::vector<SkillPrediction>& predictions,
                             AccuracyMode mode = AccuracyMode::AnyOverlap) {
  if (predictions.empty()) throw EmptyInputError("skill_accuracy");
  std::size_t correct = 0;
  for (const SkillPrediction& p : predictions) {
    if (p.gold.empty()) throw EmptyInputError("skill_accuracy gold set");
    std::set<std::string> gold_keys, predicted_keys;
    for (const SkillMatch& g : p.gold) gold_keys.insert(g.skill.key);
    for (const SkillMatch& m : p.predicted) predicted_keys.insert(m.skill.key);
    bool hit;
    if (mode == AccuracyMode::ExactSet) {
      hit = !predicted_keys.empty() && predicted_keys == gold_keys;
    } else {
      hit = std::any_of(predicted_keys.begin(), predicted_keys.end(),
                        [&](const std::string& k) { return gold_keys.count(k) > 0; });
    }
    if (hit) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

struct DistributionEntry {
  std::string skill;
  std::size_t count = 0;
  double percentage = 0.0;
};

/// Counts every annotation across the dataset and returns the top_k skills by
/// share of all annotations, ties broken alphabetically.
inline std::vector<DistributionEntry> skill_distribution(const std::vector<DatasetEntry>& dataset,
                                                         std::size_t top_k) {
  if (dataset.empty()) throw EmptyInputError("skill_distribution");
  std::map<std::string, DistributionEntry> by_name;
  std::size_t total = 0;
  for (const DatasetEntry& entry : dataset) {
    for (const AnnotationRecord& a : entry.annotations) {
      DistributionEntry& d = by_name[a.skill.skill.canonical_name];
      d.skill = a.skill.skill.canonical_name;
      d.count += 1;
      ++total;
    }
  }
  std::vector<DistributionEntry> out;
  out.reserve(by_name.size());
  for (auto& [name, entry] : by_name) {
    entry.percentage = 100.0 * static_cast<double>(entry.count) / static_cast<double>(total);
    out.push_back(entry);
  }
  std::stable_sort(out.begin(), out.end(), [](const DistributionEntry& a, const DistributionEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.skill < b.skill;
  });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha
// ---------------------------------------------------------------------------

enum class AgreementLevel { nominal, ordinal, interval };

inline std::optional<AgreementLevel> agreement_level_from_tag(std::string_view tag) {
  if (tag == "nominal") return AgreementLevel::nominal;
  if (tag == "ordinal") return AgreementLevel::ordinal;
  if (tag == "interval") return AgreementLevel::interval;
  return std::nullopt;
}

struct UndefinedAlphaError : Error {
  UndefinedAlphaError() : Error("undefined_alpha", "no item carries two or more ratings") {}
};

/// Rater-by-item Likert ratings (4-point scale). Each (rater, item) cell
/// holds at most one score; missing cells are simply absent, and items with
/// fewer than two ratings do not enter the statistic.
class RatingMatrix {
 public:
  explicit RatingMatrix(AgreementLevel level = AgreementLevel::ordinal) : level_(level) {}

  void add(const std::string& rater, const std::string& item, int score) {
    if (score < 1 || score > 4) {
      throw Error("bad_rating", "rating " + std::to_string(score) + " outside [1, 4]");
    }
    if (!cells_.emplace(rater + "\x1f" + item, score).second) {
      throw Error("duplicate_rating", "duplicate rating for (" + rater + ", " + item + ")");
    }
    ratings_[item].push_back(score);
    raters_.insert(rater);
  }

  AgreementLevel level() const { return level_; }
  void set_level(AgreementLevel level) { level_ = level; }
  std::size_t item_count() const { return ratings_.size(); }
  std::size_t rater_count() const { return raters_.size(); }

  const std::map<std::string, std::vector<int>>& items() const { return ratings_; }

 private:
  AgreementLevel level_;
  std::map<std::string, int> cells_;  // "rater\x1fitem" -> score
  std::map<std::string, std::vector<int>> ratings_;
  std::set<std::string> raters_;
};

/// alpha = 1 - D_o / D_e over the coincidence matrix, with nominal, ordinal
/// (marginal-rank distance), or interval (squared difference) metrics.
/// All ratings identical yields 1.0 by convention.
inline double krippendorff_alpha(const RatingMatrix& matrix) {
  // Coincidence matrix over pairable values: each unit with m >= 2 ratings
  // contributes count_c * count_k (c != k) and count_c * (count_c - 1)
  // (c == k) ordered pairs, each weighted by 1 / (m - 1).
  std::map<std::pair<int, int>, double> coincidence;
  std::map<int, double> marginal;
  double n = 0.0;
  for (const auto& [item, values] : matrix.items()) {
    if (values.size() < 2) continue;
    double m = static_cast<double>(values.size());
    std::map<int, int> counts;
    for (int v : values) counts[v] += 1;
    for (const auto& [a, ca] : counts) {
      for (const auto& [b, cb] : counts) {
        double pairs = a == b ? static_cast<double>(ca) * (ca - 1) : static_cast<double>(ca) * cb;
        if (pairs > 0.0) coincidence[{a, b}] += pairs / (m - 1.0);
      }
      marginal[a] += ca;
      n += ca;
    }
  }
  if (n < 2.0) throw UndefinedAlphaError{};

  auto delta_sq = [&](int a, int b) -> double {
    if (a == b) return 0.0;
    switch (matrix.level()) {
      case AgreementLevel::nominal:
        return 1.0;
      case AgreementLevel::interval: {
        double d = static_cast<double>(a) - static_cast<double>(b);
        return d * d;
      }
      case AgreementLevel::ordinal: {
        int lo = std::min(a, b), hi = std::max(a, b);
        double d = 0.0;
        for (const auto& [value, count] : marginal) {
          if (value > lo && value < hi) d += count;
        }
        auto at = [&](int v) { return marginal.count(v) ? marginal.at(v) : 0.0; };
        d += at(lo) / 2.0 + at(hi) / 2.0;
        return d * d;
      }
    }
    return 0.0;
  };

  double observed = 0.0;
  for (const auto& [pair, weight] : coincidence) {
    observed += weight * delta_sq(pair.first, pair.second);
  }
  observed /= n;

  double expected = 0.0;
  for (const auto& [a, ca] : marginal) {
    for (const auto& [b, cb] : marginal) {
      if (a == b) continue;
      expected += ca * cb * delta_sq(a, b);
    }
  }
  expected /= n * (n - 1.0);

  if (expected == 0.0) return 1.0;
  return 1.0 - observed / expected;
}

// ---------------------------------------------------------------------------
// Safety-label ratios
// ---------------------------------------------------------------------------

enum class SafetyLabel { casual, needs_caution, needs_intervention, degenerate };

inline std::optional<SafetyLabel> safety_label_from_tag(std::string_view tag) {
  if (tag == "casual") return SafetyLabel::casual;
  if (tag == "needs_caution") return SafetyLabel::needs_caution;
  if (tag == "needs_intervention") return SafetyLabel::needs_intervention;
  if (tag == "degenerate") return SafetyLabel::degenerate;
  return std::nullopt;
}

struct SafetyRatios {
  double casual_pct = 0.0;
  double caution_pct = 0.0;
  double intervention_pct = 0.0;
  double degeneration_pct = 0.0;  // 100 minus the sum of the other three
};

inline SafetyRatios safety_ratio(const std::vector<SafetyLabel>& labels) {
  if (labels.empty()) throw EmptyInputError("safety_ratio");
  double total = static_cast<double>(labels.size());
  std::size_t casual = 0, caution = 0, intervention = 0;
  for (SafetyLabel label : labels) {
    if (label == SafetyLabel::casual) ++casual;
    if (label == SafetyLabel::needs_caution) ++caution;
    if (label == SafetyLabel::needs_intervention) ++intervention;
  }
  SafetyRatios r;
  r.casual_pct = 100.0 * casual / total;
  r.caution_pct = 100.0 * caution / total;
  r.intervention_pct = 100.0 * intervention / total;
  r.degeneration_pct = 100.0 - (r.casual_pct + r.caution_pct + r.intervention_pct);
  return r;
}

// ---------------------------------------------------------------------------
// Head-to-head preferences
// ---------------------------------------------------------------------------

enum class PreferenceCriterion { naturalness, specificity, consistency, engagingness, overall };

inline std::string_view criterion_tag(PreferenceCriterion c) {
  switch (c) {
    case PreferenceCriterion::naturalness: return "naturalness";
    case PreferenceCriterion::specificity: return "specificity";
    case PreferenceCriterion::consistency: return "consistency";
    case PreferenceCriterion::engagingness: return "engagingness";
    case PreferenceCriterion::overall: return "overall";
  }
  return "overall";
}

inline std::optional<PreferenceCriterion> criterion_from_tag(std::string_view tag) {
  for (PreferenceCriterion c :
       {PreferenceCriterion::naturalness, PreferenceCriterion::specificity,
        PreferenceCriterion::consistency, PreferenceCriterion::engagingness,
        PreferenceCriterion::overall}) {
    if (criterion_tag(c) == tag) return c;
  }
  return std::nullopt;
}

enum class PreferenceSide { A, B };
enum class PreferenceStrength { definite, slight };

struct PreferenceRecord {
  std::string item;
  std::string rater;
  PreferenceCriterion criterion = PreferenceCriterion::overall;
  PreferenceSide choice = PreferenceSide::A;
  PreferenceStrength strength = PreferenceStrength::definite;
};

struct HeadToHeadRow {
  PreferenceCriterion criterion;
  std::size_t votes = 0;
  std::size_t definite_a = 0, slight_a = 0, slight_b = 0, definite_b = 0;
  double a_pct = 0.0;
  double b_pct = 0.0;
};

/// Per-criterion win percentages. Slight and definite choices each count as
/// one vote; strengths are tallied for the report but not weighted.
inline std::vector<HeadToHeadRow> head_to_head(const std::vector<PreferenceRecord>& records) {
  if (records.empty()) throw EmptyInputError("head_to_head");
  std::map<PreferenceCriterion, HeadToHeadRow> rows;
  for (const PreferenceRecord& r : records) {
    HeadToHeadRow& row = rows[r.criterion];
    row.criterion = r.criterion;
    row.votes += 1;
    if (r.choice == PreferenceSide::A) {
      (r.strength == PreferenceStrength::definite ? row.definite_a : row.slight_a) += 1;
    } else {
      (r.strength == PreferenceStrength::definite ? row.definite_b : row.slight_b) += 1;
    }
  }
  std::vector<HeadToHeadRow> out;
  for (auto& [criterion, row] : rows) {
    double a = static_cast<double>(row.definite_a + row.slight_a);
    row.a_pct = 100.0 * a / static_cast<double>(row.votes);
    row.b_pct = 100.0 - row.a_pct;
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// External classifier interface
// ---------------------------------------------------------------------------

struct ClassifierBackendConfig {
  std::string endpoint_url;
  double request_timeout_s = 30.0;
  int max_retries = 2;
  int retry_backoff_ms = 1000;
  int max_concurrency = 4;
};

struct UnknownLabelError : Error {
  explicit UnknownLabelError(const std::string& label)
      : Error("unknown_label", "label outside the task's label set: " + label) {}
};

inline const std::vector<std::string>& task_label_set(std::string_view task) {
  static const std::vector<std::string> safety{"casual", "needs_caution", "needs_intervention"};
  static const std::vector<std::string> open{};
  if (task == "safety") return safety;
  return open;  // emotion/intent label sets are model-defined
}

inline std::string validate_label(std::string_view task, std::string label) {
  const auto& allowed = task_label_set(task);
  if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), label) == allowed.end()) {
    throw UnknownLabelError(label);
  }
  return label;
}

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string classify(const std::string& text, std::string_view task) = 0;
};

/// POSTs {"task", "text"} to the configured endpoint and validates the label
/// against the task's label set (safety is closed; emotion/intent are open).
class HttpClassifier : public Classifier {
 public:
  explicit HttpClassifier(ClassifierBackendConfig config) : config_(std::move(config)) {}

  std::string classify(const std::string& text, std::string_view task) override {
    detail::SplitUrl url = detail::split_endpoint_url(config_.endpoint_url);
    httplib::Client client(url.base);
    auto timeout =
        std::chrono::milliseconds(static_cast<long long>(config_.request_timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    nlohmann::json body{{"task", std::string(task)}, {"text", text}};
    int backoff_ms = config_.retry_backoff_ms;
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      httplib::Result res = client.Post(url.path_prefix.empty() ? "/" : url.path_prefix,
                                        body.dump(), "application/json");
      if (!res) {
        last_failure = "connection failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw MalformedResponseError(std::string("classifier response is not JSON: ") + e.what());
      }
      if (!j.contains("label") || !j["label"].is_string()) {
        throw MalformedResponseError("classifier response missing \"label\"");
      }
      return validate_label(task, j["label"].get<std::string>());
    }
    throw TransportError(last_failure + " after " + std::to_string(config_.max_retries + 1) +
                         " attempts");
  }

 private:
  ClassifierBackendConfig config_;
};

/// Fixture-backed classifier: exact text matches first, otherwise the default
/// label for the task.
class MockClassifier : public Classifier {
 public:
  MockClassifier() = default;
  explicit MockClassifier(std::map<std::string, std::string> fixture)
      : fixture_(std::move(fixture)) {}

  std::string classify(const std::string& text, std::string_view task) override {
    auto it = fixture_.find(text);
    if (it != fixture_.end()) return validate_label(task, it->second);
    return validate_label(task, task == "safety" ? "casual" : "neutral");
  }

 private:
  std::map<std::string, std::string> fixture_;
};

inline std::string classify(const ClassifierBackendConfig& backend, const std::string& text,
                            std::string_view task) {
  HttpClassifier classifier(backend);
  return classifier.classify(text, task);
}

// ---------------------------------------------------------------------------
// Imports and reports
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim_copy(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::vector<std::vector<std::string>> load_csv(const std::filesystem::path& path,
                                                      const std::string& expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != expected_header) {
        throw ParseError(1, "expected header \"" + expected_header + "\", got \"" + line + "\"");
      }
      continue;
    }
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace detail

/// CSV "rater,item,criterion,score" -> one RatingMatrix per criterion.
inline std::map<std::string, RatingMatrix> load_ratings_csv(const std::filesystem::path& path,
                                                            AgreementLevel level) {
  std::map<std::string, RatingMatrix> matrices;
  std::size_t row_no = 1;
  for (const auto& row : detail::load_csv(path, "rater,item,criterion,score")) {
    ++row_no;
    if (row.size() != 4) throw ParseError(row_no, "expected 4 fields");
    int score;
    try {
      score = std::stoi(row[3]);
    } catch (const std::exception&) {
      throw ParseError(row_no, "score is not an integer: " + row[3]);
    }
    auto [it, inserted] = matrices.try_emplace(row[2], level);
    try {
      it->second.add(row[0], row[1], score);
    } catch (const Error& e) {
      throw ParseError(row_no, e.what());
    }
  }
  return matrices;
}

/// CSV "rater,item,criterion,choice,strength" with choice in {A, B} and
/// strength in {definite, slight}. One record per (item, criterion, rater).
inline std::vector<PreferenceRecord> load_preferences_csv(const std::filesystem::path& path) {
  std::vector<PreferenceRecord> records;
  std::set<std::string> seen;
  std::size_t row_no = 1;
  for (const auto& row : detail::load_csv(path, "rater,item,criterion,choice,strength")) {
    ++row_no;
    if (row.size() != 5) throw ParseError(row_no, "expected 5 fields");
    if (!seen.insert(row[0] + "\x1f" + row[1] + "\x1f" + row[2]).second) {
      throw ParseError(row_no, "duplicate record for (" + row[1] + ", " + row[2] + ", " +
                                   row[0] + ")");
    }
    PreferenceRecord r;
    r.rater = row[0];
    r.item = row[1];
    auto criterion = criterion_from_tag(row[2]);
    if (!criterion) throw ParseError(row_no, "unknown criterion: " + row[2]);
    r.criterion = *criterion;
    if (row[3] == "A") {
      r.choice = PreferenceSide::A;
    } else if (row[3] == "B") {
      r.choice = PreferenceSide::B;
    } else {
      throw ParseError(row_no, "choice must be A or B, got: " + row[3]);
    }
    if (row[4] == "definite") {
      r.strength = PreferenceStrength::definite;
    } else if (row[4] == "slight") {
      r.strength = PreferenceStrength::slight;
    } else {
      throw ParseError(row_no, "strength must be definite or slight, got: " + row[4]);
    }
    records.push_back(std::move(r));
  }
  return records;
}

/// One label per line: casual | needs_caution | needs_intervention | degenerate.
inline std::vector<SafetyLabel> load_safety_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<SafetyLabel> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string tag = trim_copy(line);
    if (tag.empty()) continue;
    auto label = safety_label_from_tag(tag);
    if (!label) throw ParseError(line_no, "unknown safety label: " + tag);
    labels.push_back(*label);
  }
  return labels;
}

struct MetricReport {
  std::string metric;
  double value = 0.0;
  nlohmann::json config = nlohmann::json::object();
  std::size_t n = 0;
};

inline nlohmann::json metric_report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["metric"] = report.metric;
  j["value"] = report.value;
  j["config"] = report.config;
  j["n"] = report.n;
  return j;
}

}  // namespace skillmind
