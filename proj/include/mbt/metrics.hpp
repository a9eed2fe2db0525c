#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbt/records.hpp"

namespace mbt {

/// Case-fold, punctuation to space, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

bool exact_match(std::string_view pred, std::string_view gold);

/// Token-level F1 over normalized whitespace tokens (multiset overlap).
double token_f1(std::string_view pred, std::string_view gold);

/// True iff the normalized gold answer occurs contiguously in the normalized trace.
bool substring_match(std::string_view trace_text, std::string_view gold);

struct AesWeights {
  double alpha = 1.0;
  double beta = 3.0;
  double gamma = 5.0;
};

struct AesPoint {
  double mean_len = 0.0;
  double acc = 0.0;  // percentage
};

/// alpha * dLen + beta * |dAcc| when accuracy did not drop, alpha * dLen - gamma * |dAcc|
/// otherwise; both deltas relative to `base`. Throws DomainError for non-positive base values.
double aes(const AesPoint& base, const AesPoint& method, const AesWeights& w = {});

/// Mean truncation score; nullopt for an empty list. Throws DomainError on mixed modes.
std::optional<double> xi_score(std::span<const TruncationResult> truncations);

/// Len of one record: reported completion tokens, else ceil(char_count / 4).
double record_length(const TraceRecord& r);

struct SubsetMean {
  std::optional<double> mean;
  std::size_t count = 0;

  bool operator==(const SubsetMean&) const = default;
};

struct LengthStats {
  SubsetMean overall;
  SubsetMean correct;
  SubsetMean incorrect;
  SubsetMean valid;  // not degenerated

  bool operator==(const LengthStats&) const = default;
};

using CorrectnessMap = std::map<std::string, bool, std::less<>>;

/// Throws DomainError naming the first record without a correctness entry.
LengthStats length_stats(std::span<const TraceRecord> records, const CorrectnessMap& correctness);

enum class CorrectnessCriterion { llm, em };
std::string_view to_string(CorrectnessCriterion c) noexcept;
CorrectnessCriterion parse_criterion(std::string_view s);

struct MetricReport {
  std::string run_id;
  std::string label;
  std::string dataset;
  CorrectnessCriterion criterion = CorrectnessCriterion::llm;
  std::size_t n = 0;

  double em = 0.0;  // percentages
  double f1 = 0.0;
  std::optional<double> llm_acc;

  std::optional<double> substring_correct;
  std::optional<double> substring_incorrect;
  std::optional<double> inclusion_correct;
  std::optional<double> inclusion_incorrect;

  std::size_t degen_count = 0;
  std::size_t missing_tag_count = 0;
  LengthStats lengths;

  std::optional<double> xi_ot;
  std::optional<double> xi_ut;
  std::optional<double> meta_avg;

  // Keys: em, f1, llm. A key is absent when its inputs are.
  std::map<std::string, double> aes_by_metric;

  // Verdicts left out of statistics, per judge kind; plus correctness fallbacks.
  std::map<std::string, std::size_t> exclusions;
  std::size_t correctness_fallbacks = 0;

  bool operator==(const MetricReport&) const = default;
};

nlohmann::ordered_json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

struct AggregateOptions {
  std::string label;
  std::string dataset;
  CorrectnessCriterion criterion = CorrectnessCriterion::llm;
  AesWeights weights;
  bool require_aes = false;
};

/// Per-record correctness under `criterion`. With llm, every record needs a
/// usable correctness verdict (DomainError otherwise).
CorrectnessMap correctness_of(std::span<const TraceRecord> records,
                              std::span<const VerdictRecord> verdicts,
                              CorrectnessCriterion criterion);

/// Fills a MetricReport for one run. AES is computed against `baseline` when given.
MetricReport aggregate(std::span<const TraceRecord> records, std::span<const VerdictRecord> verdicts,
                       const AggregateOptions& options, const MetricReport* baseline = nullptr);

/// Recomputes aes_by_metric of `report` against `baseline`.
void apply_aes(MetricReport& report, const MetricReport& baseline, const AesWeights& w = {});

}  // namespace mbt
