#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbt/dataset.hpp"
#include "mbt/gateway.hpp"
#include "mbt/metrics.hpp"
#include "mbt/prompts.hpp"
#include "mbt/records.hpp"

namespace mbt {

/// Trims whitespace and punctuation, case-folds, and accepts exactly "yes" or "no".
std::optional<bool> parse_yes_no(std::string_view reply);

/// First standalone number in the reply; only an integer in [0, 5] is accepted.
std::optional<int> parse_score(std::string_view reply);

struct PrefixMatch {
  std::size_t effective_chars = 0;
  bool exact = true;

  bool operator==(const PrefixMatch&) const = default;
};

/// Compares whitespace-collapsed strings. A prefix yields its code-point length;
/// otherwise the longest common prefix length with exact=false.
PrefixMatch match_prefix(std::string_view full, std::string_view returned);

struct JudgeContext {
  const Gateway& gateway;
  const TemplateLibrary& templates;
  std::string model;
  Sampling sampling{0.0, 1.0, 32768, std::nullopt};
};

struct InclusionVerdict {
  bool inclusive = false;
  std::string raw_reply;
};

struct TruncationVerdict {
  TruncationResult result;
  std::vector<std::string> flags;
  std::string raw_reply;
};

struct MetacognitionVerdict {
  int score = 0;
  std::string raw_reply;
};

struct CorrectnessVerdict {
  bool correct = false;
  std::string method;  // empty, exact, judge, em_fallback
  bool flagged = false;
  std::string raw_reply;
};

// Each judge throws JudgeParseError when the reply is unusable after one re-ask.
InclusionVerdict judge_answer_inclusion(const JudgeContext& ctx, const QAExample& example,
                                        std::string_view trace_text);
TruncationVerdict judge_truncation(const JudgeContext& ctx, std::string_view trace_text,
                                   TruncationMode mode);
MetacognitionVerdict judge_metacognition(const JudgeContext& ctx, std::string_view trace_text);
CorrectnessVerdict judge_correctness(const JudgeContext& ctx, const QAExample& example,
                                     std::string_view prediction);

/// `<run>/verdicts.jsonl`, keyed by (example_id, run_id, kind).
class VerdictStore {
public:
  explicit VerdictStore(std::filesystem::path run_dir);
  std::filesystem::path file() const { return dir_ / "verdicts.jsonl"; }

  const std::vector<VerdictRecord>& verdicts() const noexcept { return verdicts_; }
  const VerdictRecord* find(std::string_view example_id, std::string_view run_id,
                            JudgeKind kind) const;

  /// Replaces verdicts with the same key and rewrites the file ordered by the
  /// position of example_id in `order`, then by kind.
  void merge(std::span<const VerdictRecord> incoming, std::span<const std::string> order);

  static std::vector<VerdictRecord> read(const std::filesystem::path& run_dir);

private:
  std::filesystem::path dir_;
  std::vector<VerdictRecord> verdicts_;
};

struct JudgeRunOptions {
  std::set<JudgeKind> kinds{JudgeKind::inclusion, JudgeKind::overthinking,
                            JudgeKind::underthinking, JudgeKind::metacognition,
                            JudgeKind::correctness};
  CorrectnessCriterion criterion = CorrectnessCriterion::llm;
  std::size_t concurrency = 8;
};

std::set<JudgeKind> parse_judge_kinds(std::string_view csv);

/// Judges every record. Overthinking runs only on correct records, underthinking
/// only on incorrect ones; with the llm criterion correctness is judged first.
/// Verdicts already present in `existing` are reused rather than re-requested.
std::vector<VerdictRecord> run_judges(std::span<const TraceRecord> records,
                                      const std::map<std::string, QAExample, std::less<>>& examples,
                                      const JudgeContext& ctx, const JudgeRunOptions& options,
                                      const VerdictStore* existing = nullptr);

}  // namespace mbt
