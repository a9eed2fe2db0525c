#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbt/gateway.hpp"

namespace mbt {

enum class ExtractionStatus { tagged, missing_tags, degenerated };
enum class TraceMode { base, metaprompt, sft_model };

std::string_view to_string(ExtractionStatus s) noexcept;
std::string_view to_string(TraceMode m) noexcept;
ExtractionStatus parse_extraction_status(std::string_view s);
TraceMode parse_trace_mode(std::string_view s);

struct Prediction {
  std::string answer_text;
  ExtractionStatus status = ExtractionStatus::missing_tags;

  bool operator==(const Prediction&) const = default;
};

/// One student generation.
struct TraceRecord {
  std::string example_id;
  std::string run_id;
  std::string model;
  TraceMode mode = TraceMode::base;
  std::string seed_tag;
  std::string gold_answer;
  std::string trace_text;
  std::string final_text;
  Prediction prediction;
  std::size_t char_count = 0;  // code points of the whitespace-collapsed trace
  std::optional<std::int64_t> reported_tokens;
  bool degenerated = false;
  FinishReason finish_reason = FinishReason::stop;

  bool operator==(const TraceRecord&) const = default;
};

nlohmann::ordered_json to_json(const TraceRecord& r);
TraceRecord trace_from_json(const nlohmann::json& j);

enum class TruncationMode { overthinking, underthinking };

struct TruncationResult {
  TruncationMode mode = TruncationMode::overthinking;
  std::size_t total_chars = 0;      // T
  std::size_t effective_chars = 0;  // T-hat
  bool prefix_exact = true;
  double score = 0.0;  // 1 - T-hat / T

  bool operator==(const TruncationResult&) const = default;
};

enum class JudgeKind { inclusion, overthinking, underthinking, metacognition, correctness };
std::string_view to_string(JudgeKind k) noexcept;  // inclusion, ot, ut, meta, correctness
JudgeKind parse_judge_kind(std::string_view s);

enum class VerdictStatus { ok, flagged, excluded };
std::string_view to_string(VerdictStatus s) noexcept;

/// One judge outcome, keyed by (example_id, run_id, kind). Excluded verdicts carry
/// no value and are left out of statistics (but counted).
struct VerdictRecord {
  std::string example_id;
  std::string run_id;
  JudgeKind kind = JudgeKind::inclusion;
  VerdictStatus status = VerdictStatus::ok;
  std::vector<std::string> flags;
  std::optional<bool> inclusive;
  std::optional<TruncationResult> truncation;
  std::optional<int> meta_score;
  std::optional<bool> correct;
  std::string method;  // how correctness was decided: exact, empty, judge, em_fallback
  std::string raw_reply;

  bool usable() const noexcept { return status != VerdictStatus::excluded; }
  bool operator==(const VerdictRecord&) const = default;
};

nlohmann::ordered_json to_json(const VerdictRecord& v);
VerdictRecord verdict_from_json(const nlohmann::json& j);

}  // namespace mbt
