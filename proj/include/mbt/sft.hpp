#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbt/dataset.hpp"
#include "mbt/gateway.hpp"
#include "mbt/metrics.hpp"
#include "mbt/prompts.hpp"
#include "mbt/records.hpp"

namespace mbt {

enum class SftOrigin { mbt_s, mbt_r, rejection };
std::string_view to_string(SftOrigin o) noexcept;
SftOrigin parse_sft_origin(std::string_view s);

struct SFTRecord {
  std::string example_id;
  SftOrigin origin = SftOrigin::mbt_s;
  std::string user_prompt;  // rendered plain QA prompt
  std::string target_trace;
  std::string target_answer;
  std::string teacher_model;
  std::optional<bool> draft_was_correct;

  bool operator==(const SFTRecord&) const = default;
};

nlohmann::ordered_json to_json(const SFTRecord& r);
SFTRecord sft_from_json(const nlohmann::json& j);

/// "<think>T</think><answer>A</answer>"
std::string assistant_content(const SFTRecord& r);

/// The user prompt the student sees at train time.
std::string student_prompt(const QAExample& example, const TemplateLibrary& templates);

struct TeacherContext {
  const Gateway& gateway;
  const TemplateLibrary& templates;
  std::string model;
  Sampling sampling{0.6, 0.95, 32768, std::string("high")};
  // Reject teacher traces whose own <answer> tag (if any) misses the gold answer.
  bool verify_final_answer = false;
};

/// Throws ConstructionError for an empty reply or a reply that only restates the
/// gold answer, and (with verify_final_answer) for a wrong tagged answer.
SFTRecord build_mbt_s(const TeacherContext& ctx, const QAExample& example);

/// The turn-2 dialogue: synthesis prompt, the teacher's turn-1 reply, rewrite prompt.
std::vector<ChatMessage> mbt_r_dialogue(const TemplateLibrary& templates, const QAExample& example,
                                        std::string_view turn1_reply, std::string_view draft_trace);

SFTRecord build_mbt_r(const TeacherContext& ctx, const QAExample& example, const TraceRecord& draft,
                      std::optional<bool> draft_correct);

struct RejectionResult {
  std::vector<SFTRecord> records;
  std::size_t considered = 0;
  std::size_t incorrect = 0;
  std::size_t degenerated = 0;
};

/// Keeps correct, non-degenerated traces verbatim.
RejectionResult rejection_filter(std::span<const TraceRecord> drafts, const CorrectnessMap& correct,
                                 const std::map<std::string, QAExample, std::less<>>& examples,
                                 const TemplateLibrary& templates);

struct ExportSummary {
  std::size_t count = 0;
  std::size_t bytes = 0;
  std::size_t skipped = 0;  // failed the round-trip or length check
};

/// True when the assistant content parses back to (target_trace, target_answer).
bool round_trips(const SFTRecord& r);

ExportSummary export_sft(std::span<const SFTRecord> records, const std::filesystem::path& destination,
                         std::optional<std::size_t> max_trace_chars = std::nullopt);

std::vector<SFTRecord> load_sft(const std::filesystem::path& path);

}  // namespace mbt
