#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbt/dataset.hpp"
#include "mbt/gateway.hpp"
#include "mbt/prompts.hpp"
#include "mbt/records.hpp"

namespace mbt {

inline constexpr std::int64_t kDefaultTokenLimit = 32768;

/// Interior of the last well-formed <answer>...</answer> pair, trimmed.
Prediction extract_answer(std::string_view final_text);

bool detect_degeneration(const CompletionResult& result,
                         std::int64_t token_limit = kDefaultTokenLimit);

struct TraceOptions {
  std::string model;
  TraceMode mode = TraceMode::base;
  Sampling sampling;
  std::string run_id;
  std::string seed_tag = "sample-0";
  std::int64_t token_limit = kDefaultTokenLimit;
};

/// Base and SFT-model modes use the plain QA prompt; metaprompt prepends the
/// metacognitive system message.
CompletionRequest trace_request(const QAExample& example, const TraceOptions& options,
                                const TemplateLibrary& templates);

TraceRecord make_trace_record(const QAExample& example, const TraceOptions& options,
                              const CompletionResult& result);

/// Line-delimited TraceRecord store at `<dir>/traces.jsonl`. Appends are
/// serialized and flushed per record, so an interrupted run can be resumed.
class RunStore {
public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path file() const { return dir_ / "traces.jsonl"; }

  bool contains(std::string_view example_id) const;
  void append(const TraceRecord& record);
  std::vector<TraceRecord> records() const;

  /// Rewrites the file with records ordered by `order` (ids absent from it go last,
  /// sorted by id).
  void finalize(std::span<const std::string> order);

  static std::vector<TraceRecord> read(const std::filesystem::path& dir);

private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<TraceRecord> records_;
  std::set<std::string, std::less<>> ids_;
};

/// One completion, split and scored, persisted before returning. Failures are
/// rethrown as ExampleError with the cause nested.
TraceRecord generate_trace(const QAExample& example, const TraceOptions& options,
                           const TemplateLibrary& templates, const Gateway& gateway,
                           RunStore* store = nullptr);

}  // namespace mbt
