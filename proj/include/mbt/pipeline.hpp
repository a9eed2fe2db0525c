#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbt/config.hpp"
#include "mbt/dataset.hpp"
#include "mbt/gateway.hpp"
#include "mbt/grpo.hpp"
#include "mbt/prompts.hpp"
#include "mbt/records.hpp"
#include "mbt/report.hpp"
#include "mbt/sft.hpp"

namespace mbt {

using ExampleIndex = std::map<std::string, QAExample, std::less<>>;
ExampleIndex index_examples(const std::vector<QAExample>& examples);

/// Builds the configured transport. HTTP requires a non-empty api_key.
std::shared_ptr<Transport> make_transport(const RunConfig& config, const std::string& api_key);
GatewayOptions gateway_options(const RunConfig& config);
TemplateLibrary load_templates(const RunConfig& config);

/// Timestamp for manifests: SOURCE_DATE_EPOCH when set, else now (UTC, ISO 8601).
std::string created_at();

struct IngestSummary {
  std::size_t examples = 0;
};
IngestSummary run_ingest(Source format, const std::filesystem::path& input, Split split,
                         const std::filesystem::path& output, bool supporting_only);

struct GenerateRequest {
  std::filesystem::path dataset;  // unified corpus from `ingest`
  TraceMode mode = TraceMode::base;
  std::string model;              // falls back to the config's student model
  std::optional<std::string> run_id;
  std::filesystem::path out_dir;
  std::string seed_tag = "sample-0";
};

struct GenerateSummary {
  std::string run_id;
  std::size_t records = 0;
  std::size_t generated = 0;  // excludes records resumed from disk
  std::size_t degenerated = 0;
  std::size_t missing_tags = 0;
};

GenerateSummary run_generate(const RunConfig& config, const Gateway& gateway,
                             const TemplateLibrary& templates, const GenerateRequest& request);

struct JudgeRequest {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> dataset;  // defaults to the manifest's dataset
  std::set<JudgeKind> kinds;
  std::string model;  // falls back to the config's judge model
};

struct JudgeSummary {
  std::size_t verdicts = 0;
  std::size_t excluded = 0;
  std::size_t flagged = 0;
};

JudgeSummary run_judge(const RunConfig& config, const Gateway& gateway,
                       const TemplateLibrary& templates, const JudgeRequest& request);

struct MetricsRequest {
  std::filesystem::path run_dir;
  std::optional<std::string> label;
  std::optional<std::string> dataset_name;
  std::optional<std::filesystem::path> baseline;  // metrics.json of the baseline run
};

/// Writes `<run_dir>/metrics.json` and returns the report.
MetricReport run_metrics(const RunConfig& config, const MetricsRequest& request);

struct ReportRequest {
  std::vector<std::filesystem::path> inputs;  // run dirs or metrics.json files
  std::string baseline;
  std::filesystem::path out_dir;
};

/// Writes report.txt and one CSV per table.
ReportTables run_report(const ReportRequest& request);

struct BuildSftRequest {
  SftOrigin strategy = SftOrigin::mbt_s;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> drafts;  // run dir, needed by mbt-r and rejection
  std::string teacher;                          // falls back to the config's teacher model
  std::filesystem::path out_file;
};

struct BuildSftSummary {
  ExportSummary exported;
  std::size_t rejected = 0;  // construction errors or filtered drafts
};

BuildSftSummary run_build_sft(const RunConfig& config, const Gateway& gateway,
                              const TemplateLibrary& templates, const BuildSftRequest& request);

/// One JSON line per group with advantages, per-token terms and the objective.
std::size_t run_grpo_check(const std::filesystem::path& group_file, std::ostream& out,
                           const grpo::Options& options = {});

nlohmann::ordered_json read_manifest(const std::filesystem::path& run_dir);

}  // namespace mbt
