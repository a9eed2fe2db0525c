#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mbt/gateway.hpp"
#include "mbt/metrics.hpp"

namespace mbt {

enum class TransportKind { http, fixtures };

/// Run configuration. Relative paths are resolved against the config file's directory.
struct RunConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::int64_t timeout_s = 600;

  std::string student_model;
  std::string teacher_model;
  std::string judge_model;

  Sampling student{0.6, 0.95, 32768, std::nullopt};
  Sampling teacher{0.6, 0.95, 32768, std::string("high")};
  Sampling judge{0.0, 1.0, 32768, std::nullopt};

  std::size_t concurrency = 8;
  RetryPolicy retry;
  std::int64_t token_limit = 32768;

  std::optional<std::filesystem::path> cache_dir;
  TransportKind transport = TransportKind::http;
  std::optional<std::filesystem::path> fixtures_path;
  std::optional<std::filesystem::path> templates_dir;

  CorrectnessCriterion correctness = CorrectnessCriterion::llm;
  bool supporting_only = false;
  bool verify_final_answer = false;
  std::optional<std::size_t> max_trace_chars;
};

/// Throws ConfigError on unknown keys or ill-typed values.
RunConfig config_from_json(const nlohmann::json& j,
                           const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& c);

}  // namespace mbt
