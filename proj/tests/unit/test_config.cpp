#include <doctest.h>

#include "mbt/config.hpp"
#include "mbt/errors.hpp"

using namespace mbt;

TEST_CASE("defaults") {
  const auto c = config_from_json(nlohmann::json::object());
  CHECK(c.concurrency == 8);
  CHECK(c.student.temperature == 0.6);
  CHECK(c.student.top_p == 0.95);
  CHECK(c.judge.temperature == 0.0);
  CHECK(c.teacher.reasoning_effort == std::optional<std::string>("high"));
  CHECK(c.retry.max_attempts == 5);
  CHECK(c.token_limit == 32768);
  CHECK(c.correctness == CorrectnessCriterion::llm);
}

TEST_CASE("parsing, path resolution and snapshot") {
  const auto j = nlohmann::json::parse(R"({
    "endpoint": {"base_url": "http://localhost:8000/v1"},
    "models": {"student": "s", "judge": "j"},
    "sampling": {"judge": {"temperature": 0.0, "top_p": 1.0}},
    "concurrency": 3, "transport": "fixtures", "fixtures_path": "fx.jsonl",
    "cache_dir": "/abs/cache", "correctness": "em", "max_trace_chars": 5000})");
  const auto c = config_from_json(j, "/base");
  CHECK(c.base_url == "http://localhost:8000/v1");
  CHECK(c.fixtures_path == std::optional<std::filesystem::path>("/base/fx.jsonl"));
  CHECK(c.cache_dir == std::optional<std::filesystem::path>("/abs/cache"));
  CHECK(c.correctness == CorrectnessCriterion::em);
  CHECK(c.max_trace_chars == std::optional<std::size_t>(5000));
  const auto snap = to_json(c);
  CHECK(snap["concurrency"] == 3);
  CHECK(snap["models"]["student"] == "s");
  auto reparsed = nlohmann::json::parse(snap.dump());
  reparsed.erase("transport");
  const auto again = config_from_json(reparsed);
  CHECK(again.concurrency == 3);
  CHECK(again.judge.top_p == 1.0);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"concurency": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"transport": "grpc"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"transport": "fixtures"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"sampling": {"student": {"top_p": 0}}})")),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"concurrency": "many"})")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
