#include "mbt/config.hpp"

#include <fstream>
#include <set>

#include "mbt/errors.hpp"

namespace mbt {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

Sampling sampling_from(const json& j, Sampling s, const std::string& where) {
  reject_unknown(j, {"temperature", "top_p", "max_tokens", "reasoning_effort"}, where);
  s.temperature = j.value("temperature", s.temperature);
  s.top_p = j.value("top_p", s.top_p);
  s.max_tokens = j.value("max_tokens", s.max_tokens);
  if (j.contains("reasoning_effort")) {
    const auto& e = j.at("reasoning_effort");
    s.reasoning_effort = e.is_null() ? std::nullopt : std::optional(e.get<std::string>());
  }
  if (s.temperature < 0.0 || !(s.top_p > 0.0 && s.top_p <= 1.0) || s.max_tokens <= 0) {
    throw ConfigError("invalid sampling values in '" + where + "'");
  }
  return s;
}

nlohmann::ordered_json sampling_json(const Sampling& s) {
  nlohmann::ordered_json j;
  j["temperature"] = s.temperature;
  j["top_p"] = s.top_p;
  j["max_tokens"] = s.max_tokens;
  j["reasoning_effort"] = s.reasoning_effort ? nlohmann::ordered_json(*s.reasoning_effort) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    reject_unknown(j,
                   {"endpoint", "models", "sampling", "concurrency", "retry", "token_limit",
                    "cache_dir", "transport", "fixtures_path", "templates_dir", "correctness",
                    "supporting_only", "verify_final_answer", "max_trace_chars"},
                   "");
    if (j.contains("endpoint")) {
      const auto& e = j.at("endpoint");
      reject_unknown(e, {"base_url", "timeout_s"}, "endpoint.");
      c.base_url = e.value("base_url", c.base_url);
      c.timeout_s = e.value("timeout_s", c.timeout_s);
    }
    if (j.contains("models")) {
      const auto& m = j.at("models");
      reject_unknown(m, {"student", "teacher", "judge"}, "models.");
      c.student_model = m.value("student", c.student_model);
      c.teacher_model = m.value("teacher", c.teacher_model);
      c.judge_model = m.value("judge", c.judge_model);
    }
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      reject_unknown(s, {"student", "teacher", "judge"}, "sampling.");
      if (s.contains("student")) c.student = sampling_from(s.at("student"), c.student, "sampling.student.");
      if (s.contains("teacher")) c.teacher = sampling_from(s.at("teacher"), c.teacher, "sampling.teacher.");
      if (s.contains("judge")) c.judge = sampling_from(s.at("judge"), c.judge, "sampling.judge.");
    }
    c.concurrency = j.value("concurrency", c.concurrency);
    if (c.concurrency == 0) throw ConfigError("concurrency must be positive");
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      reject_unknown(r, {"max_attempts", "initial_backoff_ms", "multiplier"}, "retry.");
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.initial_backoff = std::chrono::milliseconds(
          r.value("initial_backoff_ms", static_cast<std::int64_t>(c.retry.initial_backoff.count())));
      c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
      if (c.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    }
    c.token_limit = j.value("token_limit", c.token_limit);
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) {
      c.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
    }
    if (j.contains("transport")) {
      const auto t = j.at("transport").get<std::string>();
      if (t == "http") {
        c.transport = TransportKind::http;
      } else if (t == "fixtures") {
        c.transport = TransportKind::fixtures;
      } else {
        throw ConfigError("unknown transport '" + t + "' (expected http or fixtures)");
      }
    }
    if (j.contains("fixtures_path") && !j.at("fixtures_path").is_null()) {
      c.fixtures_path = resolve(base_dir, j.at("fixtures_path").get<std::string>());
    }
    if (j.contains("templates_dir") && !j.at("templates_dir").is_null()) {
      c.templates_dir = resolve(base_dir, j.at("templates_dir").get<std::string>());
    }
    if (j.contains("correctness")) c.correctness = parse_criterion(j.at("correctness").get<std::string>());
    c.supporting_only = j.value("supporting_only", c.supporting_only);
    c.verify_final_answer = j.value("verify_final_answer", c.verify_final_answer);
    if (j.contains("max_trace_chars") && !j.at("max_trace_chars").is_null()) {
      c.max_trace_chars = j.at("max_trace_chars").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.transport == TransportKind::fixtures && !c.fixtures_path) {
    throw ConfigError("transport 'fixtures' requires fixtures_path");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["endpoint"] = {{"base_url", c.base_url}, {"timeout_s", c.timeout_s}};
  j["models"] = {{"student", c.student_model}, {"teacher", c.teacher_model}, {"judge", c.judge_model}};
  j["sampling"] = {{"student", sampling_json(c.student)},
                   {"teacher", sampling_json(c.teacher)},
                   {"judge", sampling_json(c.judge)}};
  j["concurrency"] = c.concurrency;
  j["retry"] = {{"max_attempts", c.retry.max_attempts},
                {"initial_backoff_ms", c.retry.initial_backoff.count()},
                {"multiplier", c.retry.multiplier}};
  j["token_limit"] = c.token_limit;
  j["transport"] = c.transport == TransportKind::http ? "http" : "fixtures";
  j["correctness"] = to_string(c.correctness);
  j["supporting_only"] = c.supporting_only;
  j["verify_final_answer"] = c.verify_final_answer;
  j["max_trace_chars"] = c.max_trace_chars ? nlohmann::ordered_json(*c.max_trace_chars) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace mbt
