#include "mbt/records.hpp"

#include "mbt/errors.hpp"

namespace mbt {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ExtractionStatus s) noexcept {
  switch (s) {
    case ExtractionStatus::tagged: return "tagged";
    case ExtractionStatus::missing_tags: return "missing_tags";
    case ExtractionStatus::degenerated: return "degenerated";
  }
  return "missing_tags";
}

std::string_view to_string(TraceMode m) noexcept {
  switch (m) {
    case TraceMode::base: return "base";
    case TraceMode::metaprompt: return "metaprompt";
    case TraceMode::sft_model: return "sft_model";
  }
  return "base";
}

ExtractionStatus parse_extraction_status(std::string_view s) {
  if (s == "tagged") return ExtractionStatus::tagged;
  if (s == "missing_tags") return ExtractionStatus::missing_tags;
  if (s == "degenerated") return ExtractionStatus::degenerated;
  throw ConfigError("unknown extraction status '" + std::string(s) + "'");
}

TraceMode parse_trace_mode(std::string_view s) {
  if (s == "base") return TraceMode::base;
  if (s == "metaprompt") return TraceMode::metaprompt;
  if (s == "sft_model" || s == "sft") return TraceMode::sft_model;
  throw ConfigError("unknown generation mode '" + std::string(s) + "' (base, metaprompt, sft_model)");
}

std::string_view to_string(JudgeKind k) noexcept {
  switch (k) {
    case JudgeKind::inclusion: return "inclusion";
    case JudgeKind::overthinking: return "ot";
    case JudgeKind::underthinking: return "ut";
    case JudgeKind::metacognition: return "meta";
    case JudgeKind::correctness: return "correctness";
  }
  return "inclusion";
}

JudgeKind parse_judge_kind(std::string_view s) {
  if (s == "inclusion") return JudgeKind::inclusion;
  if (s == "ot" || s == "overthinking") return JudgeKind::overthinking;
  if (s == "ut" || s == "underthinking") return JudgeKind::underthinking;
  if (s == "meta" || s == "metacognition") return JudgeKind::metacognition;
  if (s == "correctness") return JudgeKind::correctness;
  throw ConfigError("unknown judge kind '" + std::string(s) + "'");
}

std::string_view to_string(VerdictStatus s) noexcept {
  switch (s) {
    case VerdictStatus::ok: return "ok";
    case VerdictStatus::flagged: return "flagged";
    case VerdictStatus::excluded: return "excluded";
  }
  return "ok";
}

namespace {

VerdictStatus parse_verdict_status(std::string_view s) {
  if (s == "ok") return VerdictStatus::ok;
  if (s == "flagged") return VerdictStatus::flagged;
  if (s == "excluded") return VerdictStatus::excluded;
  throw ConfigError("unknown verdict status '" + std::string(s) + "'");
}

template <class T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

ordered_json to_json(const TraceRecord& r) {
  ordered_json j;
  j["example_id"] = r.example_id;
  j["run_id"] = r.run_id;
  j["model"] = r.model;
  j["mode"] = to_string(r.mode);
  j["seed_tag"] = r.seed_tag;
  j["gold_answer"] = r.gold_answer;
  j["trace_text"] = r.trace_text;
  j["final_text"] = r.final_text;
  j["prediction"] = ordered_json{{"answer_text", r.prediction.answer_text},
                                 {"extraction_status", to_string(r.prediction.status)}};
  j["char_count"] = r.char_count;
  j["reported_tokens"] = opt(r.reported_tokens);
  j["degenerated"] = r.degenerated;
  j["finish_reason"] = to_string(r.finish_reason);
  return j;
}

TraceRecord trace_from_json(const json& j) {
  TraceRecord r;
  r.example_id = j.at("example_id").get<std::string>();
  r.run_id = j.value("run_id", std::string());
  r.model = j.value("model", std::string());
  r.mode = parse_trace_mode(j.value("mode", std::string("base")));
  r.seed_tag = j.value("seed_tag", std::string());
  r.gold_answer = j.value("gold_answer", std::string());
  r.trace_text = j.at("trace_text").get<std::string>();
  r.final_text = j.value("final_text", std::string());
  const json& p = j.at("prediction");
  r.prediction.answer_text = p.value("answer_text", std::string());
  r.prediction.status = parse_extraction_status(p.value("extraction_status", std::string("missing_tags")));
  r.char_count = j.value("char_count", std::size_t{0});
  r.reported_tokens = get_opt<std::int64_t>(j, "reported_tokens");
  r.degenerated = j.value("degenerated", false);
  r.finish_reason = parse_finish_reason(j.value("finish_reason", std::string("stop")));
  return r;
}

ordered_json to_json(const VerdictRecord& v) {
  ordered_json j;
  j["example_id"] = v.example_id;
  j["run_id"] = v.run_id;
  j["judge_kind"] = to_string(v.kind);
  j["status"] = to_string(v.status);
  j["flags"] = v.flags;
  switch (v.kind) {
    case JudgeKind::inclusion:
      j["inclusive"] = opt(v.inclusive);
      break;
    case JudgeKind::overthinking:
    case JudgeKind::underthinking:
      if (v.truncation) {
        j["total_chars"] = v.truncation->total_chars;
        j["effective_chars"] = v.truncation->effective_chars;
        j["prefix_exact"] = v.truncation->prefix_exact;
        j["score"] = v.truncation->score;
      } else {
        j["score"] = nullptr;
      }
      break;
    case JudgeKind::metacognition:
      j["meta_score"] = opt(v.meta_score);
      break;
    case JudgeKind::correctness:
      j["correct"] = opt(v.correct);
      j["method"] = v.method;
      break;
  }
  j["raw_reply"] = v.raw_reply;
  return j;
}

VerdictRecord verdict_from_json(const json& j) {
  VerdictRecord v;
  v.example_id = j.at("example_id").get<std::string>();
  v.run_id = j.value("run_id", std::string());
  v.kind = parse_judge_kind(j.at("judge_kind").get<std::string>());
  v.status = parse_verdict_status(j.value("status", std::string("ok")));
  v.flags = j.value("flags", std::vector<std::string>{});
  v.inclusive = get_opt<bool>(j, "inclusive");
  v.meta_score = get_opt<int>(j, "meta_score");
  v.correct = get_opt<bool>(j, "correct");
  v.method = j.value("method", std::string());
  v.raw_reply = j.value("raw_reply", std::string());
  if ((v.kind == JudgeKind::overthinking || v.kind == JudgeKind::underthinking) &&
      j.contains("score") && !j["score"].is_null()) {
    TruncationResult t;
    t.mode = v.kind == JudgeKind::overthinking ? TruncationMode::overthinking : TruncationMode::underthinking;
    t.total_chars = j.at("total_chars").get<std::size_t>();
    t.effective_chars = j.at("effective_chars").get<std::size_t>();
    t.prefix_exact = j.value("prefix_exact", true);
    t.score = j.at("score").get<double>();
    v.truncation = t;
  }
  return v;
}

}  // namespace mbt
