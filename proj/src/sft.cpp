#include "mbt/sft.hpp"

#include "mbt/errors.hpp"
#include "mbt/jsonl.hpp"
#include "mbt/text.hpp"
#include "mbt/trace.hpp"

namespace mbt {

std::string_view to_string(SftOrigin o) noexcept {
  switch (o) {
    case SftOrigin::mbt_s: return "mbt_s";
    case SftOrigin::mbt_r: return "mbt_r";
    case SftOrigin::rejection: return "rejection";
  }
  return "mbt_s";
}

SftOrigin parse_sft_origin(std::string_view s) {
  if (s == "mbt_s" || s == "mbt-s") return SftOrigin::mbt_s;
  if (s == "mbt_r" || s == "mbt-r") return SftOrigin::mbt_r;
  if (s == "rejection") return SftOrigin::rejection;
  throw ConfigError("unknown SFT strategy '" + std::string(s) + "'");
}

std::string assistant_content(const SFTRecord& r) {
  return "<think>" + r.target_trace + "</think><answer>" + r.target_answer + "</answer>";
}

nlohmann::ordered_json to_json(const SFTRecord& r) {
  nlohmann::ordered_json j;
  j["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", r.user_prompt}},
       {{"role", "assistant"}, {"content", assistant_content(r)}}});
  j["example_id"] = r.example_id;
  j["origin"] = to_string(r.origin);
  j["target_trace"] = r.target_trace;
  j["target_answer"] = r.target_answer;
  j["teacher_model"] = r.teacher_model;
  j["draft_was_correct"] =
      r.draft_was_correct ? nlohmann::ordered_json(*r.draft_was_correct) : nlohmann::ordered_json(nullptr);
  return j;
}

SFTRecord sft_from_json(const nlohmann::json& j) {
  SFTRecord r;
  r.example_id = j.at("example_id").get<std::string>();
  r.origin = parse_sft_origin(j.at("origin").get<std::string>());
  r.user_prompt = j.at("messages").at(0).at("content").get<std::string>();
  r.target_trace = j.at("target_trace").get<std::string>();
  r.target_answer = j.at("target_answer").get<std::string>();
  r.teacher_model = j.at("teacher_model").get<std::string>();
  if (j.contains("draft_was_correct") && !j.at("draft_was_correct").is_null()) {
    r.draft_was_correct = j.at("draft_was_correct").get<bool>();
  }
  return r;
}

std::string student_prompt(const QAExample& example, const TemplateLibrary& templates) {
  const auto msgs = templates.render(
      TemplateId::base_qa, {{"question", example.question}, {"context", render_context(example)}});
  return msgs.front().content;
}

namespace {

std::vector<ChatMessage> synthesis_prompt(const TemplateLibrary& templates, const QAExample& ex) {
  return templates.render(TemplateId::mbt_s, {{"question", ex.question},
                                              {"answer", ex.gold_answer},
                                              {"context", render_context(ex)}});
}

std::string teacher_reply(const TeacherContext& ctx, std::vector<ChatMessage> messages,
                          const std::string& seed, const QAExample& ex) {
  auto req = make_request(ctx.model, std::move(messages), ctx.sampling, seed);
  req.validate();
  const auto result = ctx.gateway.complete(req);
  // Keep the visible reply; a separate reasoning channel is the teacher's scratch work.
  std::string reply(text::trim(result.content));
  if (reply.empty()) throw ConstructionError("example " + ex.id + ": empty teacher reply");
  return reply;
}

void check_trace(const TeacherContext& ctx, const QAExample& ex, const std::string& trace) {
  if (text::trim(trace) == text::trim(ex.gold_answer)) {
    throw ConstructionError("example " + ex.id + ": teacher reply only restates the gold answer");
  }
  if (ctx.verify_final_answer) {
    const auto p = extract_answer(trace);
    if (p.status == ExtractionStatus::tagged && !exact_match(p.answer_text, ex.gold_answer)) {
      throw ConstructionError("example " + ex.id + ": teacher concluded '" + p.answer_text +
                              "', not the gold answer");
    }
  }
}

}  // namespace

SFTRecord build_mbt_s(const TeacherContext& ctx, const QAExample& example) {
  auto trace = teacher_reply(ctx, synthesis_prompt(ctx.templates, example), "mbt_s", example);
  check_trace(ctx, example, trace);
  SFTRecord r;
  r.example_id = example.id;
  r.origin = SftOrigin::mbt_s;
  r.user_prompt = student_prompt(example, ctx.templates);
  r.target_trace = std::move(trace);
  r.target_answer = example.gold_answer;
  r.teacher_model = ctx.model;
  return r;
}

std::vector<ChatMessage> mbt_r_dialogue(const TemplateLibrary& templates, const QAExample& example,
                                        std::string_view turn1_reply, std::string_view draft_trace) {
  auto msgs = synthesis_prompt(templates, example);
  msgs.push_back({Role::assistant, std::string(turn1_reply)});
  auto rewrite = templates.render(TemplateId::mbt_r, {{"reasoning_trace", std::string(draft_trace)}});
  msgs.insert(msgs.end(), rewrite.begin(), rewrite.end());
  return msgs;
}

SFTRecord build_mbt_r(const TeacherContext& ctx, const QAExample& example, const TraceRecord& draft,
                      std::optional<bool> draft_correct) {
  if (draft.example_id != example.id) {
    throw ConstructionError("draft " + draft.example_id + " does not belong to example " + example.id);
  }
  if (text::trim(draft.trace_text).empty()) {
    throw ConstructionError("example " + example.id + ": draft trace is empty");
  }
  const auto first =
      teacher_reply(ctx, synthesis_prompt(ctx.templates, example), "mbt_r-turn1", example);
  auto trace = teacher_reply(ctx, mbt_r_dialogue(ctx.templates, example, first, draft.trace_text),
                             "mbt_r-turn2", example);
  check_trace(ctx, example, trace);
  SFTRecord r;
  r.example_id = example.id;
  r.origin = SftOrigin::mbt_r;
  r.user_prompt = student_prompt(example, ctx.templates);
  r.target_trace = std::move(trace);
  r.target_answer = example.gold_answer;
  r.teacher_model = ctx.model;
  r.draft_was_correct = draft_correct;
  return r;
}

RejectionResult rejection_filter(std::span<const TraceRecord> drafts, const CorrectnessMap& correct,
                                 const std::map<std::string, QAExample, std::less<>>& examples,
                                 const TemplateLibrary& templates) {
  RejectionResult out;
  for (const auto& d : drafts) {
    ++out.considered;
    const auto c = correct.find(d.example_id);
    if (c == correct.end()) throw DomainError("no correctness for draft " + d.example_id);
    if (!c->second) {
      ++out.incorrect;
      continue;
    }
    if (d.degenerated) {
      ++out.degenerated;
      continue;
    }
    const auto ex = examples.find(d.example_id);
    if (ex == examples.end()) throw DomainError("draft " + d.example_id + " is not in the dataset");
    SFTRecord r;
    r.example_id = d.example_id;
    r.origin = SftOrigin::rejection;
    r.user_prompt = student_prompt(ex->second, templates);
    r.target_trace = d.trace_text;
    r.target_answer = d.prediction.answer_text;
    r.teacher_model = d.model;
    out.records.push_back(std::move(r));
  }
  return out;
}

bool round_trips(const SFTRecord& r) {
  CompletionResult c;
  c.content = assistant_content(r);
  const auto split = extract_reasoning(c);
  if (split.degraded || split.trace != r.target_trace) return false;
  const auto p = extract_answer(split.final_text);
  return p.status == ExtractionStatus::tagged && p.answer_text == r.target_answer;
}

ExportSummary export_sft(std::span<const SFTRecord> records, const std::filesystem::path& destination,
                         std::optional<std::size_t> max_trace_chars) {
  if (records.empty()) throw DomainError("export_sft: no records to export");
  ExportSummary summary;
  std::vector<std::string> lines;
  for (const auto& r : records) {
    const bool too_long =
        max_trace_chars &&
        text::utf8_length(text::collapse_whitespace(r.target_trace)) > *max_trace_chars;
    if (too_long || r.target_trace.empty() || r.target_answer.empty() || !round_trips(r)) {
      ++summary.skipped;
      continue;
    }
    lines.push_back(to_json(r).dump());
    summary.bytes += lines.back().size() + 1;
  }
  summary.count = lines.size();
  try {
    jsonl::write_atomic(destination, lines);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(e.what());
  }
  return summary;
}

std::vector<SFTRecord> load_sft(const std::filesystem::path& path) {
  std::vector<SFTRecord> out;
  jsonl::for_each(path, [&](const nlohmann::json& j, std::size_t i) {
    try {
      out.push_back(sft_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw RecordError(i, "", e.what());
    }
  });
  return out;
}

}  // namespace mbt
