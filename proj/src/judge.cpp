#include "mbt/judge.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <exception>
#include <functional>

#include "mbt/concurrency.hpp"
#include "mbt/errors.hpp"
#include "mbt/jsonl.hpp"
#include "mbt/text.hpp"

namespace mbt {

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view strip_edges(std::string_view s) {
  while (!s.empty() && (text::is_space(s.front()) || is_punct(s.front()))) s.remove_prefix(1);
  while (!s.empty() && (text::is_space(s.back()) || is_punct(s.back()))) s.remove_suffix(1);
  return s;
}

/// Sends the prompt, parses the answer-bearing text, re-asks once on failure.
template <class T>
std::pair<T, std::string> ask(const JudgeContext& ctx, const std::vector<ChatMessage>& messages,
                              const std::function<std::optional<T>(std::string_view)>& parse,
                              std::string_view what) {
  std::string reply;
  for (const char* seed : {"judge", "reask-1"}) {
    auto request = make_request(ctx.model, messages, ctx.sampling, seed);
    request.validate();
    const auto result = ctx.gateway.complete(request);
    reply = extract_reasoning(result).final_text;
    if (auto v = parse(reply)) return {std::move(*v), reply};
  }
  throw JudgeParseError(std::string("unparseable ") + std::string(what) + " reply after re-ask",
                        reply);
}

/// Judges sometimes echo the wrapper tags of the draft they were given.
std::string_view unwrap_draft(std::string_view s) {
  constexpr std::string_view kOpen = "<draft_solution>";
  constexpr std::string_view kClose = "</draft_solution>";
  s = text::trim(s);
  if (s.starts_with(kOpen)) s = text::trim(s.substr(kOpen.size()));
  if (s.ends_with(kClose)) s = text::trim(s.substr(0, s.size() - kClose.size()));
  return s;
}

}  // namespace

std::optional<bool> parse_yes_no(std::string_view reply) {
  const std::string word = text::to_lower_ascii(strip_edges(reply));
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

std::optional<int> parse_score(std::string_view reply) {
  std::size_t i = 0;
  while (i < reply.size()) {
    if (!is_digit(reply[i]) || (i > 0 && is_alnum(reply[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < reply.size() && is_digit(reply[end])) ++end;
    if (end < reply.size() && is_alnum(reply[end])) {
      i = end;  // glued to a word, e.g. "A6" or "5th"
      continue;
    }
    const bool negative = i > 0 && reply[i - 1] == '-' && (i < 2 || !is_alnum(reply[i - 2]));
    const bool decimal = end + 1 < reply.size() && reply[end] == '.' && is_digit(reply[end + 1]);
    if (negative || decimal) return std::nullopt;
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(reply.data() + i, reply.data() + end, value);
    if (ec != std::errc() || value < 0 || value > 5) return std::nullopt;
    return static_cast<int>(value);
  }
  return std::nullopt;
}

PrefixMatch match_prefix(std::string_view full, std::string_view returned) {
  const std::string f = text::collapse_whitespace(full);
  const std::string r = text::collapse_whitespace(returned);
  if (f.starts_with(r)) return {text::utf8_length(r), true};
  const auto [fi, ri] = std::mismatch(f.begin(), f.end(), r.begin(), r.end());
  const std::size_t common = text::utf8_floor(f, static_cast<std::size_t>(fi - f.begin()));
  return {text::utf8_length(std::string_view(f).substr(0, common)), false};
}

InclusionVerdict judge_answer_inclusion(const JudgeContext& ctx, const QAExample& example,
                                        std::string_view trace_text) {
  if (text::trim(trace_text).empty()) throw DomainError("answer inclusion: empty trace");
  const auto messages = ctx.templates.render(
      TemplateId::answer_inclusion, {{"question", example.question},
                                     {"answer", example.gold_answer},
                                     {"reasoning_trace", std::string(trace_text)}});
  auto [inclusive, reply] = ask<bool>(ctx, messages, parse_yes_no, "answer inclusion");
  return {inclusive, std::move(reply)};
}

TruncationVerdict judge_truncation(const JudgeContext& ctx, std::string_view trace_text,
                                   TruncationMode mode) {
  const std::size_t total = text::utf8_length(text::collapse_whitespace(trace_text));
  if (total == 0) throw DomainError("truncation judge: empty trace");
  const auto id = mode == TruncationMode::overthinking ? TemplateId::overthinking
                                                       : TemplateId::underthinking;
  const auto messages =
      ctx.templates.render(id, {{"reasoning_trace", std::string(trace_text)}});
  const std::function<std::optional<std::string>(std::string_view)> non_empty =
      [](std::string_view r) -> std::optional<std::string> {
    const auto body = unwrap_draft(r);
    if (body.empty()) return std::nullopt;
    return std::string(body);
  };
  auto [segment, reply] = ask<std::string>(ctx, messages, non_empty, "truncation");

  TruncationVerdict v;
  v.raw_reply = std::move(reply);
  const auto m = match_prefix(trace_text, segment);
  v.result.mode = mode;
  v.result.total_chars = total;
  v.result.effective_chars = std::min(m.effective_chars, total);
  v.result.prefix_exact = text::trim(trace_text).starts_with(segment);
  v.result.score = 1.0 - static_cast<double>(v.result.effective_chars) / static_cast<double>(total);
  if (!m.exact) {
    v.flags.emplace_back("prefix_diverged");
  } else if (!v.result.prefix_exact) {
    v.flags.emplace_back("prefix_whitespace_recovered");
  }
  return v;
}

MetacognitionVerdict judge_metacognition(const JudgeContext& ctx, std::string_view trace_text) {
  if (text::trim(trace_text).empty()) throw DomainError("metacognition judge: empty trace");
  const auto messages = ctx.templates.render(TemplateId::metacognition,
                                             {{"reasoning_trace", std::string(trace_text)}});
  auto [score, reply] = ask<int>(ctx, messages, parse_score, "metacognition");
  return {score, std::move(reply)};
}

CorrectnessVerdict judge_correctness(const JudgeContext& ctx, const QAExample& example,
                                     std::string_view prediction) {
  if (text::trim(prediction).empty()) return {false, "empty", false, ""};
  if (exact_match(prediction, example.gold_answer)) return {true, "exact", false, ""};
  const auto messages = ctx.templates.render(TemplateId::correctness_judge,
                                             {{"question", example.question},
                                              {"answer", example.gold_answer},
                                              {"prediction", std::string(prediction)}});
  try {
    auto [correct, reply] = ask<bool>(ctx, messages, parse_yes_no, "correctness");
    return {correct, "judge", false, std::move(reply)};
  } catch (const JudgeParseError& e) {
    return {exact_match(prediction, example.gold_answer), "em_fallback", true, e.reply()};
  }
}

// ---------------------------------------------------------------------------
// Verdict store

VerdictStore::VerdictStore(std::filesystem::path run_dir) : dir_(std::move(run_dir)) {
  if (std::filesystem::exists(file())) verdicts_ = read(dir_);
}

const VerdictRecord* VerdictStore::find(std::string_view example_id, std::string_view run_id,
                                        JudgeKind kind) const {
  for (const auto& v : verdicts_) {
    if (v.example_id == example_id && v.run_id == run_id && v.kind == kind) return &v;
  }
  return nullptr;
}

void VerdictStore::merge(std::span<const VerdictRecord> incoming,
                         std::span<const std::string> order) {
  using Key = std::tuple<std::string, std::string, JudgeKind>;
  std::map<Key, VerdictRecord> merged;
  for (const auto& v : verdicts_) merged[{v.example_id, v.run_id, v.kind}] = v;
  for (const auto& v : incoming) merged[{v.example_id, v.run_id, v.kind}] = v;

  std::map<std::string_view, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i], i);
  verdicts_.clear();
  for (auto& [k, v] : merged) verdicts_.push_back(std::move(v));
  auto key = [&](const VerdictRecord& v) {
    const auto it = rank.find(v.example_id);
    return std::tuple{it == rank.end() ? order.size() : it->second, v.example_id, v.run_id,
                      static_cast<int>(v.kind)};
  };
  std::stable_sort(verdicts_.begin(), verdicts_.end(),
                   [&](const auto& a, const auto& b) { return key(a) < key(b); });

  std::vector<std::string> lines;
  lines.reserve(verdicts_.size());
  for (const auto& v : verdicts_) lines.push_back(to_json(v).dump());
  jsonl::write_atomic(file(), lines);
}

std::vector<VerdictRecord> VerdictStore::read(const std::filesystem::path& run_dir) {
  std::vector<VerdictRecord> out;
  jsonl::for_each(run_dir / "verdicts.jsonl", [&](const nlohmann::json& j, std::size_t i) {
    try {
      out.push_back(verdict_from_json(j));
    } catch (const RecordError&) {
      throw;
    } catch (const std::exception& e) {
      throw RecordError(i, "", e.what());
    }
  });
  return out;
}

std::set<JudgeKind> parse_judge_kinds(std::string_view csv) {
  std::set<JudgeKind> out;
  while (!csv.empty()) {
    const auto comma = csv.find(',');
    const auto item = text::trim(csv.substr(0, comma));
    if (!item.empty()) out.insert(parse_judge_kind(item));
    if (comma == std::string_view::npos) break;
    csv.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("no judge kinds given");
  return out;
}

// ---------------------------------------------------------------------------
// Runner

namespace {

VerdictRecord base_verdict(const TraceRecord& r, JudgeKind kind) {
  VerdictRecord v;
  v.example_id = r.example_id;
  v.run_id = r.run_id;
  v.kind = kind;
  return v;
}

VerdictRecord excluded(VerdictRecord v, std::string flag, std::string raw = {}) {
  v.status = VerdictStatus::excluded;
  v.flags.push_back(std::move(flag));
  v.raw_reply = std::move(raw);
  return v;
}

VerdictRecord judge_one(const JudgeContext& ctx, const TraceRecord& r, const QAExample& ex,
                        JudgeKind kind) {
  auto v = base_verdict(r, kind);
  if (kind == JudgeKind::correctness) {
    const auto c = judge_correctness(ctx, ex, r.prediction.answer_text);
    v.correct = c.correct;
    v.method = c.method;
    v.raw_reply = c.raw_reply;
    if (c.flagged) {
      v.status = VerdictStatus::flagged;
      v.flags.emplace_back("parse_error");
    }
    return v;
  }
  if (text::trim(r.trace_text).empty()) return excluded(std::move(v), "empty_trace");
  try {
    switch (kind) {
      case JudgeKind::inclusion: {
        auto res = judge_answer_inclusion(ctx, ex, r.trace_text);
        v.inclusive = res.inclusive;
        v.raw_reply = std::move(res.raw_reply);
        break;
      }
      case JudgeKind::overthinking:
      case JudgeKind::underthinking: {
        auto res = judge_truncation(ctx, r.trace_text,
                                    kind == JudgeKind::overthinking ? TruncationMode::overthinking
                                                                    : TruncationMode::underthinking);
        v.truncation = res.result;
        v.flags = std::move(res.flags);
        v.raw_reply = std::move(res.raw_reply);
        if (!v.flags.empty()) v.status = VerdictStatus::flagged;
        break;
      }
      case JudgeKind::metacognition: {
        auto res = judge_metacognition(ctx, r.trace_text);
        v.meta_score = res.score;
        v.raw_reply = std::move(res.raw_reply);
        break;
      }
      case JudgeKind::correctness:
        break;
    }
  } catch (const JudgeParseError& e) {
    return excluded(std::move(v), "parse_error", e.reply());
  }
  return v;
}

}  // namespace

std::vector<VerdictRecord> run_judges(std::span<const TraceRecord> records,
                                      const std::map<std::string, QAExample, std::less<>>& examples,
                                      const JudgeContext& ctx, const JudgeRunOptions& options,
                                      const VerdictStore* existing) {
  auto kinds = options.kinds;
  const bool needs_split = kinds.contains(JudgeKind::overthinking) ||
                           kinds.contains(JudgeKind::underthinking);
  if (needs_split && options.criterion == CorrectnessCriterion::llm) {
    kinds.insert(JudgeKind::correctness);
  }
  for (const auto& r : records) {
    if (!examples.contains(r.example_id)) {
      throw DomainError("run record " + r.example_id + " is not in the dataset");
    }
  }

  auto cached = [&](const TraceRecord& r, JudgeKind k) -> const VerdictRecord* {
    return existing ? existing->find(r.example_id, r.run_id, k) : nullptr;
  };
  auto run_stage = [&](const std::function<std::vector<JudgeKind>(const TraceRecord&)>& pick) {
    std::vector<std::vector<VerdictRecord>> per(records.size());
    parallel_for(records.size(), options.concurrency, [&](std::size_t i) {
      const auto& r = records[i];
      try {
        for (const auto k : pick(r)) {
          if (const auto* v = cached(r, k)) {
            per[i].push_back(*v);
          } else {
            per[i].push_back(judge_one(ctx, r, examples.find(r.example_id)->second, k));
          }
        }
      } catch (const std::exception& e) {
        std::throw_with_nested(ExampleError(r.example_id, e.what()));
      }
    });
    return per;
  };

  // Stage 1: correctness, needed to route overthinking/underthinking.
  auto first = run_stage([&](const TraceRecord&) {
    return kinds.contains(JudgeKind::correctness) ? std::vector{JudgeKind::correctness}
                                                  : std::vector<JudgeKind>{};
  });
  std::vector<VerdictRecord> stage1;
  for (auto& vs : first) stage1.insert(stage1.end(), vs.begin(), vs.end());
  const auto correct = needs_split ? correctness_of(records, stage1, options.criterion)
                                   : CorrectnessMap{};

  auto second = run_stage([&](const TraceRecord& r) {
    std::vector<JudgeKind> ks;
    if (kinds.contains(JudgeKind::inclusion)) ks.push_back(JudgeKind::inclusion);
    if (needs_split) {
      const bool ok = correct.at(r.example_id);
      if (ok && kinds.contains(JudgeKind::overthinking)) ks.push_back(JudgeKind::overthinking);
      if (!ok && kinds.contains(JudgeKind::underthinking)) ks.push_back(JudgeKind::underthinking);
    }
    if (kinds.contains(JudgeKind::metacognition)) ks.push_back(JudgeKind::metacognition);
    return ks;
  });

  std::vector<VerdictRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.insert(out.end(), first[i].begin(), first[i].end());
    out.insert(out.end(), second[i].begin(), second[i].end());
  }
  return out;
}

}  // namespace mbt
