#include "mbt/trace.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>

#include "mbt/errors.hpp"
#include "mbt/jsonl.hpp"
#include "mbt/text.hpp"

namespace mbt {

Prediction extract_answer(std::string_view final_text) {
  constexpr std::string_view kOpen = "<answer>";
  constexpr std::string_view kClose = "</answer>";
  // A well-formed pair has no other tag between its opening and closing markers.
  std::optional<std::string_view> last;
  std::size_t pos = final_text.find(kOpen);
  while (pos != std::string_view::npos) {
    const std::size_t body = pos + kOpen.size();
    const std::size_t close = final_text.find(kClose, body);
    if (close == std::string_view::npos) break;
    const std::size_t reopen = final_text.find(kOpen, body);
    if (reopen != std::string_view::npos && reopen < close) {
      pos = reopen;
      continue;
    }
    last = final_text.substr(body, close - body);
    pos = final_text.find(kOpen, close + kClose.size());
  }
  if (!last) return {"", ExtractionStatus::missing_tags};
  const auto trimmed = text::trim(*last);
  if (trimmed.empty()) return {"", ExtractionStatus::missing_tags};
  return {std::string(trimmed), ExtractionStatus::tagged};
}

bool detect_degeneration(const CompletionResult& result, std::int64_t token_limit) {
  if (result.finish_reason == FinishReason::length) return true;
  return result.reported_completion_tokens && *result.reported_completion_tokens >= token_limit;
}

CompletionRequest trace_request(const QAExample& example, const TraceOptions& options,
                                const TemplateLibrary& templates) {
  const Bindings b{{"question", example.question}, {"context", render_context(example)}};
  const auto id =
      options.mode == TraceMode::metaprompt ? TemplateId::metacog_prompting : TemplateId::base_qa;
  auto request = make_request(options.model, templates.render(id, b), options.sampling,
                              options.seed_tag);
  request.validate();
  return request;
}

TraceRecord make_trace_record(const QAExample& example, const TraceOptions& options,
                              const CompletionResult& result) {
  TraceRecord r;
  r.example_id = example.id;
  r.run_id = options.run_id;
  r.model = options.model;
  r.mode = options.mode;
  r.seed_tag = options.seed_tag;
  r.gold_answer = example.gold_answer;
  const auto split = extract_reasoning(result);
  r.trace_text = split.trace;
  r.final_text = split.final_text;
  r.char_count = text::utf8_length(text::collapse_whitespace(r.trace_text));
  r.reported_tokens = result.reported_completion_tokens;
  r.finish_reason = result.finish_reason;
  r.degenerated = detect_degeneration(result, options.token_limit);
  if (r.degenerated) {
    r.prediction = {"", ExtractionStatus::degenerated};
  } else {
    r.prediction = extract_answer(r.final_text);
  }
  return r;
}

TraceRecord generate_trace(const QAExample& example, const TraceOptions& options,
                           const TemplateLibrary& templates, const Gateway& gateway,
                           RunStore* store) {
  try {
    const auto result = gateway.complete(trace_request(example, options, templates));
    auto record = make_trace_record(example, options, result);
    if (store) store->append(record);
    return record;
  } catch (const std::exception& e) {
    std::throw_with_nested(ExampleError(example.id, e.what()));
  }
}

RunStore::RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  if (std::filesystem::exists(file())) {
    for (auto& r : read(dir_)) {
      if (ids_.insert(r.example_id).second) records_.push_back(std::move(r));
    }
  }
}

bool RunStore::contains(std::string_view example_id) const {
  std::lock_guard lock(mu_);
  return ids_.contains(example_id);
}

void RunStore::append(const TraceRecord& record) {
  std::lock_guard lock(mu_);
  if (!ids_.insert(record.example_id).second) return;
  records_.push_back(record);
  std::ofstream out(file(), std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + file().string());
  out << to_json(record).dump() << '\n';
  out.flush();
}

std::vector<TraceRecord> RunStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

void RunStore::finalize(std::span<const std::string> order) {
  std::lock_guard lock(mu_);
  std::map<std::string_view, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i], i);
  auto key = [&](const TraceRecord& r) {
    const auto it = rank.find(r.example_id);
    return std::pair{it == rank.end() ? order.size() : it->second, r.example_id};
  };
  std::stable_sort(records_.begin(), records_.end(),
                   [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::vector<std::string> lines;
  lines.reserve(records_.size());
  for (const auto& r : records_) lines.push_back(to_json(r).dump());
  jsonl::write_atomic(file(), lines);
}

std::vector<TraceRecord> RunStore::read(const std::filesystem::path& dir) {
  std::vector<TraceRecord> out;
  jsonl::for_each(dir / "traces.jsonl", [&](const nlohmann::json& j, std::size_t i) {
    try {
      out.push_back(trace_from_json(j));
    } catch (const RecordError&) {
      throw;
    } catch (const std::exception& e) {
      throw RecordError(i, "", e.what());
    }
  });
  return out;
}

}  // namespace mbt
