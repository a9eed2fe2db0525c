#include "mbt/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mbt/errors.hpp"
#include "mbt/text.hpp"

namespace mbt {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !text::is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool is_article(std::string_view t) { return t == "a" || t == "an" || t == "the"; }

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> percent_opt(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return percent(num, den);
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string lowered = text::to_lower_ascii(s);
  for (char& c : lowered) {
    if (std::ispunct(static_cast<unsigned char>(c))) c = ' ';
  }
  std::string out;
  for (const auto tok : split_ws(lowered)) {
    if (is_article(tok)) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

bool exact_match(std::string_view pred, std::string_view gold) {
  return normalize_answer(pred) == normalize_answer(gold);
}

double token_f1(std::string_view pred, std::string_view gold) {
  const std::string np = normalize_answer(pred);
  const std::string ng = normalize_answer(gold);
  const auto pt = split_ws(np);
  const auto gt = split_ws(ng);
  if (pt.empty() && gt.empty()) return 1.0;
  if (pt.empty() || gt.empty()) return 0.0;
  std::map<std::string_view, std::size_t> remaining;
  for (const auto t : gt) ++remaining[t];
  std::size_t overlap = 0;
  for (const auto t : pt) {
    auto it = remaining.find(t);
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(pt.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(gt.size());
  return 2.0 * p * r / (p + r);
}

bool substring_match(std::string_view trace_text, std::string_view gold) {
  return normalize_answer(trace_text).find(normalize_answer(gold)) != std::string::npos;
}

double aes(const AesPoint& base, const AesPoint& method, const AesWeights& w) {
  if (!(base.mean_len > 0.0)) throw DomainError("aes: baseline length must be positive");
  if (!(base.acc > 0.0)) throw DomainError("aes: baseline accuracy must be positive");
  const double d_len = (base.mean_len - method.mean_len) / base.mean_len;
  const double d_acc = (method.acc - base.acc) / base.acc;
  return d_acc >= 0.0 ? w.alpha * d_len + w.beta * std::abs(d_acc)
                      : w.alpha * d_len - w.gamma * std::abs(d_acc);
}

std::optional<double> xi_score(std::span<const TruncationResult> truncations) {
  if (truncations.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& t : truncations) {
    if (t.mode != truncations.front().mode) throw DomainError("xi_score: mixed truncation modes");
    sum += t.score;
  }
  return sum / static_cast<double>(truncations.size());
}

double record_length(const TraceRecord& r) {
  if (r.reported_tokens) return static_cast<double>(*r.reported_tokens);
  return static_cast<double>((r.char_count + 3) / 4);
}

LengthStats length_stats(std::span<const TraceRecord> records, const CorrectnessMap& correctness) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
      sum += v;
      ++n;
    }
    SubsetMean done() const {
      return {n == 0 ? std::nullopt : std::optional<double>(sum / static_cast<double>(n)), n};
    }
  } overall, correct, incorrect, valid;
  for (const auto& r : records) {
    const auto it = correctness.find(r.example_id);
    if (it == correctness.end()) {
      throw DomainError("length_stats: no correctness entry for example " + r.example_id);
    }
    const double len = record_length(r);
    overall.add(len);
    (it->second ? correct : incorrect).add(len);
    if (!r.degenerated) valid.add(len);
  }
  return {overall.done(), correct.done(), incorrect.done(), valid.done()};
}

std::string_view to_string(CorrectnessCriterion c) noexcept {
  return c == CorrectnessCriterion::em ? "em" : "llm";
}

CorrectnessCriterion parse_criterion(std::string_view s) {
  if (s == "llm") return CorrectnessCriterion::llm;
  if (s == "em") return CorrectnessCriterion::em;
  throw ConfigError("unknown correctness criterion '" + std::string(s) + "' (expected llm or em)");
}

CorrectnessMap correctness_of(std::span<const TraceRecord> records,
                              std::span<const VerdictRecord> verdicts,
                              CorrectnessCriterion criterion) {
  CorrectnessMap out;
  if (criterion == CorrectnessCriterion::em) {
    for (const auto& r : records) {
      out[r.example_id] = exact_match(r.prediction.answer_text, r.gold_answer);
    }
    return out;
  }
  CorrectnessMap judged;
  for (const auto& v : verdicts) {
    if (v.kind == JudgeKind::correctness && v.usable() && v.correct) {
      judged[v.example_id] = *v.correct;
    }
  }
  for (const auto& r : records) {
    const auto it = judged.find(r.example_id);
    if (it == judged.end()) {
      throw DomainError("no usable correctness verdict for example " + r.example_id);
    }
    out[r.example_id] = it->second;
  }
  return out;
}

void apply_aes(MetricReport& report, const MetricReport& baseline, const AesWeights& w) {
  report.aes_by_metric.clear();
  const auto base_len = baseline.lengths.overall.mean;
  const auto len = report.lengths.overall.mean;
  if (!base_len || !len || *base_len <= 0.0) return;
  auto put = [&](const char* key, std::optional<double> base_acc, std::optional<double> acc) {
    if (!base_acc || !acc || *base_acc <= 0.0) return;
    report.aes_by_metric[key] = aes({*base_len, *base_acc}, {*len, *acc}, w);
  };
  put("em", baseline.em, report.em);
  put("f1", baseline.f1, report.f1);
  put("llm", baseline.llm_acc, report.llm_acc);
}

MetricReport aggregate(std::span<const TraceRecord> records, std::span<const VerdictRecord> verdicts,
                       const AggregateOptions& options, const MetricReport* baseline) {
  if (options.require_aes && baseline == nullptr) {
    throw DomainError("aggregate: AES requested but no baseline report supplied");
  }
  MetricReport rep;
  rep.label = options.label;
  rep.dataset = options.dataset;
  rep.criterion = options.criterion;
  rep.n = records.size();
  if (!records.empty()) rep.run_id = records.front().run_id;

  std::vector<VerdictRecord> mine;
  for (const auto& v : verdicts) {
    if (v.run_id == rep.run_id) mine.push_back(v);
  }

  double em_sum = 0.0;
  double f1_sum = 0.0;
  for (const auto& r : records) {
    em_sum += exact_match(r.prediction.answer_text, r.gold_answer) ? 1.0 : 0.0;
    f1_sum += token_f1(r.prediction.answer_text, r.gold_answer);
    if (r.degenerated) ++rep.degen_count;
    if (r.prediction.status == ExtractionStatus::missing_tags) ++rep.missing_tag_count;
  }
  if (!records.empty()) {
    rep.em = 100.0 * em_sum / static_cast<double>(records.size());
    rep.f1 = 100.0 * f1_sum / static_cast<double>(records.size());
  }

  std::map<std::string, const VerdictRecord*, std::less<>> by_correct;
  std::map<std::string, const VerdictRecord*, std::less<>> by_inclusion;
  for (const auto& v : mine) {
    if (!v.usable()) ++rep.exclusions[std::string(to_string(v.kind))];
    if (v.kind == JudgeKind::correctness) {
      by_correct[v.example_id] = &v;
      if (v.method == "em_fallback") ++rep.correctness_fallbacks;
    } else if (v.kind == JudgeKind::inclusion) {
      by_inclusion[v.example_id] = &v;
    }
  }

  if (!by_correct.empty()) {
    std::size_t ok = 0;
    std::size_t judged = 0;
    for (const auto& r : records) {
      const auto it = by_correct.find(r.example_id);
      if (it == by_correct.end() || !it->second->usable() || !it->second->correct) continue;
      ++judged;
      ok += *it->second->correct ? 1 : 0;
    }
    rep.llm_acc = percent_opt(ok, judged);
  }

  const auto correctness = correctness_of(records, mine, options.criterion);
  rep.lengths = length_stats(records, correctness);

  std::size_t sub_c = 0, sub_i = 0, n_c = 0, n_i = 0;
  std::size_t inc_c = 0, inc_i = 0, inc_nc = 0, inc_ni = 0;
  for (const auto& r : records) {
    const bool correct = correctness.at(r.example_id);
    const bool sub = substring_match(r.trace_text, r.gold_answer);
    (correct ? n_c : n_i) += 1;
    if (sub) (correct ? sub_c : sub_i) += 1;
    const auto it = by_inclusion.find(r.example_id);
    if (it != by_inclusion.end() && it->second->usable() && it->second->inclusive) {
      (correct ? inc_nc : inc_ni) += 1;
      if (*it->second->inclusive) (correct ? inc_c : inc_i) += 1;
    }
  }
  rep.substring_correct = percent_opt(sub_c, n_c);
  rep.substring_incorrect = percent_opt(sub_i, n_i);
  rep.inclusion_correct = percent_opt(inc_c, inc_nc);
  rep.inclusion_incorrect = percent_opt(inc_i, inc_ni);

  std::vector<TruncationResult> ot, ut;
  double meta_sum = 0.0;
  std::size_t meta_n = 0;
  for (const auto& v : mine) {
    if (!v.usable()) continue;
    const auto c = correctness.find(v.example_id);
    if (c == correctness.end()) continue;
    if (v.kind == JudgeKind::overthinking && v.truncation && c->second) ot.push_back(*v.truncation);
    if (v.kind == JudgeKind::underthinking && v.truncation && !c->second) ut.push_back(*v.truncation);
    if (v.kind == JudgeKind::metacognition && v.meta_score) {
      meta_sum += *v.meta_score;
      ++meta_n;
    }
  }
  rep.xi_ot = xi_score(ot);
  rep.xi_ut = xi_score(ut);
  if (meta_n > 0) rep.meta_avg = meta_sum / static_cast<double>(meta_n);

  if (baseline) apply_aes(rep, *baseline, options.weights);
  return rep;
}

namespace {

template <class T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json subset_json(const SubsetMean& s) {
  nlohmann::ordered_json j;
  j["mean"] = opt(s.mean);
  j["count"] = s.count;
  return j;
}

template <class T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

SubsetMean subset_from(const nlohmann::json& j) {
  return {get_opt<double>(j, "mean"), j.at("count").get<std::size_t>()};
}

}  // namespace

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["label"] = r.label;
  j["dataset"] = r.dataset;
  j["criterion"] = to_string(r.criterion);
  j["n"] = r.n;
  j["em"] = r.em;
  j["f1"] = r.f1;
  j["llm_acc"] = opt(r.llm_acc);
  j["substring_correct"] = opt(r.substring_correct);
  j["substring_incorrect"] = opt(r.substring_incorrect);
  j["inclusion_correct"] = opt(r.inclusion_correct);
  j["inclusion_incorrect"] = opt(r.inclusion_incorrect);
  j["degen_count"] = r.degen_count;
  j["missing_tag_count"] = r.missing_tag_count;
  j["lengths"] = {{"overall", subset_json(r.lengths.overall)},
                  {"correct", subset_json(r.lengths.correct)},
                  {"incorrect", subset_json(r.lengths.incorrect)},
                  {"valid", subset_json(r.lengths.valid)}};
  j["xi_ot"] = opt(r.xi_ot);
  j["xi_ut"] = opt(r.xi_ut);
  j["meta_avg"] = opt(r.meta_avg);
  j["aes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.aes_by_metric) j["aes"][k] = v;
  j["exclusions"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.exclusions) j["exclusions"][k] = v;
  j["correctness_fallbacks"] = r.correctness_fallbacks;
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.criterion = parse_criterion(j.at("criterion").get<std::string>());
    r.n = j.at("n").get<std::size_t>();
    r.em = j.at("em").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.llm_acc = get_opt<double>(j, "llm_acc");
    r.substring_correct = get_opt<double>(j, "substring_correct");
    r.substring_incorrect = get_opt<double>(j, "substring_incorrect");
    r.inclusion_correct = get_opt<double>(j, "inclusion_correct");
    r.inclusion_incorrect = get_opt<double>(j, "inclusion_incorrect");
    r.degen_count = j.at("degen_count").get<std::size_t>();
    r.missing_tag_count = j.value("missing_tag_count", std::size_t{0});
    const auto& l = j.at("lengths");
    r.lengths = {subset_from(l.at("overall")), subset_from(l.at("correct")),
                 subset_from(l.at("incorrect")), subset_from(l.at("valid"))};
    r.xi_ot = get_opt<double>(j, "xi_ot");
    r.xi_ut = get_opt<double>(j, "xi_ut");
    r.meta_avg = get_opt<double>(j, "meta_avg");
    if (j.contains("aes")) r.aes_by_metric = j.at("aes").get<std::map<std::string, double>>();
    if (j.contains("exclusions")) {
      r.exclusions = j.at("exclusions").get<std::map<std::string, std::size_t>>();
    }
    r.correctness_fallbacks = j.value("correctness_fallbacks", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed metric report: ") + e.what());
  }
  return r;
}

}  // namespace mbt
