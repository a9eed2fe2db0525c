#include "mbt/pipeline.hpp"

#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <sstream>

#include "mbt/concurrency.hpp"
#include "mbt/errors.hpp"
#include "mbt/judge.hpp"
#include "mbt/jsonl.hpp"
#include "mbt/metrics.hpp"
#include "mbt/trace.hpp"

namespace mbt {

namespace fs = std::filesystem;

ExampleIndex index_examples(const std::vector<QAExample>& examples) {
  ExampleIndex out;
  for (const auto& e : examples) out.emplace(e.id, e);
  return out;
}

std::shared_ptr<Transport> make_transport(const RunConfig& config, const std::string& api_key) {
  if (config.transport == TransportKind::fixtures) {
    auto store = std::make_shared<FixtureStore>(FixtureStore::load(*config.fixtures_path));
    return std::make_shared<FixtureTransport>(std::move(store));
  }
  if (api_key.empty()) throw ConfigError("MBT_API_KEY is not set");
  HttpEndpoint ep;
  ep.base_url = config.base_url;
  ep.api_key = api_key;
  ep.timeout = std::chrono::seconds(config.timeout_s);
  return std::make_shared<HttpTransport>(std::move(ep));
}

GatewayOptions gateway_options(const RunConfig& config) {
  GatewayOptions o;
  o.retry = config.retry;
  o.concurrency = config.concurrency;
  o.cache_dir = config.cache_dir;
  return o;
}

TemplateLibrary load_templates(const RunConfig& config) {
  return config.templates_dir ? TemplateLibrary::load(*config.templates_dir)
                              : TemplateLibrary::load_default();
}

std::string created_at() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
  jsonl::write_text_atomic(path, j.dump(2) + "\n");
}

std::vector<std::string> id_order(const std::vector<QAExample>& examples) {
  std::vector<std::string> ids;
  ids.reserve(examples.size());
  for (const auto& e : examples) ids.push_back(e.id);
  return ids;
}

bool has_support_flags(const QAExample& e) {
  for (const auto& d : e.documents) {
    if (d.is_supporting) return true;
  }
  return false;
}

}  // namespace

nlohmann::ordered_json read_manifest(const fs::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

IngestSummary run_ingest(Source format, const fs::path& input, Split split, const fs::path& output,
                         bool supporting_only) {
  std::ifstream in(input);
  if (!in) throw IoError("cannot open " + input.string());
  auto examples = load_dataset(format, in, split);
  if (supporting_only) {
    for (auto& e : examples) {
      if (has_support_flags(e)) e = mbt::supporting_only(std::move(e));
    }
  }
  std::ostringstream buf;
  write_corpus(buf, examples);
  jsonl::write_text_atomic(output, buf.str());
  return {examples.size()};
}

GenerateSummary run_generate(const RunConfig& config, const Gateway& gateway,
                             const TemplateLibrary& templates, const GenerateRequest& request) {
  auto examples = read_corpus_file(request.dataset.string());
  if (config.supporting_only) {
    for (auto& e : examples) {
      if (has_support_flags(e)) e = supporting_only(std::move(e));
    }
  }
  TraceOptions opts;
  opts.model = request.model.empty() ? config.student_model : request.model;
  if (opts.model.empty()) throw ConfigError("no student model given (--model or models.student)");
  opts.mode = request.mode;
  opts.sampling = config.student;
  opts.run_id = request.run_id.value_or(opts.model + "-" + std::string(to_string(request.mode)));
  opts.seed_tag = request.seed_tag;
  opts.token_limit = config.token_limit;

  if (fs::exists(request.out_dir / "manifest.json")) {
    const auto previous = read_manifest(request.out_dir);
    if (previous.value("run_id", "") != opts.run_id) {
      throw ConfigError("run directory " + request.out_dir.string() + " belongs to run '" +
                        previous.value("run_id", "") + "'");
    }
  }

  RunStore store(request.out_dir);
  std::vector<const QAExample*> pending;
  for (const auto& e : examples) {
    if (!store.contains(e.id)) pending.push_back(&e);
  }
  const auto order = id_order(examples);
  try {
    parallel_for(pending.size(), gateway.concurrency(), [&](std::size_t i) {
      generate_trace(*pending[i], opts, templates, gateway, &store);
    });
  } catch (...) {
    store.finalize(order);
    throw;
  }
  store.finalize(order);

  GenerateSummary s;
  s.run_id = opts.run_id;
  s.generated = pending.size();
  for (const auto& r : store.records()) {
    ++s.records;
    if (r.degenerated) ++s.degenerated;
    if (r.prediction.status == ExtractionStatus::missing_tags) ++s.missing_tags;
  }

  nlohmann::ordered_json m;
  m["run_id"] = s.run_id;
  m["model"] = opts.model;
  m["mode"] = to_string(opts.mode);
  // Stored relative to the run directory so a run tree can be moved as a whole.
  m["dataset"] = fs::proximate(request.dataset, request.out_dir).generic_string();
  m["dataset_name"] = examples.empty() ? "" : std::string(to_string(examples.front().source));
  m["seed_tag"] = opts.seed_tag;
  m["config"] = to_json(config);
  m["counts"] = {{"examples", examples.size()},
                 {"records", s.records},
                 {"degenerated", s.degenerated},
                 {"missing_tags", s.missing_tags}};
  m["created_at"] = created_at();
  write_json_file(request.out_dir / "manifest.json", m);
  return s;
}

JudgeSummary run_judge(const RunConfig& config, const Gateway& gateway,
                       const TemplateLibrary& templates, const JudgeRequest& request) {
  const auto manifest = read_manifest(request.run_dir);
  fs::path dataset;
  if (request.dataset) {
    dataset = *request.dataset;
  } else {
    dataset = manifest.at("dataset").get<std::string>();
    if (dataset.is_relative()) dataset = request.run_dir / dataset;
  }
  const auto examples = read_corpus_file(dataset.string());
  const auto index = index_examples(examples);
  const auto records = RunStore::read(request.run_dir);

  const std::string model = request.model.empty() ? config.judge_model : request.model;
  if (model.empty()) throw ConfigError("no judge model given (--judge-model or models.judge)");
  JudgeContext ctx{gateway, templates, model, config.judge};
  JudgeRunOptions opts;
  opts.kinds = request.kinds;
  opts.criterion = config.correctness;
  opts.concurrency = gateway.concurrency();

  VerdictStore store(request.run_dir);
  const auto verdicts = run_judges(records, index, ctx, opts, &store);
  store.merge(verdicts, id_order(examples));

  JudgeSummary s;
  s.verdicts = verdicts.size();
  for (const auto& v : verdicts) {
    if (v.status == VerdictStatus::excluded) ++s.excluded;
    if (v.status == VerdictStatus::flagged) ++s.flagged;
  }
  return s;
}

MetricReport run_metrics(const RunConfig& config, const MetricsRequest& request) {
  const auto manifest = read_manifest(request.run_dir);
  const auto records = RunStore::read(request.run_dir);
  std::vector<VerdictRecord> verdicts;
  if (fs::exists(request.run_dir / "verdicts.jsonl")) verdicts = VerdictStore::read(request.run_dir);

  AggregateOptions opts;
  opts.label = request.label.value_or(manifest.value("run_id", ""));
  opts.dataset = request.dataset_name.value_or(manifest.value("dataset_name", ""));
  opts.criterion = config.correctness;

  std::optional<MetricReport> baseline;
  if (request.baseline) {
    auto path = *request.baseline;
    if (fs::is_directory(path)) path /= "metrics.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open baseline metrics " + path.string());
    baseline = metric_report_from_json(nlohmann::json::parse(in));
    opts.require_aes = true;
  }
  auto report = aggregate(records, verdicts, opts, baseline ? &*baseline : nullptr);
  write_json_file(request.run_dir / "metrics.json", to_json(report));
  return report;
}

ReportTables run_report(const ReportRequest& request) {
  std::vector<MetricReport> runs;
  for (auto path : request.inputs) {
    if (fs::is_directory(path)) path /= "metrics.json";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file " + path.string());
    try {
      runs.push_back(metric_report_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }
  const auto tables = build_report(runs, request.baseline);
  const auto text = emit(tables, ReportFormat::aligned_text);
  jsonl::write_text_atomic(request.out_dir / "report.txt", text);
  for (const auto* t : tables.all()) {
    jsonl::write_text_atomic(request.out_dir / (t->name + ".csv"), emit(*t, ReportFormat::delimited));
  }
  return tables;
}

BuildSftSummary run_build_sft(const RunConfig& config, const Gateway& gateway,
                              const TemplateLibrary& templates, const BuildSftRequest& request) {
  auto examples = read_corpus_file(request.dataset.string());
  if (config.supporting_only) {
    for (auto& e : examples) {
      if (has_support_flags(e)) e = supporting_only(std::move(e));
    }
  }
  const auto index = index_examples(examples);
  TeacherContext ctx{gateway, templates,
                     request.teacher.empty() ? config.teacher_model : request.teacher,
                     config.teacher, config.verify_final_answer};
  if (request.strategy != SftOrigin::rejection && ctx.model.empty()) {
    throw ConfigError("no teacher model given (--teacher or models.teacher)");
  }

  std::vector<TraceRecord> drafts;
  std::vector<VerdictRecord> verdicts;
  if (request.strategy != SftOrigin::mbt_s) {
    if (!request.drafts) throw ConfigError("--drafts is required for this strategy");
    drafts = RunStore::read(*request.drafts);
    if (fs::exists(*request.drafts / "verdicts.jsonl")) verdicts = VerdictStore::read(*request.drafts);
  }

  BuildSftSummary summary;
  std::vector<SFTRecord> built;
  if (request.strategy == SftOrigin::rejection) {
    const auto correct = correctness_of(drafts, verdicts, config.correctness);
    auto res = rejection_filter(drafts, correct, index, templates);
    summary.rejected = res.incorrect + res.degenerated;
    built = std::move(res.records);
  } else {
    std::vector<std::optional<SFTRecord>> slots;
    std::vector<std::function<SFTRecord()>> jobs;
    if (request.strategy == SftOrigin::mbt_s) {
      for (const auto& e : examples) jobs.push_back([&ctx, &e] { return build_mbt_s(ctx, e); });
    } else {
      CorrectnessMap correct;
      try {
        correct = correctness_of(drafts, verdicts, config.correctness);
      } catch (const DomainError&) {
        correct.clear();  // unjudged drafts: correctness stays unknown
      }
      for (const auto& d : drafts) {
        const auto ex = index.find(d.example_id);
        if (ex == index.end()) throw DomainError("draft " + d.example_id + " is not in the dataset");
        std::optional<bool> dc;
        if (const auto c = correct.find(d.example_id); c != correct.end()) dc = c->second;
        jobs.push_back([&ctx, &d, e = &ex->second, dc] { return build_mbt_r(ctx, *e, d, dc); });
      }
    }
    slots.resize(jobs.size());
    parallel_for(jobs.size(), gateway.concurrency(), [&](std::size_t i) {
      try {
        slots[i] = jobs[i]();
      } catch (const ConstructionError&) {
        // Rejected records are counted, not emitted.
      }
    });
    for (auto& s : slots) {
      if (s) {
        built.push_back(std::move(*s));
      } else {
        ++summary.rejected;
      }
    }
  }

  if (built.empty()) {
    jsonl::write_text_atomic(request.out_file, "");
    return summary;
  }
  summary.exported = export_sft(built, request.out_file, config.max_trace_chars);
  return summary;
}

std::size_t run_grpo_check(const fs::path& group_file, std::ostream& out,
                           const grpo::Options& options) {
  std::size_t n = 0;
  jsonl::for_each(group_file, [&](const nlohmann::json& j, std::size_t i) {
    grpo::Group g;
    try {
      g = grpo::group_from_json(j);
    } catch (const DomainError& e) {
      throw RecordError(i, "", e.what());
    }
    nlohmann::ordered_json line;
    line["group"] = i;
    line["rewards"] = g.rewards;
    const auto breakdown = grpo::to_json(grpo::evaluate(g, options));
    for (const auto& [k, v] : breakdown.items()) line[k] = v;
    out << line.dump() << '\n';
    ++n;
  });
  return n;
}

}  // namespace mbt
