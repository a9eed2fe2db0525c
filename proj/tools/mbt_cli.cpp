#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbt/config.hpp"
#include "mbt/errors.hpp"
#include "mbt/judge.hpp"
#include "mbt/pipeline.hpp"
#include "mbt/report.hpp"

namespace fs = std::filesystem;

namespace {

void print_error(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_error(inner, depth + 1);
  } catch (...) {
  }
}

struct Globals {
  std::optional<fs::path> config;
  std::optional<fs::path> out;
  std::optional<std::size_t> concurrency;
};

mbt::RunConfig resolve_config(const Globals& g) {
  auto c = g.config ? mbt::load_config(*g.config) : mbt::RunConfig{};
  if (g.concurrency) {
    if (*g.concurrency == 0) throw mbt::ConfigError("--concurrency must be positive");
    c.concurrency = *g.concurrency;
  }
  return c;
}

fs::path require_out(const Globals& g, const char* what) {
  if (!g.out) throw mbt::ConfigError(std::string("--out <") + what + "> is required");
  return *g.out;
}

mbt::Gateway make_gateway(const mbt::RunConfig& c) {
  const char* key = std::getenv("MBT_API_KEY");
  return mbt::Gateway(mbt::make_transport(c, key ? key : ""), mbt::gateway_options(c));
}

void print_stats(const mbt::Gateway& gw) {
  const auto s = gw.stats();
  std::cerr << "requests: " << s.transport_calls << " sent, " << s.cache_hits << " cached, "
            << s.retries << " retried\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-hop QA reasoning-trace toolkit: trace generation, judging, metrics, "
               "SFT data construction and a GRPO reference kernel."};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory (output file for build-sft)");
  app.add_option("--concurrency", g.concurrency, "Maximum in-flight requests");
  app.fallthrough();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert a source dataset into the unified corpus");
  std::string in_format;
  fs::path in_input;
  std::string in_split = "validation";
  bool in_supporting = false;
  std::optional<fs::path> in_output;
  ingest->add_option("--format", in_format, "hotpotqa | musique | 2wiki")->required();
  ingest->add_option("--input", in_input, "Source file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--split", in_split, "train | validation")->capture_default_str();
  ingest->add_flag("--supporting-only", in_supporting, "Keep only supporting paragraphs when flagged");
  ingest->add_option("--output", in_output, "Corpus file (default <out>/corpus.jsonl)");

  // generate
  auto* generate = app.add_subcommand("generate", "Generate student traces for a corpus");
  fs::path gen_dataset;
  std::string gen_mode = "base";
  std::string gen_model;
  std::optional<std::string> gen_run_id;
  std::string gen_seed = "sample-0";
  generate->add_option("--dataset", gen_dataset, "Unified corpus file")->required()->check(CLI::ExistingFile);
  generate->add_option("--mode", gen_mode, "base | metaprompt | sft_model")->capture_default_str();
  generate->add_option("--model", gen_model, "Student model (default from config)");
  generate->add_option("--run-id", gen_run_id, "Run identifier (default <model>-<mode>)");
  generate->add_option("--seed-tag", gen_seed, "Sampling tag folded into the cache key")->capture_default_str();

  // judge
  auto* judge = app.add_subcommand("judge", "Run LLM judges over a run");
  fs::path jd_run;
  std::string jd_kinds = "inclusion,ot,ut,meta,correctness";
  std::optional<fs::path> jd_dataset;
  std::string jd_model;
  judge->add_option("--run", jd_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  judge->add_option("--kinds", jd_kinds, "Comma list of inclusion, ot, ut, meta, correctness")->capture_default_str();
  judge->add_option("--dataset", jd_dataset, "Corpus file (default from the run manifest)");
  judge->add_option("--judge-model", jd_model, "Judge model (default from config)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Aggregate a run into metrics.json");
  fs::path mt_run;
  std::optional<std::string> mt_label;
  std::optional<std::string> mt_dataset;
  std::optional<fs::path> mt_baseline;
  metrics->add_option("--run", mt_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--label", mt_label, "Method label (default run id)");
  metrics->add_option("--dataset-name", mt_dataset, "Dataset label (default from manifest)");
  metrics->add_option("--baseline", mt_baseline, "Baseline run directory or metrics.json for AES");

  // build-sft
  auto* sft = app.add_subcommand("build-sft", "Build an SFT dataset");
  std::string sf_strategy;
  fs::path sf_dataset;
  std::optional<fs::path> sf_drafts;
  std::string sf_teacher;
  sft->add_option("--strategy", sf_strategy, "mbt-s | mbt-r | rejection")->required();
  sft->add_option("--dataset", sf_dataset, "Unified corpus file")->required()->check(CLI::ExistingFile);
  sft->add_option("--drafts", sf_drafts, "Student run directory (mbt-r, rejection)");
  sft->add_option("--teacher", sf_teacher, "Teacher model (default from config)");

  // grpo-check
  auto* grpo_cmd = app.add_subcommand("grpo-check", "Evaluate GRPO groups from a JSONL file");
  fs::path gr_file;
  bool gr_norm = false;
  grpo_cmd->add_option("--group-file", gr_file, "Group records")->required()->check(CLI::ExistingFile);
  grpo_cmd->add_flag("--normalize-by-length", gr_norm, "Divide each output's surrogate by its length");

  // report
  auto* report = app.add_subcommand("report", "Render tables from metrics files");
  std::vector<fs::path> rp_runs;
  std::string rp_baseline;
  std::string rp_format = "text";
  report->add_option("--runs", rp_runs, "Run directories or metrics.json files")->required();
  report->add_option("--baseline", rp_baseline, "Baseline label or run id")->required();
  report->add_option("--format", rp_format, "Format printed to stdout: text | csv")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto out = in_output ? *in_output : require_out(g, "dir") / "corpus.jsonl";
      const auto s = mbt::run_ingest(mbt::parse_source(in_format), in_input,
                                     mbt::parse_split(in_split), out, in_supporting);
      std::cout << "wrote " << s.examples << " examples to " << out.string() << '\n';
    } else if (*generate) {
      const auto cfg = resolve_config(g);
      const auto templates = mbt::load_templates(cfg);
      const auto gw = make_gateway(cfg);
      mbt::GenerateRequest req{gen_dataset, mbt::parse_trace_mode(gen_mode), gen_model, gen_run_id,
                               require_out(g, "run-dir"), gen_seed};
      const auto s = mbt::run_generate(cfg, gw, templates, req);
      std::cout << "run " << s.run_id << ": " << s.records << " records (" << s.generated
                << " new), " << s.degenerated << " degenerated, " << s.missing_tags
                << " without answer tags\n";
      print_stats(gw);
    } else if (*judge) {
      const auto cfg = resolve_config(g);
      const auto templates = mbt::load_templates(cfg);
      const auto gw = make_gateway(cfg);
      mbt::JudgeRequest req{jd_run, jd_dataset, mbt::parse_judge_kinds(jd_kinds), jd_model};
      const auto s = mbt::run_judge(cfg, gw, templates, req);
      std::cout << s.verdicts << " verdicts, " << s.flagged << " flagged, " << s.excluded
                << " excluded\n";
      print_stats(gw);
    } else if (*metrics) {
      const auto cfg = resolve_config(g);
      const auto rep = mbt::run_metrics(cfg, {mt_run, mt_label, mt_dataset, mt_baseline});
      std::cout << mbt::to_json(rep).dump(2) << '\n';
    } else if (*sft) {
      const auto cfg = resolve_config(g);
      const auto templates = mbt::load_templates(cfg);
      const auto gw = make_gateway(cfg);
      mbt::BuildSftRequest req{mbt::parse_sft_origin(sf_strategy), sf_dataset, sf_drafts, sf_teacher,
                               require_out(g, "file")};
      const auto s = mbt::run_build_sft(cfg, gw, templates, req);
      std::cout << "exported " << s.exported.count << " records (" << s.exported.bytes
                << " bytes), skipped " << s.exported.skipped << ", rejected " << s.rejected << '\n';
      if (s.exported.count == 0) std::cerr << "warning: no SFT records were produced\n";
      print_stats(gw);
    } else if (*grpo_cmd) {
      mbt::grpo::Options opts;
      opts.normalize_surrogate_by_length = gr_norm;
      mbt::run_grpo_check(gr_file, std::cout, opts);
    } else if (*report) {
      const auto format = mbt::parse_report_format(rp_format);
      const auto tables = mbt::run_report({rp_runs, rp_baseline, require_out(g, "dir")});
      std::cout << mbt::emit(tables, format);
    }
  } catch (const mbt::ConfigError& e) {
    print_error(e);
    return 2;
  } catch (const std::exception& e) {
    print_error(e);
    return 1;
  }
  return 0;
}
