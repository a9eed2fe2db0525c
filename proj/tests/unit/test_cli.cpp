#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "e2e.hpp"
#include "tempdir.hpp"

using namespace mbt::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + quote(MBT_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

}  // namespace

TEST_CASE("help lists every subcommand") {
  const auto o = run("--help");
  CHECK(o.status == 0);
  for (const auto* sub : {"ingest", "generate", "judge", "metrics", "build-sft", "grpo-check", "report"}) {
    CHECK_MESSAGE(o.out.find(sub) != std::string::npos, sub);
  }
}

TEST_CASE("http transport without a key is a configuration error") {
  TempDir dir;
  const auto corpus = (dir / "corpus.jsonl").string();
  const auto raw = (e2e_dir() / "hotpot_dev.json").string();
  REQUIRE(run("ingest --format hotpotqa --input " + quote(raw) + " --output " + quote(corpus)).status == 0);
  {
    std::ofstream cfg(dir / "http.json");
    cfg << R"({"models": {"student": "s"}})";
  }
  const auto o = run("--config " + quote((dir / "http.json").string()) + " --out " +
                         quote((dir / "run").string()) + " generate --dataset " + quote(corpus),
                     "env -u MBT_API_KEY");
  CHECK(o.status == 2);
  CHECK(o.out.find("MBT_API_KEY") != std::string::npos);
}

TEST_CASE("bad config and bad arguments exit non-zero") {
  TempDir dir;
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << R"({"concurency": 2})";
  }
  const auto o = run("--config " + quote((dir / "bad.json").string()) + " --out " +
                     quote((dir / "r").string()) + " metrics --run " + quote(dir.path().string()));
  CHECK(o.status == 2);
  CHECK(run("generate").status != 0);
  CHECK(run("report --runs x --baseline Base --format xml --out " + quote(dir.path().string())).status != 0);
}

TEST_CASE("offline chain through the binary") {
  TempDir dir;
  const auto cfg = quote((e2e_dir() / "config.json").string());
  const auto raw = quote((e2e_dir() / "hotpot_dev.json").string());
  const auto d = [&](const char* rel) { return quote((dir / rel).string()); };

  REQUIRE(run("--out " + d("") + " ingest --format hotpotqa --input " + raw).status == 0);
  const auto gen = run("--config " + cfg + " --concurrency 2 --out " + d("base") +
                       " generate --dataset " + d("corpus.jsonl"), "env -u MBT_API_KEY");
  INFO(gen.out);
  REQUIRE(gen.status == 0);
  CHECK(gen.out.find("20 records") != std::string::npos);
  const auto jd = run("--config " + cfg + " judge --run " + d("base"));
  INFO(jd.out);
  REQUIRE(jd.status == 0);
  const auto mt = run("--config " + cfg + " metrics --run " + d("base") + " --label Base");
  INFO(mt.out);
  REQUIRE(mt.status == 0);
  CHECK(mt.out.find("\"label\": \"Base\"") != std::string::npos);
  const auto rp = run("--out " + d("report") + " report --runs " + d("base") + " --baseline Base --format csv");
  INFO(rp.out);
  REQUIRE(rp.status == 0);
  CHECK(rp.out.find("Dataset,Method,EM,F1,LLM") != std::string::npos);
  CHECK(fs::exists(dir / "report/report.txt"));
}

TEST_CASE("grpo-check prints one line per group") {
  TempDir dir;
  {
    std::ofstream out(dir / "g.jsonl");
    out << R"({"rewards": [1, 0, 0.5], "outputs": [)"
        << R"({"logp_current": [-0.1, -0.2], "logp_old": [-0.1, -0.25], "logp_ref": [-0.1, -0.2]},)"
        << R"({"logp_current": [-0.3], "logp_old": [-0.3], "logp_ref": [-0.3]},)"
        << R"({"logp_current": [-0.4], "logp_old": [-0.5], "logp_ref": [-0.4]}]})" << '\n';
  }
  const auto o = run("grpo-check --group-file " + quote((dir / "g.jsonl").string()));
  CHECK(o.status == 0);
  CHECK(o.out.find("\"objective\"") != std::string::npos);
  CHECK(std::count(o.out.begin(), o.out.end(), '\n') == 1);
}
