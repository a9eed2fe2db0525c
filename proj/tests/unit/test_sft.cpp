#include <doctest.h>

#include <filesystem>

#include "mbt/errors.hpp"
#include "mbt/sft.hpp"
#include "mbt/trace.hpp"
#include "synthetic.hpp"

using namespace mbt;
using mbt::testing::reply;
using mbt::testing::ScriptedTransport;

namespace {

QAExample webster() {
  return {"ex1", "Who is the child of Caroline LeRoy's spouse?", "Fletcher Webster",
          {{"Daniel Webster", "Daniel Webster had a son, Fletcher Webster.", std::nullopt}},
          Source::hotpotqa, Split::validation};
}

std::filesystem::path temp_file(const char* name) {
  const auto p = std::filesystem::temp_directory_path() / "mbt-sft" / name;
  std::filesystem::create_directories(p.parent_path());
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("mbt-s builds a record from the teacher reply") {
  const auto lib = TemplateLibrary::load_default();
  auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{
      {200, reply("  Goal restated.\n\nVerification: Fletcher Webster.  ")}, {200, reply("")},
      {200, reply("Fletcher Webster")}});
  Gateway gw(t);
  TeacherContext ctx{gw, lib, "teacher"};
  const auto r = build_mbt_s(ctx, webster());
  CHECK(r.origin == SftOrigin::mbt_s);
  CHECK(r.target_answer == "Fletcher Webster");
  CHECK(r.target_trace == "Goal restated.\n\nVerification: Fletcher Webster.");
  CHECK(r.user_prompt == student_prompt(webster(), lib));
  const auto req = t->requests().front();
  CHECK(req.reasoning_effort == std::optional<std::string>("high"));
  CHECK(req.messages.front().content.find("Fletcher Webster") != std::string::npos);
  CHECK_THROWS_AS(build_mbt_s(ctx, webster()), ConstructionError);
  CHECK_THROWS_AS(build_mbt_s(ctx, webster()), ConstructionError);
}

TEST_CASE("mbt-s answer verification") {
  const auto lib = TemplateLibrary::load_default();
  auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{
      {200, reply("reasoning <answer>Daniel Webster</answer>")}});
  Gateway gw(t);
  TeacherContext ctx{gw, lib, "teacher"};
  ctx.verify_final_answer = true;
  CHECK_THROWS_AS(build_mbt_s(ctx, webster()), ConstructionError);
}

TEST_CASE("mbt-r sends a three-message second turn") {
  const auto lib = TemplateLibrary::load_default();
  auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{
      {200, reply("turn one solution")}, {200, reply("rewritten trace ending at Fletcher Webster")}});
  Gateway gw(t);
  TeacherContext ctx{gw, lib, "teacher"};
  TraceRecord draft;
  draft.example_id = "ex1";
  draft.trace_text = "Daniel Webster's son... but the question wants a daughter, so unknown.";
  const auto r = build_mbt_r(ctx, webster(), draft, true);
  CHECK(r.origin == SftOrigin::mbt_r);
  CHECK(r.draft_was_correct == std::optional(true));
  CHECK(r.target_trace == "rewritten trace ending at Fletcher Webster");
  const auto reqs = t->requests();
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0].messages.size() == 1);
  CHECK(reqs[0].seed_tag == "mbt_r-turn1");
  REQUIRE(reqs[1].messages.size() == 3);
  CHECK(reqs[1].messages[0].role == Role::user);
  CHECK(reqs[1].messages[1].role == Role::assistant);
  CHECK(reqs[1].messages[1].content == "turn one solution");
  CHECK(reqs[1].messages[2].role == Role::user);
  CHECK(reqs[1].messages[2].content.find(draft.trace_text) != std::string::npos);

  TraceRecord empty = draft;
  empty.trace_text = "";
  CHECK_THROWS_AS(build_mbt_r(ctx, webster(), empty, false), ConstructionError);
}

TEST_CASE("rejection filter keeps correct, non-degenerated traces verbatim") {
  const auto lib = TemplateLibrary::load_default();
  std::map<std::string, QAExample, std::less<>> ex;
  std::vector<TraceRecord> drafts;
  CorrectnessMap correct;
  for (int i = 0; i < 10; ++i) {
    auto e = webster();
    e.id = "e" + std::to_string(i);
    ex.emplace(e.id, e);
    TraceRecord d;
    d.example_id = e.id;
    d.trace_text = "trace  " + std::to_string(i) + "\n";
    d.prediction = {"Fletcher Webster", ExtractionStatus::tagged};
    d.degenerated = i == 0;
    drafts.push_back(d);
    correct[e.id] = i < 6;
  }
  const auto res = rejection_filter(drafts, correct, ex, lib);
  CHECK(res.records.size() == 5);
  CHECK(res.degenerated == 1);
  CHECK(res.incorrect == 4);
  CHECK(res.records[0].target_trace == drafts[1].trace_text);
  for (auto& [k, v] : correct) v = false;
  CHECK(rejection_filter(drafts, correct, ex, lib).records.empty());
}

TEST_CASE("export writes chat records that round-trip") {
  SFTRecord r;
  r.example_id = "ex1";
  r.user_prompt = "prompt";
  r.target_trace = "T";
  r.target_answer = "A";
  r.teacher_model = "teacher";
  CHECK(assistant_content(r) == "<think>T</think><answer>A</answer>");
  CHECK(round_trips(r));
  const auto path = temp_file("one.jsonl");
  const std::vector<SFTRecord> one{r};
  const auto s = export_sft(one, path);
  CHECK(s.count == 1);
  CHECK(s.bytes == std::filesystem::file_size(path));
  const auto back = load_sft(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);

  SFTRecord bad = r;
  bad.target_trace = "has </think> inside";
  SFTRecord long_one = r;
  long_one.target_trace = std::string(50, 'x');
  const std::vector<SFTRecord> mixed{r, bad, long_one};
  const auto s2 = export_sft(mixed, path, 10);
  CHECK(s2.count == 1);
  CHECK(s2.skipped == 2);
  CHECK_THROWS_AS(export_sft({}, path), DomainError);
  CHECK_THROWS_AS(export_sft(one, "/proc/forbidden/out.jsonl"), IoError);
}
