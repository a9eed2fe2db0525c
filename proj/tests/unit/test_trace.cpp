#include <doctest.h>

#include <filesystem>

#include "mbt/errors.hpp"
#include "mbt/trace.hpp"
#include "synthetic.hpp"

using namespace mbt;
using mbt::testing::reply;
using mbt::testing::ScriptedTransport;

namespace {

QAExample webster() {
  return {"ex1",
          "Who is the child of Caroline LeRoy's spouse?",
          "Fletcher Webster",
          {{"Caroline LeRoy", "Caroline LeRoy Webster was the second wife of Daniel Webster.", std::nullopt},
           {"Daniel Webster", "Daniel Webster had a son, Fletcher Webster.", std::nullopt}},
          Source::hotpotqa,
          Split::validation};
}

TraceOptions options() {
  TraceOptions o;
  o.model = "student";
  o.run_id = "run";
  return o;
}

}  // namespace

TEST_CASE("extract_answer") {
  CHECK(extract_answer("...<answer>Paris</answer>") == Prediction{"Paris", ExtractionStatus::tagged});
  CHECK(extract_answer("<answer>A</answer> then <answer>B</answer>") ==
        Prediction{"B", ExtractionStatus::tagged});
  CHECK(extract_answer("no tags here") == Prediction{"", ExtractionStatus::missing_tags});
  CHECK(extract_answer("<answer>  </answer>").status == ExtractionStatus::missing_tags);
  CHECK(extract_answer("<answer>open only").status == ExtractionStatus::missing_tags);
  CHECK(extract_answer("<answer>A</answer>B</answer>").answer_text == "A");
  CHECK(extract_answer("<answer><answer>X</answer>").answer_text == "X");
}

TEST_CASE("detect_degeneration") {
  CHECK_FALSE(detect_degeneration(reply("x", FinishReason::stop, 812)));
  CHECK(detect_degeneration(reply("x", FinishReason::length)));
  CHECK(detect_degeneration(reply("x", FinishReason::other, 32768)));
  CHECK_FALSE(detect_degeneration(reply("x", FinishReason::other, 32767)));
}

TEST_CASE("make_trace_record fills every field") {
  const auto r = make_trace_record(
      webster(), options(),
      reply("<think>Daniel Webster's  son\n is Fletcher Webster.</think><answer>Fletcher Webster</answer>",
            FinishReason::stop, 40));
  CHECK(r.prediction == Prediction{"Fletcher Webster", ExtractionStatus::tagged});
  CHECK(r.trace_text == "Daniel Webster's  son\n is Fletcher Webster.");
  CHECK(r.char_count == std::string("Daniel Webster's son is Fletcher Webster.").size());
  CHECK(r.reported_tokens == std::optional<std::int64_t>(40));
  CHECK_FALSE(r.degenerated);
  CHECK(r.gold_answer == "Fletcher Webster");

  const auto d = make_trace_record(webster(), options(),
                                   reply("<think>loop <answer>X</answer>", FinishReason::length, 32768));
  CHECK(d.degenerated);
  CHECK(d.prediction == Prediction{"", ExtractionStatus::degenerated});

  const auto m = make_trace_record(webster(), options(), reply("The answer is Fletcher Webster."));
  CHECK(m.prediction == Prediction{"", ExtractionStatus::missing_tags});
}

TEST_CASE("trace requests use the configured sampling and prompt") {
  const auto lib = TemplateLibrary::load_default();
  auto o = options();
  const auto base = trace_request(webster(), o, lib);
  CHECK(base.messages.size() == 1);
  CHECK(base.temperature == doctest::Approx(0.6));
  CHECK(base.top_p == doctest::Approx(0.95));
  o.mode = TraceMode::metaprompt;
  CHECK(trace_request(webster(), o, lib).messages.size() == 2);
}

TEST_CASE("generate_trace persists and attaches the example id to errors") {
  const auto dir = std::filesystem::temp_directory_path() / "mbt-trace-store";
  std::filesystem::remove_all(dir);
  const auto lib = TemplateLibrary::load_default();
  auto t = std::make_shared<ScriptedTransport>(std::vector<ScriptedTransport::Step>{
      {200, reply("<think>t</think><answer>Fletcher Webster</answer>")}, {401, {}}});
  Gateway gw(t);
  {
    RunStore store(dir);
    const auto r = generate_trace(webster(), options(), lib, gw, &store);
    CHECK(store.contains("ex1"));
    CHECK(r.prediction.answer_text == "Fletcher Webster");
    auto other = webster();
    other.id = "ex2";
    try {
      generate_trace(other, options(), lib, gw, &store);
      FAIL("expected ExampleError");
    } catch (const ExampleError& e) {
      CHECK(e.example_id() == "ex2");
      CHECK_THROWS_AS(std::rethrow_if_nested(e), TransportError);
    }
  }
  RunStore reopened(dir);
  CHECK(reopened.records().size() == 1);
  CHECK(RunStore::read(dir)[0].prediction.answer_text == "Fletcher Webster");
}

TEST_CASE("run store finalize orders by dataset and is idempotent on ids") {
  const auto dir = std::filesystem::temp_directory_path() / "mbt-trace-order";
  std::filesystem::remove_all(dir);
  RunStore store(dir);
  for (const char* id : {"c", "a", "b", "a"}) {
    TraceRecord r;
    r.example_id = id;
    store.append(r);
  }
  const std::vector<std::string> order{"a", "b", "c"};
  store.finalize(order);
  const auto back = RunStore::read(dir);
  REQUIRE(back.size() == 3);
  CHECK(back[0].example_id == "a");
  CHECK(back[2].example_id == "c");
}
