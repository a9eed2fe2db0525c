#include <doctest.h>

#include <sstream>

#include "mbt/dataset.hpp"
#include "mbt/errors.hpp"

using namespace mbt;

namespace {

std::string hotpot_record(int docs) {
  std::string ctx;
  for (int i = 0; i < docs; ++i) {
    if (i) ctx += ",";
    ctx += R"(["T)" + std::to_string(i) + R"(", ["First sentence.", "Second sentence."]])";
  }
  return R"({"_id": "h1", "question": "Q?", "answer": "A", "context": [)" + ctx + "]}";
}

}  // namespace

TEST_CASE("hotpotqa record maps documents and joins sentences") {
  std::istringstream in("[" + hotpot_record(10) + "]");
  const auto ex = load_dataset(Source::hotpotqa, in);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].id == "h1");
  CHECK(ex[0].documents.size() == 10);
  CHECK(ex[0].documents[3].title == "T3");
  CHECK(ex[0].documents[3].body == "First sentence. Second sentence.");
  CHECK_FALSE(ex[0].documents[0].is_supporting.has_value());
}

TEST_CASE("musique paragraphs keep support flags") {
  std::string paras;
  for (int i = 0; i < 20; ++i) {
    if (i) paras += ",";
    paras += R"({"idx": )" + std::to_string(i) + R"(, "title": "P)" + std::to_string(i) +
             R"(", "paragraph_text": "Text.", "is_supporting": )" + (i % 7 == 0 ? "true" : "false") + "}";
  }
  std::istringstream in(R"({"id": "m1", "question": "Q?", "answer": "A", "paragraphs": [)" + paras + "]}\n");
  const auto ex = load_dataset(Source::musique, in);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].documents.size() == 20);
  int supporting = 0;
  for (const auto& d : ex[0].documents) supporting += d.is_supporting.value_or(false) ? 1 : 0;
  CHECK(supporting == 3);
  CHECK(supporting_only(ex[0]).documents.size() == 3);
}

TEST_CASE("malformed records name the field") {
  std::istringstream in(R"([{"_id": "x", "question": "Q?", "context": [["T", ["s"]]]}])");
  try {
    load_dataset(Source::hotpotqa, in);
    FAIL("expected RecordError");
  } catch (const RecordError& e) {
    CHECK(e.index() == 0);
    CHECK(e.field_path() == "answer");
  }
  CHECK_THROWS_AS(parse_source("squad"), ConfigError);
  CHECK(parse_source("2wiki") == Source::twowiki);
}

TEST_CASE("render_context is deterministic and ordered") {
  QAExample one{"i", "q", "a", {{"A", "B", std::nullopt}}, Source::hotpotqa, Split::validation};
  CHECK(render_context(one) == "Title: A\nB");
  QAExample two = one;
  two.documents.push_back({"C", "D", std::nullopt});
  CHECK(render_context(two) == "Title: A\nB\n\nTitle: C\nD");
  CHECK(render_context(two) == render_context(two));
}

TEST_CASE("corpus round trip preserves id, question and answer") {
  std::istringstream in("[" + hotpot_record(2) + "]");
  const auto ex = load_dataset(Source::hotpotqa, in, Split::train);
  std::stringstream buf;
  write_corpus(buf, ex);
  const auto back = read_corpus(buf);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == ex[0]);
}
