#include <doctest.h>

#include "canonical.hpp"
#include "mbt/errors.hpp"
#include "mbt/prompts.hpp"

using namespace mbt;
using namespace mbt::testing;

TEST_CASE("every template matches its golden rendering") {
  const auto lib = TemplateLibrary::load_default();
  for (const auto id : kAllTemplates) {
    CAPTURE(to_string(id));
    const auto& tmpl = lib.get(id);
    const auto msgs = lib.render(id, canonical_bindings(tmpl));
    REQUIRE(msgs.size() == tmpl.messages.size());
    for (std::size_t i = 0; i < msgs.size(); ++i) {
      const auto path = golden_path(id, i, msgs[i].role);
      REQUIRE(std::filesystem::exists(path));
      CHECK(msgs[i].content == read_file(path));
    }
  }
}

TEST_CASE("message roles follow the templates") {
  const auto lib = TemplateLibrary::load_default();
  const auto meta = lib.render(TemplateId::metacog_prompting, {{"question", "Q"}, {"context", "C"}});
  REQUIRE(meta.size() == 2);
  CHECK(meta[0].role == Role::system);
  CHECK(meta[0].content.find("five-phase flow") != std::string::npos);
  const auto base = lib.render(TemplateId::base_qa, {{"question", "Q"}, {"context", "C"}});
  REQUIRE(base.size() == 1);
  CHECK(base[0].role == Role::user);
  CHECK(base[0].content.find("Question: Q") != std::string::npos);
  CHECK(base[0].content.find("Documents:\nC") != std::string::npos);
  CHECK(meta[1].content == base[0].content);
}

TEST_CASE("binding errors name the placeholder") {
  const auto lib = TemplateLibrary::load_default();
  try {
    lib.render(TemplateId::answer_inclusion, {{"question", "Q"}, {"answer", "A"}});
    FAIL("expected TemplateError");
  } catch (const TemplateError& e) {
    CHECK(e.placeholder() == "reasoning_trace");
  }
  try {
    lib.render(TemplateId::metacognition, {{"reasoning_trace", "T"}, {"question", "Q"}});
    FAIL("expected TemplateError");
  } catch (const TemplateError& e) {
    CHECK(e.placeholder() == "question");
  }
  CHECK_THROWS_AS(parse_template_id("fig_a9"), ConfigError);
}

TEST_CASE("substitution is single pass and leaves no placeholders") {
  const auto lib = TemplateLibrary::load_default();
  const auto msgs = lib.render(TemplateId::base_qa, {{"question", "{context}"}, {"context", "{question}"}});
  CHECK(msgs[0].content.find("Question: {context}") != std::string::npos);
  CHECK(msgs[0].content.find("Documents:\n{question}") != std::string::npos);
  for (const auto id : kAllTemplates) {
    const auto& t = lib.get(id);
    for (const auto& m : lib.render(id, canonical_bindings(t))) {
      for (const auto& p : t.placeholders) CHECK(m.content.find("{" + p + "}") == std::string::npos);
    }
  }
}

TEST_CASE("parse_template strips trailing whitespace and trims bodies") {
  const auto t = parse_template(TemplateId::base_qa, "[[system]]\n  sys  \n\n[[user]]\nline one   \n{question}\n\n");
  REQUIRE(t.messages.size() == 2);
  CHECK(t.messages[0].body == "sys");
  CHECK(t.messages[1].body == "line one\n{question}");
  CHECK(t.placeholders.contains("question"));
}
