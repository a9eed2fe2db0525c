#include <doctest.h>

#include "mbt/errors.hpp"
#include "mbt/metrics.hpp"

using namespace mbt;

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("The Fletcher Webster.") == "fletcher webster");
  CHECK(normalize_answer("") == "");
  CHECK(normalize_answer("A  B,C") == "b c");
  CHECK(normalize_answer("an apple-tree") == "apple tree");
  CHECK(normalize_answer("theory") == "theory");
}

TEST_CASE("exact match and token f1") {
  CHECK(exact_match("Fletcher Webster", "fletcher webster"));
  CHECK_FALSE(exact_match("Daniel Webster", "Fletcher Webster"));
  CHECK(exact_match("the X", "X"));
  CHECK(token_f1("Fletcher Webster", "Fletcher Webster") == 1.0);
  CHECK(token_f1("Daniel Webster", "Fletcher Webster") == doctest::Approx(0.5));
  CHECK(token_f1("alpha beta", "gamma delta") == 0.0);
  CHECK(token_f1("", "") == 1.0);
  CHECK(token_f1("", "x") == 0.0);
  CHECK(token_f1("a a b", "a b b") == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("substring match") {
  CHECK(substring_match("... is Fletcher Webster, who ...", "Fletcher Webster"));
  CHECK_FALSE(substring_match("nothing relevant", "Fletcher Webster"));
  CHECK(substring_match("we found x here", "the X"));
}

TEST_CASE("aes reproduces reference values") {
  CHECK(std::abs(aes({755, 22.18}, {576, 45.26}) - 3.36) < 0.005);
  CHECK(std::abs(aes({1403, 57.67}, {485, 63.43}) - 0.95) < 0.005);
  CHECK(std::abs(aes({755, 22.18}, {726, 20.81}) - (-0.27)) < 0.005);
  CHECK(aes({500, 40}, {500, 40}) == 0.0);
  CHECK_THROWS_AS(aes({0, 40}, {500, 40}), DomainError);
  CHECK_THROWS_AS(aes({500, 0}, {500, 40}), DomainError);
}

TEST_CASE("xi score") {
  std::vector<TruncationResult> ts{{TruncationMode::overthinking, 10, 6, true, 0.4},
                                   {TruncationMode::overthinking, 10, 10, true, 0.0}};
  CHECK(*xi_score(ts) == doctest::Approx(0.2));
  CHECK_FALSE(xi_score({}).has_value());
  std::vector<TruncationResult> one{{TruncationMode::underthinking, 200, 50, true, 0.75}};
  CHECK(*xi_score(one) == 0.75);
  ts.push_back(one[0]);
  CHECK_THROWS_AS(xi_score(ts), DomainError);
}

namespace {

TraceRecord rec(std::string id, std::int64_t len, bool degen = false) {
  TraceRecord r;
  r.example_id = std::move(id);
  r.run_id = "run";
  r.reported_tokens = len;
  r.degenerated = degen;
  return r;
}

}  // namespace

TEST_CASE("length stats") {
  std::vector<TraceRecord> rs{rec("a", 100), rec("b", 300)};
  auto s = length_stats(rs, {{"a", true}, {"b", false}});
  CHECK(*s.overall.mean == 200);
  CHECK(*s.correct.mean == 100);
  CHECK(*s.incorrect.mean == 300);

  std::vector<TraceRecord> ten;
  CorrectnessMap c;
  for (int i = 0; i < 9; ++i) {
    ten.push_back(rec("n" + std::to_string(i), 500));
    c["n" + std::to_string(i)] = true;
  }
  ten.push_back(rec("d", 32768, true));
  c["d"] = false;
  s = length_stats(ten, c);
  CHECK(*s.valid.mean == 500);
  CHECK(*s.overall.mean == doctest::Approx((500.0 * 9 + 32768) / 10));
  CHECK(s.valid.count == 9);

  s = length_stats(rs, {{"a", true}, {"b", true}});
  CHECK_FALSE(s.incorrect.mean.has_value());
  CHECK_THROWS_AS(length_stats(rs, {{"a", true}}), DomainError);

  TraceRecord est;
  est.char_count = 10;
  CHECK(record_length(est) == 3);
}

TEST_CASE("aggregate") {
  std::vector<TraceRecord> rs;
  std::vector<VerdictRecord> vs;
  const char* preds[] = {"Gold", "Gold", "Wrong", ""};
  for (int i = 0; i < 4; ++i) {
    auto r = rec("e" + std::to_string(i), 100 * (i + 1), i == 3);
    r.gold_answer = "Gold";
    r.prediction = {preds[i], i == 3 ? ExtractionStatus::degenerated : ExtractionStatus::tagged};
    r.trace_text = i == 2 ? "mentions gold here" : "nothing";
    rs.push_back(r);
    VerdictRecord v;
    v.example_id = r.example_id;
    v.run_id = "run";
    v.kind = JudgeKind::correctness;
    v.correct = i < 2;
    vs.push_back(v);
  }
  AggregateOptions o;
  o.label = "Base";
  const auto rep = aggregate(rs, vs, o);
  CHECK(rep.degen_count == 1);
  CHECK(rep.em == 50.0);
  CHECK(*rep.llm_acc == 50.0);
  CHECK(*rep.substring_incorrect == 50.0);
  CHECK(rep.aes_by_metric.empty());

  const auto self = aggregate(rs, vs, o, &rep);
  for (const auto& [k, v] : self.aes_by_metric) CHECK(v == 0.0);
  CHECK(self.aes_by_metric.size() == 3);
  o.require_aes = true;
  CHECK_THROWS_AS(aggregate(rs, vs, o), DomainError);

  const auto back = metric_report_from_json(nlohmann::json::parse(to_json(self).dump()));
  CHECK(back == self);
}

TEST_CASE("inclusion stratified over incorrect records") {
  std::vector<TraceRecord> rs;
  std::vector<VerdictRecord> vs;
  for (int i = 0; i < 4; ++i) {
    auto r = rec("w" + std::to_string(i), 100);
    r.gold_answer = "Gold";
    r.prediction = {"Other", ExtractionStatus::tagged};
    rs.push_back(r);
    VerdictRecord c;
    c.example_id = r.example_id;
    c.run_id = "run";
    c.kind = JudgeKind::correctness;
    c.correct = false;
    vs.push_back(c);
    VerdictRecord inc = c;
    inc.kind = JudgeKind::inclusion;
    inc.correct.reset();
    inc.inclusive = i < 3;
    vs.push_back(inc);
  }
  AggregateOptions o;
  const auto rep = aggregate(rs, vs, o);
  CHECK(*rep.inclusion_incorrect == 75.0);
  CHECK_FALSE(rep.inclusion_correct.has_value());
}
