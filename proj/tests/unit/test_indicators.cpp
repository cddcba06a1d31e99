#include <doctest.h>

#include "helpers.hpp"
#include "riskscore/error.hpp"
#include "riskscore/indicators.hpp"

using namespace riskscore;
using testing::doc;

TEST_SUITE("indicators") {

TEST_CASE("apply_indicators") {
  const Corpus c({doc("a", "new in town", "s1", {"5550000001"}, {"x"}),
                  doc("b", "new girl rates $200", "s2", {"5550000002"}, {"y"}),
                  doc("c", "same place", "s1", {"5550000001"}, {"x"})});
  IndicatorRule movement{"movement", RuleScope::cluster, PredicateKind::distinct_locations, {}, "", 2};
  const RuleSet rules({movement});
  CHECK(apply_indicators({"k", {"a", "b"}}, c, rules).at("movement"));
  CHECK_FALSE(apply_indicators({"k", {"a", "c"}}, c, rules).at("movement"));
  CHECK(apply_indicators({"k", {"a"}}, c, RuleSet()).empty());

  SUBCASE("lexicon and pattern rules, both scopes") {
    IndicatorRule lex{"newness", RuleScope::cluster, PredicateKind::lexicon, {"new", "new girl"}, "", 2};
    IndicatorRule rate{"rates", RuleScope::document, PredicateKind::pattern, {}, "\\$[0-9]+", 1};
    IndicatorRule doc_lex{"newness_doc", RuleScope::document, PredicateKind::lexicon, {"new"}, "", 2};
    IndicatorRule phones{"phones", RuleScope::cluster, PredicateKind::distinct_phones, {}, "", 2};
    IndicatorRule domains{"domains", RuleScope::cluster, PredicateKind::distinct_domains, {}, "", 2};
    const RuleSet r({lex, rate, doc_lex, phones, domains});
    const auto out = apply_indicators({"k", {"a", "b"}}, c, r);
    CHECK(out.at("newness"));
    CHECK(out.at("rates"));
    CHECK_FALSE(out.at("newness_doc"));
    CHECK(out.at("phones"));
    CHECK(out.at("domains"));
    CHECK_FALSE(apply_indicators({"k", {"a", "c"}}, c, r).at("phones"));
    CHECK(apply_indicators(c.documents()[1], r).at("rates"));
  }
}

TEST_CASE("rule compilation errors name the rule") {
  IndicatorRule bad{"broken", RuleScope::document, PredicateKind::pattern, {}, "([", 1};
  try {
    RuleSet r({bad});
    FAIL("expected RuleCompilationError");
  } catch (const RuleCompilationError& e) {
    CHECK(e.rule() == "broken");
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
  IndicatorRule empty{"empty", RuleScope::cluster, PredicateKind::lexicon, {}, "", 1};
  CHECK_THROWS_AS(RuleSet({empty}), RuleCompilationError);
  IndicatorRule zero{"zero", RuleScope::cluster, PredicateKind::distinct_phones, {}, "", 0};
  CHECK_THROWS_AS(RuleSet({zero}), RuleCompilationError);
  IndicatorRule ok{"dup", RuleScope::cluster, PredicateKind::distinct_phones, {}, "", 1};
  CHECK_THROWS_AS(RuleSet({ok, ok}), RuleCompilationError);
}

TEST_CASE("load_rules") {
  testing::TempDir dir("rules");
  testing::write_file(dir / "terms.txt", "outcall\n# c\nnew girl\n");
  testing::write_file(dir / "r.jsonl",
                      "{\"name\": \"movement\", \"scope\": \"cluster\", \"kind\": \"distinct_locations\", \"k\": 2}\n"
                      "\n"
                      "{\"name\": \"terms\", \"kind\": \"lexicon\", \"lexicon\": \"terms.txt\"}\n"
                      "{\"name\": \"inline\", \"kind\": \"lexicon\", \"terms\": [\"a\", \"b\"]}\n"
                      "{\"name\": \"rates\", \"scope\": \"document\", \"kind\": \"pattern\", \"pattern\": \"\\\\$[0-9]+\"}\n");
  const auto rules = load_rules(dir / "r.jsonl");
  REQUIRE(rules.size() == 4);
  CHECK(rules[0].threshold == 2);
  CHECK(rules[1].lexicon == std::set<std::string>{"new girl", "outcall"});
  CHECK(rules[2].scope == RuleScope::cluster);
  CHECK(rules[3].pattern == "\\$[0-9]+");
  testing::write_file(dir / "bad.jsonl", "{\"name\": \"x\", \"kind\": \"telepathy\"}\n");
  CHECK_THROWS_AS(load_rules(dir / "bad.jsonl"), RuleCompilationError);
}

}
