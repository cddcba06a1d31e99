#include <doctest.h>

#include "helpers.hpp"
#include "riskscore/corpus.hpp"
#include "riskscore/csv.hpp"
#include "riskscore/error.hpp"
#include "riskscore/text.hpp"

using namespace riskscore;
using testing::TempDir;
using testing::write_file;

TEST_SUITE("corpus") {

TEST_CASE("tokenize lowercases word runs") {
  CHECK(text::tokenize("Hello, World! 555-0123") ==
        std::vector<std::string>{"hello", "world", "555", "0123"});
  CHECK(text::tokenize("").empty());
  CHECK(text::tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("clean strips markup and collapses whitespace") {
  CHECK(text::clean("  <b>Hot</b>\n\tdeal  ") == "Hot deal");
  CHECK(text::clean("a<br/>b") == "a b");
}

TEST_CASE("ngrams and shingles") {
  const std::vector<std::string> t = {"a", "b", "c"};
  CHECK(text::ngrams(t, 2) == std::vector<std::string>{"a b", "b c"});
  CHECK(text::ngrams(t, 4).empty());
  CHECK(text::shingle_hashes(t, 2).size() == 2);
  CHECK(text::shingle_hashes({"a"}, 3).size() == 1);
  CHECK(text::shingle_hashes({}, 3).empty());
  CHECK(text::jaccard({}, {}) == 0.0);
}

TEST_CASE("csv escaping round-trips through split") {
  const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", ""};
  CHECK(csv::split(csv::join(fields)) == fields);
  CHECK(csv::number(0.5) == "0.5");
  CHECK(csv::number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("csv read validates header and width") {
  TempDir dir("csv");
  write_file(dir / "ok.csv", "a,b\n1,2\n");
  CHECK(csv::read(dir / "ok.csv", {"a", "b"}).rows.size() == 1);
  write_file(dir / "bad.csv", "a,b\n1\n");
  CHECK_THROWS_AS(csv::read(dir / "bad.csv", {"a", "b"}), InputError);
  CHECK_THROWS_AS(csv::read(dir / "ok.csv", {"x"}), InputError);
  CHECK_THROWS_AS(csv::read(dir / "missing.csv", {"a"}), IoError);
}

TEST_CASE("normalize_phone") {
  CHECK(normalize_phone("(555) 012-3456") == "5550123456");
  CHECK_FALSE(normalize_phone("call me!!").has_value());
  CHECK(normalize_phone("1-555-012-3456") == "5550123456");
  CHECK_FALSE(normalize_phone("12345").has_value());
  CHECK(normalize_phone("0123456") == "0123456");
}

TEST_CASE("scan_phones finds phone-like runs") {
  CHECK(scan_phones("call 555-012-3456 or (555) 765 4321") ==
        std::vector<std::string>{"5550123456", "5557654321"});
  CHECK(scan_phones("born 1999, size 12").empty());
}

TEST_CASE("extract_attributes") {
  const Gazetteer gaz({"springfield"});
  RawRecord raw;
  raw.id = "a";
  raw.domain = "Site.Example";
  raw.text = "meet in springfield, 555-012-3456";
  auto d = extract_attributes(raw, gaz);
  CHECK(d.phones == std::vector<std::string>{"5550123456"});
  CHECK(d.locations == std::vector<std::string>{"springfield"});
  CHECK(d.source_domain == "site.example");

  SUBCASE("no gazetteer hits") {
    raw.text = "nothing here";
    CHECK(extract_attributes(raw, gaz).locations.empty());
  }
  SUBCASE("same phone twice is deduplicated") {
    raw.text = "555-012-3456 again (555) 012-3456";
    raw.phones = {"555.012.3456"};
    CHECK(extract_attributes(raw, gaz).phones == std::vector<std::string>{"5550123456"});
  }
  SUBCASE("missing fields are malformed") {
    raw.id.reset();
    CHECK_THROWS_AS(extract_attributes(raw, gaz), MalformedRecordError);
  }
  SUBCASE("markup-only text is malformed") {
    raw.text = "<div></div>";
    CHECK_THROWS_AS(extract_attributes(raw, gaz), MalformedRecordError);
  }
  SUBCASE("bad date is malformed") {
    raw.date = "yesterday";
    CHECK_THROWS_AS(extract_attributes(raw, gaz), MalformedRecordError);
  }
  SUBCASE("multi-word gazetteer terms") {
    const Gazetteer g2({"new york", "york"});
    raw.text = "in New  York tonight, york later";
    CHECK(extract_attributes(raw, g2).locations == std::vector<std::string>{"new york", "york"});
  }
}

TEST_CASE("parse_record accepts strings or arrays and keeps extras") {
  auto r = parse_record(R"({"id":"x","domain":"d","text":"t","phones":"555-012-3456","age":23,"note":"hi"})");
  CHECK(r.phones == std::vector<std::string>{"555-012-3456"});
  CHECK(r.extras.at("age") == "23");
  CHECK(r.extras.at("note") == "hi");
  CHECK_THROWS_AS(parse_record("not json"), MalformedRecordError);
  CHECK_THROWS_AS(parse_record("[1,2]"), MalformedRecordError);
}

TEST_CASE("ingest") {
  TempDir dir("ingest");
  SUBCASE("empty file gives an empty corpus") {
    write_file(dir / "c.jsonl", "");
    const auto r = ingest(dir / "c.jsonl");
    CHECK(r.corpus.size() == 0);
    CHECK(r.corpus.schema().empty());
  }
  SUBCASE("three records read back") {
    write_file(dir / "c.jsonl",
               "{\"id\":\"a\",\"domain\":\"d\",\"text\":\"one\"}\n"
               "{\"id\":\"b\",\"domain\":\"d\",\"text\":\"two\"}\n"
               "\n"
               "{\"id\":\"c\",\"domain\":\"d\",\"text\":\"three\"}\n");
    const auto r = ingest(dir / "c.jsonl");
    REQUIRE(r.corpus.size() == 3);
    CHECK(r.corpus.documents()[0].id == "a");
    CHECK(r.corpus.documents()[2].text == "three");
    CHECK(r.corpus.find("b") != nullptr);
    CHECK(r.skipped == 0);
  }
  SUBCASE("a record missing its id is skipped") {
    write_file(dir / "c.jsonl",
               "{\"id\":\"a\",\"domain\":\"d\",\"text\":\"one\"}\n"
               "{\"domain\":\"d\",\"text\":\"two\"}\n"
               "{\"id\":\"c\",\"domain\":\"d\",\"text\":\"three\"}\n");
    const auto r = ingest(dir / "c.jsonl");
    CHECK(r.corpus.size() == 2);
    CHECK(r.skipped == 1);
  }
  SUBCASE("duplicate ids: first wins") {
    write_file(dir / "c.jsonl",
               "{\"id\":\"a\",\"domain\":\"d\",\"text\":\"one\"}\n"
               "{\"id\":\"a\",\"domain\":\"d\",\"text\":\"two\"}\n");
    const auto r = ingest(dir / "c.jsonl");
    CHECK(r.corpus.size() == 1);
    CHECK(r.corpus.documents()[0].text == "one");
    CHECK(r.skipped == 1);
  }
  SUBCASE("no valid record") {
    write_file(dir / "c.jsonl", "garbage\n{\"id\":1}\n");
    CHECK_THROWS_AS(ingest(dir / "c.jsonl"), EmptyCorpusError);
  }
  SUBCASE("limit caps accepted records") {
    write_file(dir / "c.jsonl",
               "{\"id\":\"a\",\"domain\":\"d\",\"text\":\"one\"}\n"
               "{\"id\":\"b\",\"domain\":\"d\",\"text\":\"two\"}\n");
    IngestOptions o;
    o.limit = 1;
    CHECK(ingest(dir / "c.jsonl", o).corpus.size() == 1);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(ingest(dir / "none.jsonl"), IoError); }
}

TEST_CASE("write_corpus then ingest is the identity") {
  TempDir dir("roundtrip");
  Document a = testing::doc("a", "hi <there> 555-012-3456", "x.example", {"5550123456"}, {"springfield"});
  a.text = text::clean(a.text);
  a.posted_date = parse_date("2016-03-04");
  a.extras["age"] = "23";
  Document b = testing::doc("b", "second", "y.example");
  const Corpus c({a, b});
  write_corpus(c, dir / "c.jsonl");
  const auto back = ingest(dir / "c.jsonl").corpus;
  CHECK(back.documents() == c.documents());
  CHECK(back.schema() == c.schema());
}

TEST_CASE("Corpus rejects invalid documents") {
  CHECK_THROWS_AS(Corpus({testing::doc("a", "x"), testing::doc("a", "y")}), InputError);
  CHECK_THROWS_AS(Corpus({testing::doc("a", "x", "d", {"12"})}), InputError);
  CHECK_THROWS_AS(Corpus({testing::doc("a", "x", "d", {}, {"Upper"})}), InputError);
  auto d = testing::doc("a", "x");
  d.extras["text"] = "shadow";
  CHECK_THROWS_AS(Corpus({d}), InputError);
}

TEST_CASE("remove_tokens") {
  const Corpus c({testing::doc("a", "visit springfield now")});
  CHECK(remove_tokens(c, {"springfield"}).documents()[0].text == "visit now");
  CHECK(remove_tokens(c, {}).documents() == c.documents());
  CHECK(remove_tokens(c, {"now", "visit"}).documents()[0].text == "springfield");
  CHECK(remove_tokens(c, {"Springfield"}).documents()[0].text == "visit now");
  SUBCASE("removal is idempotent") {
    const auto once = remove_tokens(c, {"visit"});
    CHECK(remove_tokens(once, {"visit"}).documents() == once.documents());
  }
  SUBCASE("texts may become empty") {
    CHECK(remove_tokens(c, {"visit", "springfield", "now"}).documents()[0].text.empty());
  }
}

TEST_CASE("load_lexicon skips comments and blanks") {
  TempDir dir("lex");
  write_file(dir / "l.txt", "# comment\n\nSpringfield\n  milton \n");
  CHECK(load_lexicon(dir / "l.txt") == std::set<std::string>{"milton", "springfield"});
}

TEST_CASE("parse_date") {
  CHECK(parse_date("2016-02-29").has_value());
  CHECK_FALSE(parse_date("2015-02-29").has_value());
  CHECK(parse_date("2016-01-05T10:00:00Z").has_value());
  CHECK(format_date(*parse_date("2016-01-05")) == "2016-01-05");
}

}
