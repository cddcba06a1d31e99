#include <doctest.h>

#include "helpers.hpp"
#include "riskscore/bias.hpp"
#include "riskscore/error.hpp"
#include "riskscore/sampling.hpp"
#include "riskscore/synth.hpp"

using namespace riskscore;
using testing::doc;
using testing::labeled;

namespace {

Clustering pool(std::size_t n) {
  Clustering c;
  for (std::size_t i = 0; i < n; ++i) c.clusters.push_back({"k" + std::to_string(i), {"d" + std::to_string(i)}});
  return c;
}

std::set<std::string> ids(const std::vector<LabeledCluster>& l) {
  std::set<std::string> out;
  for (const auto& x : l) out.insert(x.cluster.id);
  return out;
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("SizeBuckets") {
  const SizeBuckets b;
  CHECK(b.bucket_of(1) == 0);
  CHECK(b.bucket_of(4) == 1);
  CHECK(b.bucket_of(16) == 2);
  CHECK(b.bucket_of(64) == 3);
  CHECK(b.bucket_of(1000) == 4);
  CHECK(b.label(1) == "2-4");
  CHECK(b.label(4) == "65+");
}

TEST_CASE("random_negatives") {
  const auto p = pool(10);
  CHECK(random_negatives(p, {}, 0, 1).empty());
  const auto all = random_negatives(p, {"k0"}, 9, 1);
  CHECK(all.size() == 9);
  CHECK_FALSE(ids(all).count("k0"));
  for (const auto& l : all) {
    CHECK(l.label == Label::negative);
    CHECK(l.source == LabelSource::sampled_noisy);
  }
  CHECK(random_negatives(p, {}, 3, 42) == random_negatives(p, {}, 3, 42));
  CHECK(ids(random_negatives(p, {}, 3, 42)).size() == 3);
  CHECK_THROWS_AS(random_negatives(p, {"k1"}, 10, 1), InsufficientPoolError);
}

TEST_CASE("apportion is largest remainder") {
  auto q = apportion({{"a", 1.0}, {"b", 1.0}}, 10);
  CHECK(q.at("a") == 5);
  CHECK(q.at("b") == 5);
  q = apportion({{"a", 1.0}, {"b", 1.0}, {"c", 1.0}}, 10);
  CHECK(q.at("a") == 4);
  CHECK(q.at("b") == 3);
  q = apportion({{"a", 0.0}, {"b", 3.0}}, 7);
  CHECK(q.at("a") == 0);
  CHECK(q.at("b") == 7);
}

TEST_CASE("conditioned_negatives") {
  // Two domains, single-document clusters.
  std::vector<Document> docs;
  Clustering clusters;
  std::vector<LabeledCluster> positives;
  for (int i = 0; i < 40; ++i) {
    const std::string id = "d" + std::to_string(i);
    docs.push_back(doc(id, "x", i % 2 ? "b.example" : "a.example"));
    clusters.clusters.push_back({"k" + std::to_string(i), {id}});
  }
  const Corpus corpus(docs);
  const std::vector<FeatureSpec> f = {{"domain", {}, ""}};
  const SizeBuckets buckets;

  SUBCASE("all positives in one stratum") {
    positives = {labeled("k0", {"d0"}, Label::positive), labeled("k2", {"d2"}, Label::positive)};
    const auto s = conditioned_negatives(clusters, corpus, positives, f, buckets, 5, 3);
    REQUIRE(s.negatives.size() == 5);
    for (const auto& n : s.negatives) CHECK(corpus.find(n.cluster.members[0])->source_domain == "a.example");
    CHECK_FALSE(ids(s.negatives).count("k0"));
    CHECK_FALSE(ids(s.negatives).count("k2"));
    CHECK(s.deficits.empty());
  }
  SUBCASE("50/50 positives give (5,5) quotas") {
    positives = {labeled("k0", {"d0"}, Label::positive), labeled("k1", {"d1"}, Label::positive)};
    const auto s = conditioned_negatives(clusters, corpus, positives, f, buckets, 10, 3);
    CHECK(s.quotas.at("a.example / size 1") == 5);
    CHECK(s.quotas.at("b.example / size 1") == 5);
    std::size_t total = 0;
    for (const auto& [k, v] : s.plan.target) total += v;
    CHECK(total == 10);
  }
  SUBCASE("exhausted stratum moves its deficit") {
    positives = {labeled("k0", {"d0"}, Label::positive)};
    const auto s = conditioned_negatives(clusters, corpus, positives, f, buckets, 25, 3);
    CHECK(s.negatives.size() == 25);
    CHECK(s.deficits.at("a.example / size 1") == 6);
  }
  SUBCASE("pool too small") {
    positives = {labeled("k0", {"d0"}, Label::positive)};
    try {
      conditioned_negatives(clusters, corpus, positives, f, buckets, 40, 3);
      FAIL("expected InsufficientPoolError");
    } catch (const InsufficientPoolError& e) {
      CHECK_FALSE(e.deficits().empty());
    }
  }
  SUBCASE("clusters overlapping a positive document are excluded") {
    positives = {labeled("truth0", {"d0", "d2"}, Label::positive)};
    const auto s = conditioned_negatives(clusters, corpus, positives, f, buckets, 18, 3);
    CHECK_FALSE(ids(s.negatives).count("k0"));
    CHECK_FALSE(ids(s.negatives).count("k2"));
  }
  SUBCASE("single stratum equals a restricted random draw in distribution") {
    positives = {labeled("k0", {"d0"}, Label::positive)};
    const auto a = conditioned_negatives(clusters, corpus, positives, f, buckets, 4, 11);
    const auto b = conditioned_negatives(clusters, corpus, positives, f, buckets, 4, 11);
    CHECK(a.negatives == b.negatives);
  }
}

TEST_CASE("verify_alignment") {
  synth::SynthConfig sc;
  sc.num_clusters = 400;
  sc.positive_fraction = 0.1;
  sc.domain.beta = 1.0;
  int conditioned_ok = 0;
  int random_flagged = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    sc.seed = seed;
    const auto d = synth::generate(sc);
    const auto pos = d.positives();
    const std::vector<FeatureSpec> f = {{"domain", {}, ""}};
    const auto cond = conditioned_negatives(d.truth, d.corpus, pos, f, SizeBuckets{}, pos.size(), seed);
    conditioned_ok += verify_alignment(d.corpus, pos, cond.negatives, f, 0.05).mitigation_successful();
    std::set<std::string> exclude;
    for (const auto& p : pos) exclude.insert(p.cluster.id);
    const auto rnd = random_negatives(d.truth, exclude, pos.size(), seed);
    random_flagged += !verify_alignment(d.corpus, pos, rnd, f, 0.05).mitigation_successful();
  }
  CHECK(conditioned_ok >= 8);
  CHECK(random_flagged == 10);

  SUBCASE("identical distributions") {
    std::vector<Document> docs;
    std::vector<LabeledCluster> p, n;
    for (int i = 0; i < 20; ++i) {
      docs.push_back(doc("d" + std::to_string(i), "x", i % 4 < 2 ? "a" : "b"));
      (i % 2 ? n : p).push_back(labeled("k" + std::to_string(i), {"d" + std::to_string(i)}, i % 2 ? Label::negative : Label::positive));
    }
    CHECK(verify_alignment(Corpus(docs), p, n, std::vector<FeatureSpec>{{"domain", {}, ""}}, 0.05).mitigation_successful());
  }
}

}
