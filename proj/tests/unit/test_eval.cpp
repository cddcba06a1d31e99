#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "riskscore/error.hpp"
#include "riskscore/eval.hpp"
#include "riskscore/synth.hpp"

using namespace riskscore;
using testing::doc;
using testing::labeled;

namespace {

std::vector<LabeledCluster> singletons(std::size_t pos, std::size_t neg) {
  std::vector<LabeledCluster> out;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    out.push_back(labeled("k" + std::to_string(i), {"d" + std::to_string(i)},
                          i < pos ? Label::positive : Label::negative));
  }
  return out;
}

Corpus corpus_for(const std::vector<LabeledCluster>& l, const std::string& domain = "d") {
  std::vector<Document> docs;
  for (const auto& c : l)
    for (const auto& m : c.cluster.members) docs.push_back(doc(m, "x", domain));
  return Corpus(docs);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("split") {
  const auto l = singletons(5, 5);
  const auto s = split(l, 0.2, 3);
  CHECK(s.test.size() == 2);
  CHECK(s.train.size() == 8);
  CHECK(oracle::crossing(s.train, s.test) == 0);
  const auto again = split(l, 0.2, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK_THROWS_AS(split(singletons(1, 5), 0.2, 3), UnsplittableError);
  CHECK_THROWS_AS(split(l, 1.5, 3), InputError);
}

TEST_CASE("roc_auc") {
  using P = std::pair<double, Label>;
  const std::vector<P> perfect = {{0.9, Label::positive}, {0.8, Label::positive}, {0.1, Label::negative}};
  CHECK(roc_auc(perfect).auc == 1.0);
  const std::vector<P> half = {{0.9, Label::positive}, {0.8, Label::negative}, {0.1, Label::positive}};
  CHECK(roc_auc(half).auc == doctest::Approx(0.5));
  const std::vector<P> ties = {{0.3, Label::positive}, {0.3, Label::negative}, {0.3, Label::negative}};
  CHECK(roc_auc(ties).auc == doctest::Approx(0.5));
  const std::vector<P> one = {{0.3, Label::positive}};
  CHECK_THROWS_AS(roc_auc(one), UndefinedMetricError);
  const auto r = roc_auc(half);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.back().fpr == 1.0);
  CHECK(r.points.back().tpr == 1.0);
  SUBCASE("oracle agreement on random sets") {
    std::mt19937_64 gen(12);
    for (int t = 0; t < 200; ++t) {
      std::vector<P> s;
      const std::size_t n = 2 + gen() % 60;
      for (std::size_t i = 0; i < n; ++i)
        s.emplace_back(static_cast<double>(gen() % 10) / 10.0, (gen() & 1) ? Label::positive : Label::negative);
      s[0].second = Label::positive;
      s[1].second = Label::negative;
      const auto rr = roc_auc(s);
      CHECK(rr.auc == doctest::Approx(oracle::pairwise_auc(s)).epsilon(1e-12));
      CHECK(oracle::trapezoid(rr.points) == doctest::Approx(rr.auc).epsilon(1e-12));
    }
  }
}

TEST_CASE("make_folds") {
  SUBCASE("balanced strata pass on the first attempt") {
    std::vector<LabeledCluster> l;
    std::vector<Document> docs;
    int i = 0;
    for (const char* dom : {"a", "b"})
      for (Label lab : {Label::positive, Label::negative})
        for (int k = 0; k < 10; ++k, ++i) {
          const std::string id = "d" + std::to_string(i);
          docs.push_back(doc(id, "x", dom));
          l.push_back(labeled("k" + std::to_string(i), {id}, lab));
        }
    FoldConfig fc;
    fc.features = {{"domain", {}, ""}};
    const auto plan = make_folds(l, Corpus(docs), fc);
    CHECK(plan.attempts == 1);
    CHECK(plan.homogeneous());
    CHECK_FALSE(plan.flagged());
    CHECK(oracle::fold_crossings(plan, l) == 0);
    require_leak_free(plan, l);
  }
  SUBCASE("k equal to the rarer class size") {
    const auto l = singletons(4, 11);
    FoldConfig fc;
    fc.k = 4;
    const auto plan = make_folds(l, corpus_for(l), fc);
    std::vector<int> pos(4, 0), neg(4, 0);
    for (const auto& c : l) (c.label == Label::positive ? pos : neg)[plan.assignment.at(c.cluster.id)]++;
    for (int f = 0; f < 4; ++f) {
      CHECK(pos[f] >= 1);
      CHECK(neg[f] >= 1);
    }
    CHECK_THROWS_AS(make_folds(l, corpus_for(l), FoldConfig{5}), UnsplittableError);
  }
  SUBCASE("a group that is entirely positive is flagged") {
    std::vector<LabeledCluster> l;
    std::vector<Document> docs;
    for (int i = 0; i < 40; ++i) {
      const bool positive = i < 20;
      const std::string id = "d" + std::to_string(i);
      docs.push_back(doc(id, "x", positive ? "only-positive" : (i % 2 ? "a" : "b")));
      l.push_back(labeled("k" + std::to_string(i), {id}, positive ? Label::positive : Label::negative));
    }
    FoldConfig fc;
    fc.features = {{"domain", {}, ""}};
    fc.max_retries = 3;
    const auto plan = make_folds(l, Corpus(docs), fc);
    CHECK(plan.flagged());
    CHECK(oracle::fold_crossings(plan, l) == 0);
  }
  SUBCASE("documents shared across clusters are leakage") {
    std::vector<LabeledCluster> l = singletons(5, 5);
    l[6].cluster.members.push_back("d0");
    CHECK_THROWS_AS(make_folds(l, corpus_for(singletons(5, 5)), FoldConfig{}), LeakageError);
  }
}

TEST_CASE("cross_validate") {
  SUBCASE("strong planted signal") {
    synth::SynthConfig sc;
    sc.seed = 5;
    const auto d = synth::generate(sc);
    FoldConfig fc;
    fc.seed = 5;
    const auto plan = make_folds(d.labels, d.corpus, fc);
    EvalConfig ec;
    ec.recheck_features = {{"domain", {}, ""}};
    ec.keep_fold_models = true;
    const auto r = cross_validate(d.labels, plan, d.corpus, ec);
    CHECK(r.auc >= 0.9);
    CHECK(r.fold_aucs.size() == 5);
    CHECK(r.bias_recheck.has_value());
    CHECK(r.scores.size() == d.labels.size());
    for (const auto& f : r.folds) {
      CHECK(f.model.has_value());
      std::set<std::string> tr(f.train_clusters.begin(), f.train_clusters.end());
      for (const auto& t : f.test_clusters) CHECK_FALSE(tr.count(t));
    }
    // Fold vocabularies only see training clusters.
    const auto vocab0 = vocabulary_for(
        [&] {
          std::vector<LabeledCluster> tr;
          for (const auto& l : d.labels)
            if (plan.assignment.at(l.cluster.id) != 0) tr.push_back(l);
          return tr;
        }(),
        d.corpus, ec.vocabulary);
    CHECK(r.folds[0].vocabulary_size == vocab0.size());
  }
  SUBCASE("permuted labels give chance AUC") {
    double sum = 0;
    const int runs = 6;
    for (int s = 1; s <= runs; ++s) {
      synth::SynthConfig sc;
      sc.seed = static_cast<std::uint64_t>(s);
      auto d = synth::generate(sc);
      std::vector<Label> labels;
      for (const auto& l : d.labels) labels.push_back(l.label);
      std::mt19937_64 gen(s);
      std::shuffle(labels.begin(), labels.end(), gen);
      for (std::size_t i = 0; i < labels.size(); ++i) d.labels[i].label = labels[i];
      FoldConfig fc;
      fc.seed = static_cast<std::uint64_t>(s);
      const auto plan = make_folds(d.labels, d.corpus, fc);
      EvalConfig ec;
      ec.train.epochs = 100;
      sum += cross_validate(d.labels, plan, d.corpus, ec).auc;
    }
    CHECK(sum / runs >= 0.4);
    CHECK(sum / runs <= 0.6);
  }
}

TEST_CASE("evaluate_model and aggregation") {
  synth::SynthConfig sc;
  const auto d = synth::generate(sc);
  EvalConfig ec;
  const auto m = fit(d.labels, d.corpus, ec);
  CHECK(evaluate_model(m, d.labels, d.corpus, Aggregation::cluster_vector).auc > 0.9);
  CHECK(evaluate_model(m, d.labels, d.corpus, Aggregation::mean_document_score).auc > 0.9);
}

TEST_CASE("eval report files") {
  testing::TempDir dir("eval");
  synth::SynthConfig sc;
  sc.num_clusters = 60;
  const auto d = synth::generate(sc);
  const auto plan = make_folds(d.labels, d.corpus, FoldConfig{3});
  const auto r = cross_validate(d.labels, plan, d.corpus, EvalConfig{});
  write_eval_report(r, plan, dir.path());
  CHECK(testing::read_file(dir / "roc.csv").rfind("threshold,fpr,tpr\n", 0) == 0);
  CHECK(testing::read_file(dir / "eval_summary.json").find("\"auc\"") != std::string::npos);
  CHECK_FALSE(format_eval_report(r, plan).empty());
}

}
