// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures. argv[1], when given, is the CLI used for the scale run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "riskscore/bias.hpp"
#include "riskscore/clustering.hpp"
#include "riskscore/eval.hpp"
#include "riskscore/pipeline.hpp"
#include "riskscore/sampling.hpp"
#include "riskscore/synth.hpp"

namespace fs = std::filesystem;
using namespace riskscore;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome table2() {
  const auto table = synth::table2_fixture();
  const auto r = chi_squared_test(table, 0.05);
  const auto& n = table.counts();
  const double oracle = oracle::chi2_2x2(n[0][0], n[0][1], n[1][0], n[1][1]);
  const bool ok = r.degrees_of_freedom == 1 && r.p_value < 1e-5 &&
                  std::abs(r.statistic - oracle) <= 1.0 && r.rejected;
  return {ok, fmt("chi2=%.3f oracle=%.3f df=%.0f p=%.3g", r.statistic, oracle,
                  r.degrees_of_freedom.value_or(-1), r.p_value)};
}

// 2 -------------------------------------------------------------------------
Outcome kwik_ratio() {
  constexpr int kGraphs = 200;
  constexpr int kSeeds = 1000;
  std::mt19937_64 gen(20240611);
  int worst_graph = -1;
  double worst_margin = -1e9;
  int failures = 0;
  double total_mean = 0.0, total_opt = 0.0;
  for (int g = 0; g < kGraphs; ++g) {
    const std::size_t n = 2 + gen() % 7;  // 2..8
    const double density = std::uniform_real_distribution<double>(0.15, 0.85)(gen);
    oracle::Adjacency adj(n, std::vector<bool>(n, false));
    std::vector<std::string> ids;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::uniform_real_distribution<double>(0, 1)(gen) < density) {
          adj[i][j] = adj[j][i] = true;
          edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), kPhoneMatch});
        }
      }
    }
    const SimilarityGraph graph(ids, edges);
    const double opt = static_cast<double>(oracle::brute_force_min_cost(adj));
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < kSeeds; ++s) {
      const double c = static_cast<double>(disagreement_cost(kwikcluster(graph, s), graph));
      sum += c;
      sq += c * c;
    }
    const double mean = sum / kSeeds;
    const double var = std::max(0.0, sq / kSeeds - mean * mean) * kSeeds / (kSeeds - 1);
    const double se = std::sqrt(var / kSeeds);
    const double margin = mean - (3.0 * opt + 3.0 * se);
    if (margin > 0) ++failures;
    if (margin > worst_margin) {
      worst_margin = margin;
      worst_graph = g;
    }
    total_mean += mean;
    total_opt += opt;
  }
  return {failures == 0, fmt("%.0f graphs x %.0f seeds, mean cost %.3f vs mean OPT %.3f, violations %.0f",
                             kGraphs, kSeeds, total_mean / kGraphs, total_opt / kGraphs) +
                             fmt(", tightest graph %.0f margin %.3f", worst_graph, worst_margin) +
                             fmt(", violations %.0f", failures)};
}

// 3 -------------------------------------------------------------------------
Outcome auc_oracle() {
  std::mt19937_64 gen(7);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + gen() % 200;
    const int levels = 1 + static_cast<int>(gen() % 20);  // coarse grids force ties
    std::vector<std::pair<double, Label>> scores;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = (t % 2 == 0) ? std::uniform_real_distribution<double>(0, 1)(gen)
                                    : static_cast<double>(gen() % levels) / levels;
      scores.emplace_back(s, (gen() & 1) ? Label::positive : Label::negative);
    }
    scores[0].second = Label::positive;
    scores[1].second = Label::negative;
    const auto r = roc_auc(scores);
    worst = std::max({worst, std::abs(r.auc - oracle::pairwise_auc(scores)),
                      std::abs(oracle::trapezoid(r.points) - oracle::pairwise_auc(scores))});
  }
  return {worst <= 1e-9, fmt("1000 sets, max |pairwise - trapezoid| = %.3g", worst)};
}

// 4 -------------------------------------------------------------------------
Outcome gradient_check() {
  std::mt19937_64 gen(11);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + gen() % 20;
    const std::size_t m = 2 + gen() % 49;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Example> ex;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<SparseVector::Entry> e;
      for (std::size_t j = 0; j < d; ++j) {
        if (gen() % 3 != 0) e.emplace_back(static_cast<std::uint32_t>(j), normal(gen));
      }
      ex.push_back({SparseVector(e), (gen() & 1) ? Label::positive : Label::negative});
    }
    std::vector<double> w(d);
    for (auto& x : w) x = normal(gen);
    const double b = normal(gen);
    TrainConfig cfg;
    cfg.lambda = std::exp(std::uniform_real_distribution<double>(std::log(1e-4), std::log(1.0))(gen));
    const auto analytic = objective(ex, w, b, cfg);
    const auto numeric = oracle::numeric_gradient(ex, w, b, cfg, 1e-5);
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      const double a = j < d ? analytic.grad_weights[j] : analytic.grad_intercept;
      diff += (a - numeric[j]) * (a - numeric[j]);
      na += a * a;
      nn += numeric[j] * numeric[j];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300}));
  }
  return {worst < 1e-6, fmt("100 instances, max relative error %.3g", worst)};
}

// 5 -------------------------------------------------------------------------
std::set<std::string> overlapping(const Clustering& discovered,
                                  const std::vector<LabeledCluster>& labeled) {
  const auto docs = oracle::documents_of(labeled);
  std::set<std::string> out;
  for (const auto& c : discovered.clusters) {
    for (const auto& m : c.members) {
      if (docs.count(m)) {
        out.insert(c.id);
        break;
      }
    }
  }
  return out;
}

bool any_in(const std::vector<std::pair<std::string, double>>& ranked,
            const std::set<std::string>& tokens) {
  for (const auto& [t, w] : ranked) {
    if (tokens.count(t)) return true;
  }
  return false;
}

Outcome mitigation() {
  constexpr int kSeeds = 50;
  int a_ok = 0, null_ok = 0, proxy_ok = 0, cv_ok = 0, heldout_ok = 0;
  double min_cv = 1.0, min_held = 1.0, max_p_a = 0.0;
  std::size_t min_docs = SIZE_MAX;
  const std::vector<FeatureSpec> domain = {{"domain", {}, ""}};
  for (int seed = 1; seed <= kSeeds; ++seed) {
    synth::SynthConfig sc;
    // Negatives outnumber positives 9:1 so every (domain, size) stratum of
    // the positives has a matching negative pool.
    sc.num_clusters = 400;
    sc.positive_fraction = 0.1;
    sc.domain.beta = 1.0;
    sc.seed = static_cast<std::uint64_t>(seed);
    const auto data = synth::generate(sc);
    min_docs = std::min(min_docs, data.corpus.size());
    ClusterConfig cc;
    cc.seed = sc.seed;
    const Clustering discovered = cluster_corpus(data.corpus, cc).clustering;
    const auto positives = data.positives();
    const auto exclude = overlapping(discovered, positives);
    const std::string proxy = synth::proxy_token(sc.domain.values[0]);

    // (a) unmitigated
    auto labeled_a = positives;
    const auto rnd = random_negatives(discovered, exclude, positives.size(), sc.seed);
    labeled_a.insert(labeled_a.end(), rnd.begin(), rnd.end());
    const auto audit_a = audit(data.corpus, labeled_a, domain, 0.05);
    const double p_a = audit_a.results.at("domain").p_value;
    max_p_a = std::max(max_p_a, p_a);
    EvalConfig ec;
    ec.train.seed = sc.seed;
    const auto model_a = fit(labeled_a, data.corpus, ec);
    if (p_a < 1e-5 && any_in(feature_importance(model_a, 10), {proxy})) ++a_ok;

    // (b) conditioned negatives + proxy removal
    const auto cond = conditioned_negatives(discovered, data.corpus, positives, domain,
                                            SizeBuckets{}, positives.size(), sc.seed);
    auto labeled_b = positives;
    labeled_b.insert(labeled_b.end(), cond.negatives.begin(), cond.negatives.end());
    const Corpus stripped = remove_tokens(data.corpus, data.proxy_lexicon);
    if (audit(stripped, labeled_b, domain, 0.05).results.at("domain").p_value >= 0.05) ++null_ok;

    FoldConfig fc;
    fc.features = domain;
    fc.seed = sc.seed;
    const auto plan = make_folds(labeled_b, stripped, fc);
    ec.top_k = 50;
    const auto report = cross_validate(labeled_b, plan, stripped, ec);
    if (!any_in(feature_importance(report.final_model, 50), data.proxy_lexicon)) ++proxy_ok;
    min_cv = std::min(min_cv, report.auc);
    if (report.auc >= 0.9) ++cv_ok;

    synth::SynthConfig hc = sc;
    hc.domain.beta = 0.0;
    hc.seed = 1000000 + sc.seed;
    const auto held = synth::generate(hc);
    const double held_auc =
        evaluate_model(report.final_model, held.labels, remove_tokens(held.corpus, held.proxy_lexicon),
                       Aggregation::cluster_vector)
            .auc;
    min_held = std::min(min_held, held_auc);
    if (held_auc >= 0.9) ++heldout_ok;
  }
  const bool ok = min_docs >= 2000 && a_ok == kSeeds && null_ok >= 0.9 * kSeeds &&
                  proxy_ok == kSeeds && cv_ok == kSeeds && heldout_ok == kSeeds;
  return {ok, fmt("400 clusters, 10%% positive, beta 1; min docs %.0f; (a) proxy top-10 & p<1e-5 in %.0f/50 (max p %.3g); ", min_docs, a_ok,
                  max_p_a) +
                  fmt("(b) re-test p>=0.05 in %.0f/50, no proxy in top-50 in %.0f/50, ", null_ok,
                      proxy_ok) +
                  fmt("CV AUC>=0.9 in %.0f/50 (min %.4f), held-out AUC>=0.9 in %.0f/50 (min %.4f)",
                      cv_ok, min_cv, heldout_ok, min_held)};
}

// 6 -------------------------------------------------------------------------
Outcome leakage() {
  std::size_t plans = 0, splits = 0, crossings = 0, checked = 0;
  for (int seed = 1; seed <= 20; ++seed) {
    synth::SynthConfig sc;
    sc.num_clusters = 60 + 10 * seed;
    sc.domain.beta = (seed % 3) / 2.0;
    sc.seed = static_cast<std::uint64_t>(seed);
    const auto data = synth::generate(sc);
    for (std::size_t k : {2, 3, 5, 10}) {
      FoldConfig fc;
      fc.k = k;
      fc.features = {{"domain", {}, ""}};
      fc.seed = sc.seed + k;
      const auto plan = make_folds(data.labels, data.corpus, fc);
      crossings += oracle::fold_crossings(plan, data.labels);
      checked += data.labels.size();
      ++plans;
      if (k == 3) {
        EvalConfig ec;
        ec.train.epochs = 20;
        const auto report = cross_validate(data.labels, plan, data.corpus, ec);
        std::map<std::string, const LabeledCluster*> by_id;
        for (const auto& l : data.labels) by_id[l.cluster.id] = &l;
        for (const auto& f : report.folds) {
          std::vector<LabeledCluster> tr, te;
          for (const auto& id : f.train_clusters) tr.push_back(*by_id.at(id));
          for (const auto& id : f.test_clusters) te.push_back(*by_id.at(id));
          crossings += oracle::crossing(tr, te);
        }
      }
    }
    for (double frac : {0.1, 0.25, 0.5}) {
      const auto s = split(data.labels, frac, sc.seed);
      crossings += oracle::crossing(s.train, s.test);
      ++splits;
    }
  }
  return {crossings == 0, fmt("%.0f fold plans, %.0f splits, %.0f cluster placements, crossing documents %.0f",
                              plans, splits, checked, crossings)};
}

// 7 -------------------------------------------------------------------------
Outcome recovery() {
  double worst = 1.0;
  for (int seed = 1; seed <= 10; ++seed) {
    synth::SynthConfig sc;
    sc.num_clusters = 300;
    sc.domain.purity = 1.0;
    sc.location.purity = 1.0;
    sc.duplication_rate = 0.0;
    sc.seed = static_cast<std::uint64_t>(seed);
    const auto data = synth::generate(sc);
    GraphConfig gc;
    gc.use_text = false;
    gc.use_location = false;
    const auto graph = build_graph(data.corpus, gc);
    worst = std::min(worst, adjusted_rand_index(kwikcluster(graph, sc.seed), data.truth));
  }
  return {worst == 1.0, fmt("10 corpora, min adjusted Rand %.6f", worst)};
}

// 8 -------------------------------------------------------------------------
Outcome scale(const char* cli) {
  const fs::path dir = fs::temp_directory_path() / "riskscore_scale";
  fs::remove_all(dir);
  PipelineConfig config;
  config.paths.out = dir;
  config.synth.num_clusters = 12800;
  std::size_t docs = 0;
  if (cli) {
    const std::string base = std::string(cli) + " %s --out " + dir.string() + " > " +
                             (dir.string() + "_log.txt") + " 2>&1";
    char cmd[1024];
    std::snprintf(cmd, sizeof cmd, base.c_str(), "synth --set synth.num_clusters=12800");
    if (std::system(cmd) != 0) return {false, "synth failed"};
    std::snprintf(cmd, sizeof cmd, base.c_str(), "pipeline");
    const std::string log = dir.string() + "_log.txt";
    if (std::system(cmd) != 0) return {false, "pipeline failed, see " + log};
  } else {
    run_stage(config, Stage::synth);
    for (Stage s : pipeline_stages()) run_stage(config, s);
  }
  std::ifstream in(dir / "corpus.jsonl");
  std::string line;
  while (std::getline(in, line)) docs += !line.empty();
  const bool ok = docs >= 100000 && fs::exists(dir / "eval_summary.json");
  return {ok, fmt("%.0f documents", static_cast<double>(docs))};
}

}  // namespace

int main(int argc, char** argv) {
  const char* cli = argc > 1 ? argv[1] : nullptr;
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "Table 2 chi-squared reproduction", 1.0, table2},
      {2, "KwikCluster 3-approximation", 300.0, kwik_ratio},
      {3, "AUC pairwise = trapezoid (1e-9)", 30.0, auc_oracle},
      {4, "logistic gradient vs finite differences (1e-6)", 30.0, gradient_check},
      {5, "end-to-end bias mitigation", 600.0, mitigation},
      {6, "no train/test document leakage", 600.0, leakage},
      {7, "planted cluster recovery (ARI = 1)", 600.0, recovery},
      {8, "100k-document pipeline", 600.0, [cli] { return scale(cli); }},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = out.pass && secs < c.budget_s;
    failures += !pass;
    std::printf("%s criterion %d: %s -- %s; %.2fs (limit %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  return failures;
}
