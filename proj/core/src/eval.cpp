#include "riskscore/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "riskscore/csv.hpp"
#include "riskscore/error.hpp"
#include "riskscore/random.hpp"

namespace riskscore {

using nlohmann::json;

namespace {

std::pair<std::vector<const LabeledCluster*>, std::vector<const LabeledCluster*>> by_class(
    std::span<const LabeledCluster> labeled) {
  std::vector<const LabeledCluster*> pos;
  std::vector<const LabeledCluster*> neg;
  for (const auto& l : labeled) (l.label == Label::positive ? pos : neg).push_back(&l);
  return {std::move(pos), std::move(neg)};
}

// Chi-squared test over a group x column count map, or a single-group pass.
HomogeneityCheck homogeneity_test(const std::string& feature, std::string scope,
                                  const std::map<std::string, std::vector<std::uint64_t>>& cells,
                                  std::vector<std::string> columns, double alpha) {
  HomogeneityCheck check;
  check.feature = feature;
  check.scope = std::move(scope);
  check.result.alpha = alpha;
  if (cells.size() < 2) {
    check.single_group = true;
    return check;
  }
  std::vector<std::string> rows;
  std::vector<std::vector<std::uint64_t>> counts;
  for (const auto& [group, row] : cells) {
    rows.push_back(group);
    counts.push_back(row);
  }
  check.result = chi_squared_test(ContingencyTable(rows, std::move(columns), counts), alpha);
  return check;
}

double min_p(const std::vector<HomogeneityCheck>& checks) {
  double p = 1.0;
  for (const auto& c : checks) {
    if (!c.single_group) p = std::min(p, c.result.p_value);
  }
  return p;
}

}  // namespace

Split split(std::span<const LabeledCluster> labeled, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("test_fraction must lie in (0,1)");
  }
  require_disjoint(std::vector<LabeledCluster>(labeled.begin(), labeled.end()));
  auto [pos, neg] = by_class(labeled);
  if (pos.size() < 2 || neg.size() < 2) {
    throw UnsplittableError("each class needs at least two clusters to split");
  }
  Rng rng(seed);
  Split out;
  for (auto* group : {&pos, &neg}) {
    rng.shuffle(std::span<const LabeledCluster*>(*group));
    const auto n = group->size();
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      (i < n_test ? out.test : out.train).push_back(*(*group)[i]);
    }
  }
  return out;
}

std::size_t shared_documents(std::span<const LabeledCluster> a, std::span<const LabeledCluster> b) {
  std::unordered_set<std::string_view> left;
  for (const auto& l : a) left.insert(l.cluster.members.begin(), l.cluster.members.end());
  std::unordered_set<std::string_view> shared;
  for (const auto& l : b) {
    for (const auto& m : l.cluster.members) {
      if (left.count(m)) shared.insert(m);
    }
  }
  return shared.size();
}

bool FoldPlan::homogeneous() const {
  return std::none_of(homogeneity.begin(), homogeneity.end(),
                      [](const HomogeneityCheck& c) { return c.result.rejected; });
}

bool FoldPlan::flagged() const {
  return !homogeneous() ||
         std::any_of(class_balance.begin(), class_balance.end(),
                     [](const HomogeneityCheck& c) { return c.result.rejected; });
}

std::vector<std::size_t> FoldPlan::fold_of(std::span<const LabeledCluster> labeled) const {
  std::vector<std::size_t> out;
  out.reserve(labeled.size());
  for (const auto& l : labeled) {
    auto it = assignment.find(l.cluster.id);
    if (it == assignment.end()) {
      throw InputError("cluster '" + l.cluster.id + "' is not in the fold plan");
    }
    out.push_back(it->second);
  }
  return out;
}

FoldPlan make_folds(std::span<const LabeledCluster> labeled, const Corpus& corpus,
                    const FoldConfig& config) {
  if (config.k < 2) throw InputError("fold count k must be >= 2");
  if (config.max_retries < 0) throw InputError("max_retries must be >= 0");
  require_disjoint(std::vector<LabeledCluster>(labeled.begin(), labeled.end()));
  auto [pos, neg] = by_class(labeled);
  if (pos.size() < config.k || neg.size() < config.k) {
    throw UnsplittableError("each class needs at least k = " + std::to_string(config.k) +
                            " clusters (have " + std::to_string(pos.size()) + " positive, " +
                            std::to_string(neg.size()) + " negative)");
  }

  // Per class: stratum key -> clusters, keys sorted.
  struct ClassStrata {
    std::string name;
    std::vector<std::vector<const LabeledCluster*>> strata;
    std::vector<const LabeledCluster*> remainder;
  };
  std::vector<ClassStrata> classes;
  std::vector<std::string> warnings;
  std::unordered_map<const LabeledCluster*, std::vector<std::string>> groups;
  for (const auto* l : pos) {
    for (const auto& f : config.features) groups[l].push_back(cluster_group(l->cluster, corpus, f));
  }
  for (const auto* l : neg) {
    for (const auto& f : config.features) groups[l].push_back(cluster_group(l->cluster, corpus, f));
  }
  for (auto* members : {&pos, &neg}) {
    ClassStrata cs;
    cs.name = members == &pos ? "positive" : "negative";
    std::map<std::string, std::vector<const LabeledCluster*>> keyed;
    for (const auto* l : *members) {
      keyed[stratum_of(l->cluster, corpus, config.features, config.buckets)].push_back(l);
    }
    for (auto& [key, list] : keyed) {
      if (list.size() < config.k) {
        warnings.push_back("class " + cs.name + " stratum '" + key + "' has " +
                           std::to_string(list.size()) + " < k clusters; dealt class-only");
        cs.remainder.insert(cs.remainder.end(), list.begin(), list.end());
      } else {
        cs.strata.push_back(std::move(list));
      }
    }
    classes.push_back(std::move(cs));
  }

  Rng rng(config.seed);
  FoldPlan best;
  double best_p = -1.0;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    FoldPlan plan;
    plan.k = config.k;
    plan.conditioned_features = config.features;
    plan.attempts = attempt + 1;
    plan.warnings = warnings;
    for (auto& cs : classes) {
      std::vector<const LabeledCluster*> order;
      for (auto& stratum : cs.strata) {
        rng.shuffle(std::span<const LabeledCluster*>(stratum));
        order.insert(order.end(), stratum.begin(), stratum.end());
      }
      rng.shuffle(std::span<const LabeledCluster*>(cs.remainder));
      order.insert(order.end(), cs.remainder.begin(), cs.remainder.end());
      const auto offset = static_cast<std::size_t>(rng.below(config.k));
      for (std::size_t i = 0; i < order.size(); ++i) {
        plan.assignment[order[i]->cluster.id] = (offset + i) % config.k;
      }
    }

    std::vector<std::string> fold_cols;
    for (std::size_t f = 0; f < config.k; ++f) fold_cols.push_back("fold " + std::to_string(f));
    for (std::size_t fi = 0; fi < config.features.size(); ++fi) {
      const auto& key = config.features[fi].key();
      for (auto* members : {&pos, &neg}) {
        std::map<std::string, std::vector<std::uint64_t>> cells;
        for (const auto* l : *members) {
          auto& row = cells[groups[l][fi]];
          row.resize(config.k, 0);
          ++row[plan.assignment[l->cluster.id]];
        }
        plan.homogeneity.push_back(homogeneity_test(
            key, std::string("class ") + (members == &pos ? "positive" : "negative"), cells,
            fold_cols, config.alpha));
      }
      for (std::size_t f = 0; f < config.k; ++f) {
        std::map<std::string, std::vector<std::uint64_t>> cells;
        for (const auto& l : labeled) {
          if (plan.assignment[l.cluster.id] != f) continue;
          auto& row = cells[groups[&l][fi]];
          row.resize(2, 0);
          ++row[l.label == Label::positive ? 0 : 1];
        }
        plan.class_balance.push_back(homogeneity_test(key, "fold " + std::to_string(f), cells,
                                                      {"positive", "negative"}, config.alpha));
      }
    }

    const double p = min_p(plan.homogeneity);
    if (p > best_p) {
      best_p = p;
      best = std::move(plan);
    }
    if (best.homogeneous()) break;
  }
  return best;
}

void require_leak_free(const FoldPlan& plan, std::span<const LabeledCluster> labeled) {
  std::unordered_map<std::string_view, std::size_t> doc_fold;
  std::unordered_set<std::string_view> clusters;
  for (const auto& l : labeled) {
    if (!clusters.insert(l.cluster.id).second) {
      throw LeakageError("cluster '" + l.cluster.id + "' appears twice");
    }
    auto it = plan.assignment.find(l.cluster.id);
    if (it == plan.assignment.end()) {
      throw LeakageError("cluster '" + l.cluster.id + "' has no fold");
    }
    if (it->second >= plan.k) throw LeakageError("fold index out of range");
    for (const auto& m : l.cluster.members) {
      auto [d, inserted] = doc_fold.emplace(m, it->second);
      if (!inserted && d->second != it->second) {
        throw LeakageError("document '" + m + "' spans folds");
      }
    }
  }
}

RocResult roc_auc(std::span<const std::pair<double, Label>> scores) {
  std::size_t n_pos = 0;
  for (const auto& [s, l] : scores) {
    if (std::isnan(s)) throw InputError("NaN score");
    if (l == Label::positive) ++n_pos;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC needs both classes");

  std::vector<std::pair<double, Label>> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Sweep thresholds high to low. Within a tie group, positives ranked above
  // the negatives seen so far win fully and the group's own negatives count
  // one half.
  RocResult out;
  out.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double wins = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    std::size_t group_neg = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second == Label::positive ? group_pos : group_neg)++;
      ++j;
    }
    // Each negative in this group loses to every positive above it and
    // ties with (half-beats) every positive in the group.
    wins += static_cast<double>(group_neg) *
            (static_cast<double>(tp) + 0.5 * static_cast<double>(group_pos));
    tp += group_pos;
    fp += group_neg;
    out.points.push_back({sorted[i].first, static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  out.auc = wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return out;
}

Vocabulary vocabulary_for(std::span<const LabeledCluster> labeled, const Corpus& corpus,
                          const VocabularyConfig& config) {
  std::vector<std::string> texts;
  for (const auto& l : labeled) {
    for (const auto& m : l.cluster.members) {
      const Document* doc = corpus.find(m);
      if (!doc) throw InputError("labeled document '" + m + "' not in corpus");
      texts.push_back(doc->text);
    }
  }
  return build_vocabulary(std::span<const std::string>(texts), config);
}

std::vector<Example> make_examples(std::span<const LabeledCluster> labeled, const Corpus& corpus,
                                   const Vocabulary& vocab, Weighting weighting,
                                   Aggregation aggregation) {
  std::vector<Example> out;
  for (const auto& l : labeled) {
    if (aggregation == Aggregation::cluster_vector) {
      out.push_back({vectorize_cluster(l.cluster, corpus, vocab, weighting), l.label});
    } else {
      for (const auto& m : l.cluster.members) {
        const Document* doc = corpus.find(m);
        if (!doc) throw InputError("labeled document '" + m + "' not in corpus");
        out.push_back({vectorize_document(doc->text, vocab, weighting), l.label});
      }
    }
  }
  return out;
}

RiskModel fit(std::span<const LabeledCluster> labeled, const Corpus& corpus,
              const EvalConfig& config) {
  auto vocab = vocabulary_for(labeled, corpus, config.vocabulary);
  const auto examples =
      make_examples(labeled, corpus, vocab, config.weighting, config.aggregation);
  return train(examples, vocab, config.weighting, config.train);
}

double score_cluster(const RiskModel& model, const Cluster& cluster, const Corpus& corpus,
                     Aggregation aggregation) {
  if (aggregation == Aggregation::mean_document_score) {
    return score_cluster_by_documents(model, cluster, corpus);
  }
  return score(model, vectorize_cluster(cluster, corpus, model.vocabulary, model.weighting));
}

EvalReport cross_validate(std::span<const LabeledCluster> labeled, const FoldPlan& plan,
                          const Corpus& corpus, const EvalConfig& config) {
  require_leak_free(plan, labeled);
  const auto folds = plan.fold_of(labeled);
  EvalReport report;
  std::vector<std::pair<double, Label>> pooled;
  for (std::size_t f = 0; f < plan.k; ++f) {
    std::vector<LabeledCluster> train_set;
    std::vector<LabeledCluster> test_set;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      (folds[i] == f ? test_set : train_set).push_back(labeled[i]);
    }
    if (test_set.empty()) continue;
    if (shared_documents(train_set, test_set) != 0) {
      throw LeakageError("fold " + std::to_string(f) + " shares documents with its training set");
    }
    FoldOutcome outcome;
    outcome.fold = f;
    RiskModel model = fit(train_set, corpus, config);
    outcome.vocabulary_size = model.vocabulary.size();
    std::vector<std::pair<double, Label>> fold_scores;
    for (const auto& l : test_set) {
      const double s = score_cluster(model, l.cluster, corpus, config.aggregation);
      fold_scores.emplace_back(s, l.label);
      pooled.emplace_back(s, l.label);
      report.scores.push_back({l.cluster.id, s, l.label, f});
      outcome.test_clusters.push_back(l.cluster.id);
    }
    for (const auto& l : train_set) outcome.train_clusters.push_back(l.cluster.id);
    try {
      outcome.auc = roc_auc(fold_scores).auc;
    } catch (const UndefinedMetricError&) {
      outcome.auc = std::numeric_limits<double>::quiet_NaN();
    }
    report.fold_aucs.push_back(outcome.auc);
    if (config.keep_fold_models) outcome.model = std::move(model);
    report.folds.push_back(std::move(outcome));
  }
  const auto roc = roc_auc(pooled);
  report.auc = roc.auc;
  report.roc_points = roc.points;
  report.final_model = fit(labeled, corpus, config);
  report.top_features = feature_importance(report.final_model, config.top_k);
  if (!config.recheck_features.empty()) {
    report.bias_recheck = audit(corpus, labeled, config.recheck_features, config.alpha);
  }
  return report;
}

RocResult evaluate_model(const RiskModel& model, std::span<const LabeledCluster> labeled,
                         const Corpus& corpus, Aggregation aggregation) {
  std::vector<std::pair<double, Label>> scores;
  scores.reserve(labeled.size());
  for (const auto& l : labeled) {
    scores.emplace_back(score_cluster(model, l.cluster, corpus, aggregation), l.label);
  }
  return roc_auc(scores);
}

namespace {

json checks_to_json(const std::vector<HomogeneityCheck>& checks) {
  json out = json::array();
  for (const auto& c : checks) {
    out.push_back({{"feature", c.feature},
                   {"scope", c.scope},
                   {"statistic", c.result.statistic},
                   {"df", c.result.degrees_of_freedom ? json(*c.result.degrees_of_freedom) : json()},
                   {"p_value", c.result.p_value},
                   {"rejected", c.result.rejected},
                   {"single_group", c.single_group}});
  }
  return out;
}

}  // namespace

std::string format_eval_report(const EvalReport& report, const FoldPlan& plan) {
  std::ostringstream out;
  out << "evaluation: " << plan.k << "-fold cluster-disjoint cross-validation\n";
  out << "pooled AUC: " << csv::number(report.auc) << '\n';
  for (std::size_t i = 0; i < report.folds.size(); ++i) {
    out << "  fold " << report.folds[i].fold << ": AUC " << csv::number(report.folds[i].auc)
        << " (" << report.folds[i].test_clusters.size() << " test clusters, vocabulary "
        << report.folds[i].vocabulary_size << ")\n";
  }
  out << "fold homogeneity (" << plan.attempts << " attempt(s)): "
      << (plan.homogeneous() ? "homogeneous" : "NOT homogeneous") << '\n';
  for (const auto& c : plan.homogeneity) {
    out << "  " << c.feature << " / " << c.scope << ": "
        << (c.single_group ? std::string("single group")
                           : "p = " + csv::number(c.result.p_value) +
                                 (c.result.rejected ? " (rejected)" : ""))
        << '\n';
  }
  for (const auto& c : plan.class_balance) {
    if (c.result.rejected) {
      out << "  class imbalance: " << c.feature << " / " << c.scope
          << ": p = " << csv::number(c.result.p_value) << '\n';
    }
  }
  for (const auto& w : plan.warnings) out << "  warning: " << w << '\n';
  out << "top features:\n";
  for (const auto& [token, weight] : report.top_features) {
    out << "  " << token << '\t' << csv::number(weight) << '\n';
  }
  if (report.bias_recheck) out << '\n' << format_bias_report(*report.bias_recheck);
  return out.str();
}

void write_eval_report(const EvalReport& report, const FoldPlan& plan,
                       const std::filesystem::path& dir) {
  {
    std::ofstream out(dir / "eval_report.txt", std::ios::binary);
    if (!out) throw IoError("cannot write eval_report.txt in " + dir.string());
    out << format_eval_report(report, plan);
  }
  json features = json::array();
  for (const auto& [token, weight] : report.top_features) features.push_back({token, weight});
  json fold_aucs = json::array();
  for (double a : report.fold_aucs) fold_aucs.push_back(std::isnan(a) ? json() : json(a));
  json summary = {
      {"auc", report.auc},
      {"fold_aucs", fold_aucs},
      {"top_features", features},
      {"homogeneity", checks_to_json(plan.homogeneity)},
      {"class_balance", checks_to_json(plan.class_balance)},
      {"homogeneous", plan.homogeneous()},
      {"fold_attempts", plan.attempts},
  };
  if (report.bias_recheck) {
    json recheck = json::object();
    for (const auto& [key, r] : report.bias_recheck->results) {
      recheck[key] = {{"statistic", r.statistic}, {"p_value", r.p_value}, {"flagged", r.rejected}};
    }
    summary["bias_recheck"] = recheck;
  }
  {
    std::ofstream out(dir / "eval_summary.json", std::ios::binary);
    if (!out) throw IoError("cannot write eval_summary.json in " + dir.string());
    out << summary.dump(2) << '\n';
  }
  std::ofstream out(dir / "roc.csv", std::ios::binary);
  if (!out) throw IoError("cannot write roc.csv in " + dir.string());
  out << "threshold,fpr,tpr\n";
  for (const auto& p : report.roc_points) {
    out << csv::number(p.threshold) << ',' << csv::number(p.fpr) << ',' << csv::number(p.tpr)
        << '\n';
  }
}

}  // namespace riskscore
