#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riskscore/bias.hpp"
#include "riskscore/labels.hpp"
#include "riskscore/model.hpp"
#include "riskscore/sampling.hpp"

namespace riskscore {

struct Split {
  std::vector<LabeledCluster> train;
  std::vector<LabeledCluster> test;
};

// Class-stratified split at cluster granularity. Each class sends
// round(test_fraction * n) clusters to test, at least one and leaving at
// least one for training. Throws UnsplittableError when a class has fewer
// than two clusters.
Split split(std::span<const LabeledCluster> labeled, double test_fraction, std::uint64_t seed);

// Number of document ids present on both sides.
std::size_t shared_documents(std::span<const LabeledCluster> a, std::span<const LabeledCluster> b);

struct FoldConfig {
  std::size_t k = 5;
  std::vector<FeatureSpec> features;
  SizeBuckets buckets;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int max_retries = 50;
};

struct HomogeneityCheck {
  std::string feature;
  std::string scope;  // "class positive" or "fold 2"
  TestResult result;
  bool single_group = false;  // untestable, counts as homogeneous
};

struct FoldPlan {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignment;  // cluster id -> fold
  std::vector<FeatureSpec> conditioned_features;
  // Feature group vs fold index within each class.
  std::vector<HomogeneityCheck> homogeneity;
  // Feature group vs class within each fold.
  std::vector<HomogeneityCheck> class_balance;
  int attempts = 0;
  std::vector<std::string> warnings;

  bool homogeneous() const;
  bool flagged() const;
  std::vector<std::size_t> fold_of(std::span<const LabeledCluster> labeled) const;
};

// Deals clusters to k folds stratified by class x feature group x size
// bucket. Strata smaller than k fall back to class-only dealing (with a
// warning). If a fold homogeneity test rejects, the deal is reshuffled up to
// max_retries times and the most homogeneous attempt is kept.
FoldPlan make_folds(std::span<const LabeledCluster> labeled, const Corpus& corpus,
                    const FoldConfig& config);

// Throws LeakageError unless every labeled cluster sits in exactly one fold
// and no document spans two folds.
void require_leak_free(const FoldPlan& plan, std::span<const LabeledCluster> labeled);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocResult {
  double auc = 0.0;
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
};

// Rank-based AUC with ties counted as one half; ROC points at every distinct
// threshold, descending. Throws UndefinedMetricError for one class.
RocResult roc_auc(std::span<const std::pair<double, Label>> scores);

enum class Aggregation { cluster_vector, mean_document_score };

struct EvalConfig {
  VocabularyConfig vocabulary;
  Weighting weighting = Weighting::tf;
  TrainConfig train;
  Aggregation aggregation = Aggregation::cluster_vector;
  std::size_t top_k = 20;
  std::vector<FeatureSpec> recheck_features;
  double alpha = 0.05;
  bool keep_fold_models = false;
};

struct ScoredCluster {
  std::string cluster_id;
  double score;
  Label label;
  std::size_t fold;
};

struct FoldOutcome {
  std::size_t fold = 0;
  double auc = 0.0;
  std::vector<std::string> train_clusters;
  std::vector<std::string> test_clusters;
  std::size_t vocabulary_size = 0;
  std::optional<RiskModel> model;
};

struct EvalReport {
  double auc = 0.0;  // pooled over all held-out scores
  std::vector<double> fold_aucs;
  std::vector<RocPoint> roc_points;
  std::vector<std::pair<std::string, double>> top_features;
  std::optional<BiasReport> bias_recheck;
  std::vector<ScoredCluster> scores;
  std::vector<FoldOutcome> folds;
  RiskModel final_model;  // trained on every labeled cluster
};

// Training materials per labeled cluster.
std::vector<Example> make_examples(std::span<const LabeledCluster> labeled, const Corpus& corpus,
                                   const Vocabulary& vocab, Weighting weighting,
                                   Aggregation aggregation);
Vocabulary vocabulary_for(std::span<const LabeledCluster> labeled, const Corpus& corpus,
                          const VocabularyConfig& config);
RiskModel fit(std::span<const LabeledCluster> labeled, const Corpus& corpus,
              const EvalConfig& config);
double score_cluster(const RiskModel& model, const Cluster& cluster, const Corpus& corpus,
                     Aggregation aggregation);

// Each fold's vocabulary and model see only the other folds.
EvalReport cross_validate(std::span<const LabeledCluster> labeled, const FoldPlan& plan,
                          const Corpus& corpus, const EvalConfig& config);

// Scores labeled clusters with a fixed model.
RocResult evaluate_model(const RiskModel& model, std::span<const LabeledCluster> labeled,
                         const Corpus& corpus, Aggregation aggregation);

std::string format_eval_report(const EvalReport& report, const FoldPlan& plan);
// eval_report.txt, eval_summary.json and roc.csv (threshold,fpr,tpr).
void write_eval_report(const EvalReport& report, const FoldPlan& plan,
                       const std::filesystem::path& dir);

}  // namespace riskscore
