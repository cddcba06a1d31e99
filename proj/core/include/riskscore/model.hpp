#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "riskscore/clustering.hpp"
#include "riskscore/corpus.hpp"
#include "riskscore/labels.hpp"

namespace riskscore {

// Sorted (index, weight) pairs with no zero weights.
class SparseVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  SparseVector() = default;
  // Sorts, sums duplicate indices and drops zeros.
  explicit SparseVector(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  double get(std::uint32_t index) const;
  double norm() const;
  double dot(std::span<const double> dense) const;
  // Unit L2 norm; the zero vector stays zero.
  SparseVector normalized() const;

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

// Mean of the vectors, renormalized to unit length when non-zero.
SparseVector normalized_mean(std::span<const SparseVector> vectors);

struct VocabularyConfig {
  std::set<int> orders = {1};
  std::size_t min_df = 1;
  std::size_t max_size = 50000;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // tokens must be sorted and unique; df parallel to tokens.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> df, std::set<int> orders,
             std::size_t num_docs, VocabularyConfig config);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::string& token(std::uint32_t index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t df(std::uint32_t index) const { return df_.at(index); }
  const std::vector<std::size_t>& df() const noexcept { return df_; }
  const std::set<int>& orders() const noexcept { return orders_; }
  std::size_t num_docs() const noexcept { return num_docs_; }
  const VocabularyConfig& config() const noexcept { return config_; }

  std::optional<std::uint32_t> index_of(std::string_view token) const;

  // Lowercased word n-grams of every configured order.
  std::vector<std::string> features_of(std::string_view text) const;

  bool operator==(const Vocabulary& other) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> df_;
  std::set<int> orders_;
  std::size_t num_docs_ = 0;
  VocabularyConfig config_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// n-grams with document frequency >= min_df; above max_size the highest-df
// entries win, ties lexicographic. Indices follow sorted token order.
Vocabulary build_vocabulary(std::span<const std::string> texts, const VocabularyConfig& config);
Vocabulary build_vocabulary(std::span<const Document> docs, const VocabularyConfig& config);

enum class Weighting { tf, tfidf };

// L2-normalized counts (tf) or counts times the smoothed idf
// ln((1+N)/(1+df)) + 1 (tfidf). Out-of-vocabulary n-grams are ignored.
SparseVector vectorize_document(std::string_view text, const Vocabulary& vocab,
                                Weighting weighting);

SparseVector vectorize_cluster(const Cluster& cluster, const Corpus& corpus,
                               const Vocabulary& vocab, Weighting weighting);

enum class Loss { logistic, hinge };
enum class Penalty { l2, l1 };
enum class Schedule { halving_on_increase, constant };

struct TrainConfig {
  Loss loss = Loss::logistic;
  Penalty penalty = Penalty::l2;
  double lambda = 1e-3;
  int epochs = 300;
  double learning_rate = 1.0;
  Schedule schedule = Schedule::halving_on_increase;
  // Stop early once an epoch improves the objective by less than this
  // (relative). Zero runs every epoch.
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
};

struct Example {
  SparseVector x;
  Label label;
};

struct ObjectiveGradient {
  double value = 0.0;
  std::vector<double> grad_weights;
  double grad_intercept = 0.0;
};

// Average loss plus lambda * penalty, where the L2 penalty is 0.5 * |w|^2 and
// the L1 penalty |w|_1. The intercept is not penalized. Hinge and L1 use
// subgradients (zero at the kink).
ObjectiveGradient objective(std::span<const Example> examples, std::span<const double> weights,
                            double intercept, const TrainConfig& config);
double objective_value(std::span<const Example> examples, std::span<const double> weights,
                       double intercept, const TrainConfig& config);

struct TrainingMetadata {
  int epochs_run = 0;
  std::uint64_t seed = 0;
  double final_objective = 0.0;
  std::vector<double> objective_history;  // after each accepted epoch
};

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  TrainingMetadata metadata;
};

// Full-batch (sub)gradient descent from zero. Under halving_on_increase a
// step that raises the objective is retried at half the rate, so the
// recorded objective never increases. Throws DegenerateTrainingError unless
// both classes are present.
LinearModel train_linear(std::span<const Example> examples, std::size_t dimension,
                         const TrainConfig& config);

struct RiskModel {
  Vocabulary vocabulary;
  Weighting weighting = Weighting::tf;
  std::vector<double> weights;  // dense, one per vocabulary entry
  double intercept = 0.0;
  TrainConfig config;
  TrainingMetadata metadata;
  // Logistic link on the margin for hinge-trained models.
  double calibration_slope = 1.0;
  double calibration_offset = 0.0;

  double margin(const SparseVector& x) const;
  bool operator==(const RiskModel&) const;
};

RiskModel train(std::span<const Example> examples, const Vocabulary& vocab, Weighting weighting,
                const TrainConfig& config);

double sigmoid(double z);

// Risk in [0,1].
double score(const RiskModel& model, const SparseVector& x);

// Mean of per-document scores, the alternative to scoring one aggregated
// cluster vector.
double score_cluster_by_documents(const RiskModel& model, const Cluster& cluster,
                                  const Corpus& corpus);

// Top tokens by |weight| (descending, ties lexicographic), zeros omitted.
std::vector<std::pair<std::string, double>> feature_importance(const RiskModel& model,
                                                               std::size_t top_k);

void save_model(const RiskModel& model, const std::filesystem::path& path);
RiskModel load_model(const std::filesystem::path& path);
std::string serialize_model(const RiskModel& model);
RiskModel deserialize_model(std::string_view text);

std::string_view to_string(Loss loss);
std::string_view to_string(Penalty penalty);
std::string_view to_string(Schedule schedule);
std::string_view to_string(Weighting weighting);
Loss parse_loss(std::string_view s);
Penalty parse_penalty(std::string_view s);
Schedule parse_schedule(std::string_view s);
Weighting parse_weighting(std::string_view s);

}  // namespace riskscore
