#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riskscore/corpus.hpp"
#include "riskscore/labels.hpp"

namespace riskscore {

// Maps attribute values onto groups. Unmapped values fall into `fallback`;
// an empty map is the identity grouping (every value is its own group).
struct Grouping {
  std::map<std::string, std::string> groups;
  std::string fallback = "other";

  std::string group_of(std::string_view value) const;
};

struct FeatureSpec {
  std::string attribute;
  Grouping grouping;
  std::string name;  // report key; defaults to the attribute

  const std::string& key() const { return name.empty() ? attribute : name; }
};

// Value of a named attribute: "domain", "date" (ISO), "locations"/"location"
// and "phones"/"phone" (first entry), or an extra field. Missing values are
// the empty string.
std::string attribute_value(const Document& doc, std::string_view attribute);
std::string feature_group(const Document& doc, const FeatureSpec& feature);

// Majority group across the cluster's member documents, ties broken by the
// lexicographically smallest group.
std::string cluster_group(const Cluster& cluster, const Corpus& corpus,
                          const FeatureSpec& feature);

class ContingencyTable {
 public:
  // Throws DegenerateTableError unless r >= 2, c >= 2, the matrix is
  // rectangular and the grand total is positive.
  ContingencyTable(std::vector<std::string> row_labels,
                   std::vector<std::string> col_labels,
                   std::vector<std::vector<std::uint64_t>> counts);

  const std::vector<std::string>& row_labels() const noexcept { return rows_; }
  const std::vector<std::string>& col_labels() const noexcept { return cols_; }
  const std::vector<std::vector<std::uint64_t>>& counts() const noexcept { return counts_; }

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_.size(); }
  std::uint64_t row_total(std::size_t r) const;
  std::uint64_t col_total(std::size_t c) const;
  std::uint64_t total() const;

 private:
  std::vector<std::string> rows_;
  std::vector<std::string> cols_;
  std::vector<std::vector<std::uint64_t>> counts_;
};

struct TestResult {
  double statistic = 0.0;
  std::optional<int> degrees_of_freedom;  // absent for KS
  double p_value = 1.0;
  double alpha = 0.05;
  bool rejected = false;
};

// Rows are the feature groups present (sorted), columns {positive,
// negative}; cells count documents. Throws InputError when no labeled
// documents are given or a member is missing from the corpus.
ContingencyTable contingency(const Corpus& corpus,
                             std::span<const LabeledCluster> labeled,
                             const FeatureSpec& feature);

// Upper tail of the chi-squared distribution, Q(df/2, x/2).
double chi_squared_upper_tail(double statistic, int degrees_of_freedom);

// Pearson's test of independence. Yates' continuity correction applies to
// 2x2 tables only and is off by default.
TestResult chi_squared_test(const ContingencyTable& table, double alpha,
                            bool yates = false);

std::vector<TestResult> bonferroni(std::span<const TestResult> results,
                                   double family_alpha);

// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_upper_tail(double lambda);

TestResult ks_two_sample(std::span<const double> sample_a,
                         std::span<const double> sample_b, double alpha = 0.05);

// Order-alpha divergence D(P||Q) in nats; +infinity when Q misses P's
// support (alpha > 1) or the supports are disjoint.
double renyi_divergence(std::span<const double> p, std::span<const double> q,
                        double order);

enum class Correction { none, bonferroni };

struct BiasReport {
  std::vector<std::string> features;  // tested, in input order
  std::map<std::string, TestResult> results;
  std::map<std::string, ContingencyTable> tables;
  // Features with fewer than two observed groups: trivially independent of
  // class, reported with statistic 0 and p = 1.
  std::set<std::string> single_group;
  std::vector<std::string> flagged;
  Correction correction = Correction::none;

  bool mitigation_successful() const { return flagged.empty(); }
};

BiasReport audit(const Corpus& corpus, std::span<const LabeledCluster> labeled,
                 std::span<const FeatureSpec> features, double alpha,
                 Correction correction = Correction::none);

std::string format_bias_report(const BiasReport& report);
// Human-readable report plus CSV summary
// feature,statistic,df,p_value,flagged.
void write_bias_report(const BiasReport& report,
                       const std::filesystem::path& text_path,
                       const std::filesystem::path& summary_path);

}  // namespace riskscore
