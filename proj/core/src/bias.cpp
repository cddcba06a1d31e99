#include "riskscore/bias.hpp"

#include <algorithm>
#include <array>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "riskscore/csv.hpp"
#include "riskscore/error.hpp"

namespace riskscore {

std::string Grouping::group_of(std::string_view value) const {
  if (groups.empty()) return std::string(value);
  auto it = groups.find(std::string(value));
  return it == groups.end() ? fallback : it->second;
}

std::string attribute_value(const Document& doc, std::string_view attribute) {
  if (attribute == "domain") return doc.source_domain;
  if (attribute == "date") return doc.posted_date ? format_date(*doc.posted_date) : "";
  if (attribute == "locations" || attribute == "location") {
    return doc.locations.empty() ? "" : doc.locations.front();
  }
  if (attribute == "phones" || attribute == "phone") {
    return doc.phones.empty() ? "" : doc.phones.front();
  }
  auto it = doc.extras.find(std::string(attribute));
  return it == doc.extras.end() ? "" : it->second;
}

std::string feature_group(const Document& doc, const FeatureSpec& feature) {
  return feature.grouping.group_of(attribute_value(doc, feature.attribute));
}

std::string cluster_group(const Cluster& cluster, const Corpus& corpus,
                          const FeatureSpec& feature) {
  std::map<std::string, std::size_t> votes;
  for (const auto& m : cluster.members) {
    const Document* doc = corpus.find(m);
    if (!doc) throw InputError("cluster member '" + m + "' not in corpus");
    ++votes[feature_group(*doc, feature)];
  }
  if (votes.empty()) throw InputError("cluster '" + cluster.id + "' is empty");
  // std::map iterates in lexicographic order, so the first maximum wins ties.
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

ContingencyTable::ContingencyTable(std::vector<std::string> row_labels,
                                   std::vector<std::string> col_labels,
                                   std::vector<std::vector<std::uint64_t>> counts)
    : rows_(std::move(row_labels)), cols_(std::move(col_labels)), counts_(std::move(counts)) {
  if (rows_.size() < 2) throw DegenerateTableError("contingency table needs r >= 2 rows");
  if (cols_.size() < 2) throw DegenerateTableError("contingency table needs c >= 2 columns");
  if (counts_.size() != rows_.size()) throw DegenerateTableError("row count mismatch");
  for (const auto& row : counts_) {
    if (row.size() != cols_.size()) throw DegenerateTableError("column count mismatch");
  }
  if (total() == 0) throw DegenerateTableError("contingency table is empty");
}

std::uint64_t ContingencyTable::row_total(std::size_t r) const {
  std::uint64_t t = 0;
  for (auto v : counts_[r]) t += v;
  return t;
}

std::uint64_t ContingencyTable::col_total(std::size_t c) const {
  std::uint64_t t = 0;
  for (const auto& row : counts_) t += row[c];
  return t;
}

std::uint64_t ContingencyTable::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts_) {
    for (auto v : row) t += v;
  }
  return t;
}

ContingencyTable contingency(const Corpus& corpus,
                             std::span<const LabeledCluster> labeled,
                             const FeatureSpec& feature) {
  std::map<std::string, std::array<std::uint64_t, 2>> cells;
  std::uint64_t docs = 0;
  for (const auto& lc : labeled) {
    const std::size_t col = lc.label == Label::positive ? 0 : 1;
    for (const auto& m : lc.cluster.members) {
      const Document* doc = corpus.find(m);
      if (!doc) throw InputError("labeled document '" + m + "' not in corpus");
      ++cells[feature_group(*doc, feature)][col];
      ++docs;
    }
  }
  if (docs == 0) throw InputError("no labeled documents for feature '" + feature.key() + "'");
  std::vector<std::string> rows;
  std::vector<std::vector<std::uint64_t>> counts;
  for (const auto& [group, c] : cells) {
    rows.push_back(group);
    counts.push_back({c[0], c[1]});
  }
  return ContingencyTable(std::move(rows), {"positive", "negative"}, std::move(counts));
}

double chi_squared_upper_tail(double statistic, int degrees_of_freedom) {
  if (degrees_of_freedom < 1) throw InputError("degrees of freedom must be >= 1");
  if (!(statistic > 0.0)) return 1.0;
  if (std::isinf(statistic)) return 0.0;
  return boost::math::gamma_q(0.5 * degrees_of_freedom, 0.5 * statistic);
}

TestResult chi_squared_test(const ContingencyTable& table, double alpha, bool yates) {
  const double n = static_cast<double>(table.total());
  const bool correct = yates && table.rows() == 2 && table.cols() == 2;
  std::vector<double> row_totals(table.rows());
  std::vector<double> col_totals(table.cols());
  for (std::size_t r = 0; r < table.rows(); ++r) row_totals[r] = static_cast<double>(table.row_total(r));
  for (std::size_t c = 0; c < table.cols(); ++c) col_totals[c] = static_cast<double>(table.col_total(c));

  double statistic = 0.0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const double expected = row_totals[r] * col_totals[c] / n;
      if (!(expected > 0.0)) {
        throw DegenerateTableError("zero expected count in row '" + table.row_labels()[r] +
                                   "', column '" + table.col_labels()[c] + "'");
      }
      double diff = std::abs(static_cast<double>(table.counts()[r][c]) - expected);
      if (correct) diff = std::max(0.0, diff - 0.5);
      statistic += diff * diff / expected;
    }
  }
  TestResult result;
  result.statistic = statistic;
  result.degrees_of_freedom = static_cast<int>((table.rows() - 1) * (table.cols() - 1));
  result.p_value = chi_squared_upper_tail(statistic, *result.degrees_of_freedom);
  result.alpha = alpha;
  result.rejected = result.p_value < alpha;
  return result;
}

std::vector<TestResult> bonferroni(std::span<const TestResult> results, double family_alpha) {
  if (results.empty()) throw InputError("bonferroni needs at least one test");
  const double per_test = family_alpha / static_cast<double>(results.size());
  std::vector<TestResult> out(results.begin(), results.end());
  for (auto& r : out) {
    r.alpha = per_test;
    r.rejected = r.p_value < per_test;
  }
  return out;
}

double kolmogorov_upper_tail(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series, which converges fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-300) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::span<const double> sample_a, std::span<const double> sample_b,
                         double alpha) {
  if (sample_a.empty() || sample_b.empty()) throw InputError("KS test needs two non-empty samples");
  std::vector<double> a(sample_a.begin(), sample_a.end());
  std::vector<double> b(sample_b.begin(), sample_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Step both empirical CDFs past every pooled point, ties together.
  while (i < a.size() || j < b.size()) {
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  TestResult result;
  result.statistic = d;
  const double effective = na * nb / (na + nb);
  result.p_value = kolmogorov_upper_tail(std::sqrt(effective) * d);
  result.alpha = alpha;
  result.rejected = result.p_value < alpha;
  return result;
}

double renyi_divergence(std::span<const double> p, std::span<const double> q, double order) {
  if (p.size() != q.size()) throw InputError("distributions differ in dimension");
  if (p.empty()) throw InputError("empty distribution");
  if (!(order > 0.0) || order == 1.0 || !std::isfinite(order)) {
    throw InputError("Renyi order must be positive, finite and != 1");
  }
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) throw InputError("negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw InputError("probability vectors must sum to 1");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      if (order > 1.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    sum += std::pow(p[i], order) * std::pow(q[i], 1.0 - order);
  }
  if (sum <= 0.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, std::log(sum) / (order - 1.0));
}

BiasReport audit(const Corpus& corpus, std::span<const LabeledCluster> labeled,
                 std::span<const FeatureSpec> features, double alpha, Correction correction) {
  if (features.empty()) throw InputError("audit needs at least one feature");
  BiasReport report;
  report.correction = correction;
  std::vector<TestResult> results;
  for (const auto& f : features) {
    const auto& key = f.key();
    report.features.push_back(key);
    TestResult r;
    r.alpha = alpha;
    try {
      auto table = contingency(corpus, labeled, f);
      r = chi_squared_test(table, alpha);
      report.tables.emplace(key, std::move(table));
    } catch (const DegenerateTableError&) {
      // One observed group cannot vary with class; anything else (e.g. a
      // class with no documents) is a real error.
      std::set<std::string> groups;
      for (const auto& lc : labeled) {
        for (const auto& m : lc.cluster.members) groups.insert(feature_group(*corpus.find(m), f));
      }
      if (groups.size() >= 2) throw;
      report.single_group.insert(key);
      r.degrees_of_freedom.reset();
    }
    results.push_back(r);
  }
  if (correction == Correction::bonferroni) results = bonferroni(results, alpha);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& key = report.features[i];
    report.results[key] = results[i];
    if (results[i].rejected) report.flagged.push_back(key);
  }
  return report;
}

std::string format_bias_report(const BiasReport& report) {
  std::ostringstream out;
  out << "bias audit (" << (report.correction == Correction::bonferroni ? "bonferroni" : "uncorrected")
      << ")\n";
  for (const auto& key : report.features) {
    const auto& r = report.results.at(key);
    out << "\nfeature " << key << '\n';
    if (auto it = report.tables.find(key); it != report.tables.end()) {
      const auto& t = it->second;
      out << "  group";
      for (const auto& c : t.col_labels()) out << '\t' << c;
      out << "\ttotal\n";
      for (std::size_t row = 0; row < t.rows(); ++row) {
        out << "  " << t.row_labels()[row];
        for (auto v : t.counts()[row]) out << '\t' << v;
        out << '\t' << t.row_total(row) << '\n';
      }
      out << "  total";
      for (std::size_t c = 0; c < t.cols(); ++c) out << '\t' << t.col_total(c);
      out << '\t' << t.total() << '\n';
    } else if (report.single_group.count(key)) {
      out << "  single observed group; independent of class\n";
    }
    out << "  chi2 = " << csv::number(r.statistic);
    if (r.degrees_of_freedom) out << ", df = " << *r.degrees_of_freedom;
    out << ", p = " << csv::number(r.p_value) << ", alpha = " << csv::number(r.alpha) << " -> "
        << (r.rejected ? "DEPENDENT (flagged)" : "independent") << '\n';
  }
  out << "\nflagged: " << report.flagged.size() << '\n';
  return out.str();
}

void write_bias_report(const BiasReport& report, const std::filesystem::path& text_path,
                       const std::filesystem::path& summary_path) {
  {
    std::ofstream out(text_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + text_path.string());
    out << format_bias_report(report);
  }
  std::ofstream out(summary_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + summary_path.string());
  out << "feature,statistic,df,p_value,flagged\n";
  for (const auto& key : report.features) {
    const auto& r = report.results.at(key);
    out << csv::escape(key) << ',' << csv::number(r.statistic) << ','
        << (r.degrees_of_freedom ? std::to_string(*r.degrees_of_freedom) : "") << ','
        << csv::number(r.p_value) << ',' << (r.rejected ? "true" : "false") << '\n';
  }
}

}  // namespace riskscore
