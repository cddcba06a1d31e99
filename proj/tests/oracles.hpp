#pragma once

// Independent reference implementations the library is checked against.
// Deliberately naive: exhaustive, quadratic, closed-form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riskscore/eval.hpp"
#include "riskscore/labels.hpp"
#include "riskscore/model.hpp"

namespace oracle {

// Symmetric 0/1 adjacency; cost counts + edges cut and - edges (non-edges)
// kept inside a cluster.
using Adjacency = std::vector<std::vector<bool>>;

inline std::uint64_t partition_cost(const Adjacency& adj, const std::vector<int>& block) {
  std::uint64_t cost = 0;
  const std::size_t n = adj.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same = block[i] == block[j];
      if (adj[i][j] != same) ++cost;
    }
  }
  return cost;
}

// Minimum over all set partitions via restricted growth strings.
inline std::uint64_t brute_force_min_cost(const Adjacency& adj) {
  const std::size_t n = adj.size();
  if (n == 0) return 0;
  std::vector<int> a(n, 0);
  std::vector<int> max_prefix(n, 0);
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == n) {
      best = std::min(best, partition_cost(adj, a));
      return;
    }
    const int m = max_prefix[i - 1];
    for (int v = 0; v <= m + 1; ++v) {
      a[i] = v;
      max_prefix[i] = std::max(m, v);
      rec(i + 1);
    }
  };
  a[0] = 0;
  max_prefix[0] = 0;
  rec(1);
  return best;
}

// Number of set partitions of n (Bell numbers) for sanity checks.
inline std::uint64_t bell(std::size_t n) {
  std::vector<std::vector<std::uint64_t>> t(n + 1, std::vector<std::uint64_t>(n + 1, 0));
  t[0][0] = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    t[i][0] = t[i - 1][i - 1];
    for (std::size_t j = 1; j <= i; ++j) t[i][j] = t[i][j - 1] + t[i - 1][j - 1];
  }
  return t[n][0];
}

// Fraction of positive-negative pairs ordered correctly, ties one half.
inline double pairwise_auc(std::span<const std::pair<double, riskscore::Label>> scores) {
  double good = 0.0;
  double total = 0.0;
  for (const auto& p : scores) {
    if (p.second != riskscore::Label::positive) continue;
    for (const auto& q : scores) {
      if (q.second != riskscore::Label::negative) continue;
      total += 1.0;
      if (p.first > q.first) good += 1.0;
      else if (p.first == q.first) good += 0.5;
    }
  }
  return good / total;
}

inline double trapezoid(std::span<const riskscore::RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

// N (ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)).
inline double chi2_2x2(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double num = n * (a * d - b * c) * (a * d - b * c);
  return num / ((a + b) * (c + d) * (a + c) * (b + d));
}

// Closed-form chi-squared upper tails.
inline double chi2_sf_df1(double x) { return std::erfc(std::sqrt(x / 2.0)); }
inline double chi2_sf_df2(double x) { return std::exp(-x / 2.0); }

// Central differences of the objective over weights then intercept.
inline std::vector<double> numeric_gradient(std::span<const riskscore::Example> examples,
                                            std::vector<double> w, double b,
                                            const riskscore::TrainConfig& config, double h) {
  std::vector<double> g(w.size() + 1);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double orig = w[i];
    w[i] = orig + h;
    const double up = riskscore::objective_value(examples, w, b, config);
    w[i] = orig - h;
    const double down = riskscore::objective_value(examples, w, b, config);
    w[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  g[w.size()] = (riskscore::objective_value(examples, w, b + h, config) -
                 riskscore::objective_value(examples, w, b - h, config)) /
                (2.0 * h);
  return g;
}

inline std::set<std::string> documents_of(std::span<const riskscore::LabeledCluster> labeled) {
  std::set<std::string> out;
  for (const auto& l : labeled) out.insert(l.cluster.members.begin(), l.cluster.members.end());
  return out;
}

// Document ids on both sides of a boundary.
inline std::size_t crossing(std::span<const riskscore::LabeledCluster> a,
                            std::span<const riskscore::LabeledCluster> b) {
  const auto da = documents_of(a);
  std::size_t n = 0;
  for (const auto& d : documents_of(b)) n += da.count(d);
  return n;
}

// Exhaustive fold check: for each fold, documents shared between its test
// clusters and the remaining clusters.
inline std::size_t fold_crossings(const riskscore::FoldPlan& plan,
                                  std::span<const riskscore::LabeledCluster> labeled) {
  std::size_t n = 0;
  for (std::size_t f = 0; f < plan.k; ++f) {
    std::vector<riskscore::LabeledCluster> test;
    std::vector<riskscore::LabeledCluster> train;
    for (const auto& l : labeled) {
      (plan.assignment.at(l.cluster.id) == f ? test : train).push_back(l);
    }
    n += crossing(train, test);
  }
  return n;
}

}  // namespace oracle
