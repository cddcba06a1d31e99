#include "riskscore/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "riskscore/error.hpp"
#include "riskscore/random.hpp"

namespace riskscore {

namespace {

// Partial Fisher-Yates: the first k entries of pool become a uniform draw.
template <typename T>
std::vector<T> draw_without_replacement(std::vector<T> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

LabeledCluster as_negative(const Cluster& c) {
  return {c, Label::negative, LabelSource::sampled_noisy};
}

}  // namespace

std::size_t SizeBuckets::bucket_of(std::size_t size) const {
  if (lower_bounds.empty() || lower_bounds.front() != 1) {
    throw InputError("size buckets must start at 1");
  }
  auto it = std::upper_bound(lower_bounds.begin(), lower_bounds.end(), size);
  return static_cast<std::size_t>(std::distance(lower_bounds.begin(), it)) - 1;
}

std::string SizeBuckets::label(std::size_t bucket) const {
  const auto lo = lower_bounds.at(bucket);
  if (bucket + 1 == lower_bounds.size()) return std::to_string(lo) + "+";
  const auto hi = lower_bounds[bucket + 1] - 1;
  if (hi == lo) return std::to_string(lo);
  return std::to_string(lo) + "-" + std::to_string(hi);
}

std::vector<LabeledCluster> random_negatives(const Clustering& clustering,
                                             const std::set<std::string>& exclude,
                                             std::size_t n, std::uint64_t seed) {
  std::vector<const Cluster*> pool;
  for (const auto& c : clustering.clusters) {
    if (!exclude.count(c.id)) pool.push_back(&c);
  }
  if (n > pool.size()) {
    throw InsufficientPoolError("requested " + std::to_string(n) + " negatives from a pool of " +
                                    std::to_string(pool.size()),
                                {{"*", n - pool.size()}});
  }
  Rng rng(seed);
  std::vector<LabeledCluster> out;
  out.reserve(n);
  for (const Cluster* c : draw_without_replacement(std::move(pool), n, rng)) {
    out.push_back(as_negative(*c));
  }
  return out;
}

std::string stratum_of(const Cluster& cluster, const Corpus& corpus,
                       std::span<const FeatureSpec> features, const SizeBuckets& buckets) {
  std::string key;
  for (const auto& f : features) {
    key += cluster_group(cluster, corpus, f);
    key += " / ";
  }
  key += "size " + buckets.label(buckets.bucket_of(cluster.members.size()));
  return key;
}

std::map<std::string, std::size_t> apportion(const std::map<std::string, double>& weights,
                                             std::size_t n) {
  std::map<std::string, std::size_t> out;
  double total = 0.0;
  for (const auto& [key, w] : weights) {
    if (!(w >= 0.0)) throw InputError("negative apportionment weight");
    total += w;
    out[key] = 0;
  }
  if (n == 0 || weights.empty()) return out;
  if (!(total > 0.0)) throw InputError("apportionment weights sum to zero");
  struct Remainder {
    double fraction;
    std::size_t order;
    const std::string* key;
  };
  std::vector<Remainder> remainders;
  std::size_t assigned = 0;
  std::size_t order = 0;
  for (const auto& [key, w] : weights) {
    const double exact = static_cast<double>(n) * w / total;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    out[key] = whole;
    assigned += whole;
    remainders.push_back({exact - static_cast<double>(whole), order++, &key});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    return a.fraction > b.fraction;
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    ++out[*remainders[i % remainders.size()].key];
  }
  return out;
}

ConditionedSample conditioned_negatives(const Clustering& clustering, const Corpus& corpus,
                                        std::span<const LabeledCluster> positives,
                                        std::span<const FeatureSpec> features,
                                        const SizeBuckets& buckets, std::size_t n,
                                        std::uint64_t seed, const std::set<std::string>& exclude) {
  if (positives.empty()) throw InputError("conditioned sampling needs positive clusters");

  std::unordered_set<std::string_view> positive_ids;
  std::unordered_set<std::string_view> positive_docs;
  std::map<std::string, double> weights;
  for (const auto& p : positives) {
    positive_ids.insert(p.cluster.id);
    positive_docs.insert(p.cluster.members.begin(), p.cluster.members.end());
    weights[stratum_of(p.cluster, corpus, features, buckets)] += 1.0;
  }

  std::map<std::string, std::vector<const Cluster*>> pool;
  std::size_t pool_size = 0;
  for (const auto& c : clustering.clusters) {
    if (exclude.count(c.id) || positive_ids.count(c.id)) continue;
    const bool overlaps = std::any_of(c.members.begin(), c.members.end(),
                                      [&](const auto& m) { return positive_docs.count(m) > 0; });
    if (overlaps) continue;
    pool[stratum_of(c, corpus, features, buckets)].push_back(&c);
    ++pool_size;
  }

  ConditionedSample result;
  result.quotas = apportion(weights, n);
  auto available = [&](const std::string& key) {
    auto it = pool.find(key);
    return it == pool.end() ? std::size_t{0} : it->second.size();
  };

  if (pool_size < n) {
    std::map<std::string, std::size_t> deficits;
    for (const auto& [key, q] : result.quotas) {
      if (q > available(key)) deficits[key] = q - available(key);
    }
    if (deficits.empty()) deficits["*"] = n - pool_size;
    throw InsufficientPoolError("requested " + std::to_string(n) + " negatives from a pool of " +
                                    std::to_string(pool_size),
                                std::move(deficits));
  }

  std::map<std::string, std::size_t> take;
  std::size_t deficit = 0;
  for (const auto& [key, q] : result.quotas) {
    take[key] = std::min(q, available(key));
    if (q > take[key]) {
      result.deficits[key] = q - take[key];
      deficit += q - take[key];
    }
  }
  // Move the shortfall onto strata with spare clusters: the positives'
  // strata by their weight first, then any stratum by spare capacity.
  while (deficit > 0) {
    std::map<std::string, double> spare_weights;
    for (const auto& [key, w] : weights) {
      if (available(key) > take[key]) spare_weights[key] = w;
    }
    if (spare_weights.empty()) {
      for (const auto& [key, clusters] : pool) {
        if (clusters.size() > take[key]) {
          spare_weights[key] = static_cast<double>(clusters.size() - take[key]);
        }
      }
    }
    for (const auto& [key, extra] : apportion(spare_weights, deficit)) {
      const auto add = std::min(extra, available(key) - take[key]);
      take[key] += add;
      deficit -= add;
    }
  }

  result.plan.seed = seed;
  Rng rng(seed);
  for (const auto& [key, count] : take) {
    if (count == 0) continue;
    result.plan.strata.push_back(key);
    result.plan.target[key] = count;
    for (const Cluster* c : draw_without_replacement(pool.at(key), count, rng)) {
      result.negatives.push_back(as_negative(*c));
    }
  }
  return result;
}

BiasReport verify_alignment(const Corpus& corpus, std::span<const LabeledCluster> positives,
                            std::span<const LabeledCluster> negatives,
                            std::span<const FeatureSpec> features, double alpha) {
  if (positives.empty() || negatives.empty()) {
    throw InputError("alignment check needs positives and negatives");
  }
  std::vector<LabeledCluster> combined(positives.begin(), positives.end());
  combined.insert(combined.end(), negatives.begin(), negatives.end());
  return audit(corpus, combined, features, alpha);
}

}  // namespace riskscore
