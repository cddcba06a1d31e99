#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "riskscore/bias.hpp"
#include "riskscore/clustering.hpp"
#include "riskscore/corpus.hpp"
#include "riskscore/labels.hpp"

namespace riskscore {

// Lower bounds of cluster-size buckets, strictly increasing and starting at
// 1. The default is {1, 2-4, 5-16, 17-64, 65+}.
struct SizeBuckets {
  std::vector<std::size_t> lower_bounds = {1, 2, 5, 17, 65};

  std::size_t bucket_of(std::size_t size) const;
  std::string label(std::size_t bucket) const;
};

// Uniform draw of n clusters without replacement from those not excluded,
// labeled negative with a sampled-noisy source. Throws InsufficientPoolError
// when fewer than n clusters remain.
std::vector<LabeledCluster> random_negatives(const Clustering& clustering,
                                             const std::set<std::string>& exclude,
                                             std::size_t n, std::uint64_t seed);

// Stratum key of a cluster: its majority group per feature plus its size
// bucket, joined by " / ".
std::string stratum_of(const Cluster& cluster, const Corpus& corpus,
                       std::span<const FeatureSpec> features, const SizeBuckets& buckets);

struct SamplingPlan {
  std::vector<std::string> strata;            // sorted keys
  std::map<std::string, std::size_t> target;  // per-stratum clusters to draw
  std::uint64_t seed = 0;
};

struct ConditionedSample {
  std::vector<LabeledCluster> negatives;
  // Proportional quotas before any pool shortfall was handled.
  std::map<std::string, std::size_t> quotas;
  SamplingPlan plan;  // final per-stratum counts actually drawn
  // Strata whose pool could not cover its quota, with the shortfall that
  // was moved to other strata.
  std::map<std::string, std::size_t> deficits;
};

// Largest-remainder apportionment of n over the weights; ties go to the
// earlier key.
std::map<std::string, std::size_t> apportion(const std::map<std::string, double>& weights,
                                             std::size_t n);

// Draws negatives whose joint (feature group x size bucket) distribution
// follows the positives'. Clusters containing a document of any positive,
// or listed in exclude, never enter the pool.
ConditionedSample conditioned_negatives(const Clustering& clustering, const Corpus& corpus,
                                        std::span<const LabeledCluster> positives,
                                        std::span<const FeatureSpec> features,
                                        const SizeBuckets& buckets, std::size_t n,
                                        std::uint64_t seed,
                                        const std::set<std::string>& exclude = {});

// Audits positives together with negatives; success means nothing flagged.
BiasReport verify_alignment(const Corpus& corpus, std::span<const LabeledCluster> positives,
                            std::span<const LabeledCluster> negatives,
                            std::span<const FeatureSpec> features, double alpha);

}  // namespace riskscore
