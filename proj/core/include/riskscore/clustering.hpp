#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "riskscore/corpus.hpp"

namespace riskscore {

// Similarity signals that can justify a positive edge.
enum Signal : std::uint8_t {
  kPhoneMatch = 1,
  kTextShingle = 2,
  kLocationDate = 4,
};
using SignalSet = std::uint8_t;

// "phone|text|location" style rendering, in fixed signal order.
std::string signals_to_string(SignalSet signals);
SignalSet signals_from_string(std::string_view s);

struct Edge {
  std::uint32_t a;
  std::uint32_t b;
  SignalSet provenance;
};

// Undirected graph of positive ("similar") edges over document ids. Absent
// pairs are the negative edges of the correlation-clustering instance.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;

  // Orients every edge as a < b and merges duplicates by OR-ing provenance.
  // Throws InputError on self-loops, out-of-range endpoints or duplicate ids.
  SimilarityGraph(std::vector<std::string> node_ids, std::vector<Edge> edges);

  static SimilarityGraph from_pairs(
      std::vector<std::string> node_ids,
      const std::vector<std::pair<std::string, std::string>>& pairs,
      SignalSet provenance = kPhoneMatch);

  const std::vector<std::string>& node_ids() const noexcept { return ids_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return ids_.size(); }

  std::span<const std::uint32_t> neighbors(std::uint32_t node) const;
  bool has_edge(std::uint32_t a, std::uint32_t b) const;
  std::optional<std::uint32_t> index_of(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> adjacency_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

double text_similarity(const Document& a, const Document& b, int shingle_len);

struct GraphConfig {
  double text_threshold = 0.5;
  int shingle_len = 3;
  bool use_phone = true;
  bool use_text = true;
  bool use_location = true;
  int date_window_days = 7;
  // Shingles shared by fewer documents than this form candidate blocks.
  std::size_t rare_shingle_df_cap = 10;
  // Corpora up to this size compare all pairs; larger ones only blocked pairs.
  std::size_t all_pairs_cutoff = 1000;
};

SimilarityGraph build_graph(const Corpus& corpus, const GraphConfig& config);

struct Cluster {
  std::string id;
  std::vector<std::string> members;

  bool operator==(const Cluster&) const = default;
};

struct Clustering {
  std::vector<Cluster> clusters;

  std::size_t size() const noexcept { return clusters.size(); }
  bool operator==(const Clustering&) const = default;
};

// True when the clusters are non-empty, pairwise disjoint and cover ids.
bool is_partition_of(const Clustering& clustering,
                     std::span<const std::string> ids);
void require_partition_of(const Clustering& clustering,
                          std::span<const std::string> ids);

// Member-sorted, cluster-sorted form for comparison up to relabeling.
std::vector<std::vector<std::string>> canonical(const Clustering& clustering);

// Node index -> cluster index, with clusters numbered in listing order.
std::vector<std::uint32_t> assignment(const Clustering& clustering,
                                      const SimilarityGraph& graph);

// Uniformly random permutation of [0, n) from the seed. KwikCluster visits
// pivots in this order, skipping already clustered nodes, which is the same
// as drawing a uniform pivot among the remaining nodes at every step.
std::vector<std::uint32_t> pivot_order(std::size_t n, std::uint64_t seed);

Clustering kwikcluster(const SimilarityGraph& graph, std::uint64_t seed);
Clustering kwikcluster(const SimilarityGraph& graph,
                       std::span<const std::uint32_t> order);

// Co-association consensus: ids joined when they share a cluster in at least
// ceil(threshold * runs) inputs, output is the connected components.
Clustering consensus(std::span<const Clustering> clusterings, double threshold);

// Single-node best-move local search on disagreement cost.
Clustering refine(const Clustering& clustering, const SimilarityGraph& graph,
                  int max_passes);

std::uint64_t disagreement_cost(const Clustering& clustering,
                                const SimilarityGraph& graph);

double adjusted_rand_index(const Clustering& a, const Clustering& b);

struct ClusterConfig {
  GraphConfig graph;
  int runs = 5;
  double consensus_threshold = 0.5;
  int refine_passes = 10;
  std::uint64_t seed = 1;
};

struct ClusterResult {
  SimilarityGraph graph;
  Clustering clustering;
  std::uint64_t cost_before_refine = 0;
  std::uint64_t cost = 0;
};

// build_graph, then `runs` KwikCluster passes with seeds seed, seed+1, ...,
// consensus when runs > 1, then refine.
ClusterResult cluster_corpus(const Corpus& corpus, const ClusterConfig& config);

// CSV cluster_id,document_id with a header row.
void write_clustering(const Clustering& clustering,
                      const std::filesystem::path& path);
Clustering read_clustering(const std::filesystem::path& path);

// CSV id_a,id_b,provenance with a header row.
void write_graph(const SimilarityGraph& graph, const std::filesystem::path& path);

}  // namespace riskscore
