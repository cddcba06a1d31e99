#include "riskscore/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "riskscore/csv.hpp"
#include "riskscore/error.hpp"
#include "riskscore/random.hpp"
#include "riskscore/text.hpp"

namespace riskscore {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  if (b < a) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::uint64_t choose2(std::uint64_t n) { return n * (n - 1) / 2; }

// Groups nodes by label in order of first appearance.
Clustering from_labels(const std::vector<std::string>& ids,
                       const std::vector<std::uint32_t>& labels,
                       std::string_view prefix) {
  std::unordered_map<std::uint32_t, std::size_t> slot;
  Clustering out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = slot.emplace(labels[i], out.clusters.size());
    if (inserted) {
      out.clusters.push_back(
          {std::string(prefix) + std::to_string(out.clusters.size()), {}});
    }
    out.clusters[it->second].members.push_back(ids[i]);
  }
  return out;
}

}  // namespace

std::string signals_to_string(SignalSet signals) {
  std::string out;
  auto add = [&](const char* name) {
    if (!out.empty()) out.push_back('|');
    out += name;
  };
  if (signals & kPhoneMatch) add("phone");
  if (signals & kTextShingle) add("text");
  if (signals & kLocationDate) add("location");
  return out;
}

SignalSet signals_from_string(std::string_view s) {
  SignalSet out = 0;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto end = s.find('|', pos);
    if (end == std::string_view::npos) end = s.size();
    const auto part = s.substr(pos, end - pos);
    if (part == "phone") {
      out |= kPhoneMatch;
    } else if (part == "text") {
      out |= kTextShingle;
    } else if (part == "location") {
      out |= kLocationDate;
    } else if (!part.empty()) {
      throw InputError("unknown signal '" + std::string(part) + "'");
    }
    pos = end + 1;
  }
  return out;
}

SimilarityGraph::SimilarityGraph(std::vector<std::string> node_ids,
                                 std::vector<Edge> edges)
    : ids_(std::move(node_ids)) {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], static_cast<std::uint32_t>(i)).second) {
      throw InputError("duplicate graph node '" + ids_[i] + "'");
    }
  }
  for (auto& e : edges) {
    if (e.a >= ids_.size() || e.b >= ids_.size()) {
      throw InputError("edge endpoint out of range");
    }
    if (e.a == e.b) throw InputError("self-loop on '" + ids_[e.a] + "'");
    if (e.b < e.a) std::swap(e.a, e.b);
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  for (const auto& e : edges) {
    if (!edges_.empty() && edges_.back().a == e.a && edges_.back().b == e.b) {
      edges_.back().provenance |= e.provenance;
    } else {
      edges_.push_back(e);
    }
  }

  std::vector<std::size_t> degree(ids_.size() + 1, 0);
  for (const auto& e : edges_) {
    ++degree[e.a];
    ++degree[e.b];
  }
  offsets_.assign(ids_.size() + 1, 0);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    offsets_[i + 1] = offsets_[i] + degree[i];
  }
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[fill[e.a]++] = e.b;
    adjacency_[fill[e.b]++] = e.a;
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
  }
}

SimilarityGraph SimilarityGraph::from_pairs(
    std::vector<std::string> node_ids,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    SignalSet provenance) {
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    index.emplace(node_ids[i], static_cast<std::uint32_t>(i));
  }
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      throw InputError("edge references unknown node " + a + "-" + b);
    }
    edges.push_back({ia->second, ib->second, provenance});
  }
  return SimilarityGraph(std::move(node_ids), std::move(edges));
}

std::span<const std::uint32_t> SimilarityGraph::neighbors(std::uint32_t node) const {
  return {adjacency_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
}

bool SimilarityGraph::has_edge(std::uint32_t a, std::uint32_t b) const {
  const auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), b);
}

std::optional<std::uint32_t> SimilarityGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double text_similarity(const Document& a, const Document& b, int shingle_len) {
  if (shingle_len < 1) throw InputError("shingle_len must be >= 1");
  return text::jaccard(text::shingle_hashes(text::tokenize(a.text), shingle_len),
                       text::shingle_hashes(text::tokenize(b.text), shingle_len));
}

SimilarityGraph build_graph(const Corpus& corpus, const GraphConfig& config) {
  if (!(config.text_threshold >= 0.0 && config.text_threshold <= 1.0)) {
    throw InputError("text_threshold must lie in [0,1]");
  }
  if (config.shingle_len < 1) throw InputError("shingle_len must be >= 1");
  const auto& docs = corpus.documents();
  const std::size_t n = docs.size();

  std::vector<std::vector<std::uint64_t>> shingles(n);
  for (std::size_t i = 0; i < n; ++i) {
    shingles[i] = text::shingle_hashes(text::tokenize(docs[i].text), config.shingle_len);
  }

  std::vector<std::uint64_t> candidates;
  if (n <= config.all_pairs_cutoff) {
    candidates.reserve(n * (n - (n > 0)) / 2);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) candidates.push_back(pair_key(i, j));
    }
  } else {
    auto emit_blocks = [&](std::vector<std::pair<std::uint64_t, std::uint32_t>>& keyed,
                           std::size_t max_block) {
      std::sort(keyed.begin(), keyed.end());
      std::size_t i = 0;
      while (i < keyed.size()) {
        std::size_t j = i;
        while (j < keyed.size() && keyed[j].first == keyed[i].first) ++j;
        const std::size_t block = j - i;
        if (block >= 2 && block <= max_block) {
          for (std::size_t x = i; x < j; ++x) {
            for (std::size_t y = x + 1; y < j; ++y) {
              if (keyed[x].second != keyed[y].second) {
                candidates.push_back(pair_key(keyed[x].second, keyed[y].second));
              }
            }
          }
        }
        i = j;
      }
    };
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (const auto& p : docs[i].phones) keyed.emplace_back(text::fnv1a(p), i);
    }
    emit_blocks(keyed, n);
    keyed.clear();
    if (config.rare_shingle_df_cap > 2) {
      for (std::uint32_t i = 0; i < n; ++i) {
        for (auto h : shingles[i]) keyed.emplace_back(h, i);
      }
      emit_blocks(keyed, config.rare_shingle_df_cap - 1);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
  }

  auto shares = [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
    for (const auto& v : x) {
      if (std::find(y.begin(), y.end(), v) != y.end()) return true;
    }
    return false;
  };

  std::vector<Edge> edges;
  for (auto key : candidates) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffU);
    const Document& da = docs[a];
    const Document& db = docs[b];
    SignalSet prov = 0;
    if (config.use_phone && shares(da.phones, db.phones)) prov |= kPhoneMatch;
    if (config.use_text && text::jaccard(shingles[a], shingles[b]) >= config.text_threshold &&
        !(shingles[a].empty() && shingles[b].empty())) {
      prov |= kTextShingle;
    }
    if (config.use_location && da.posted_date && db.posted_date &&
        shares(da.locations, db.locations)) {
      const auto days = (std::chrono::sys_days{*da.posted_date} -
                         std::chrono::sys_days{*db.posted_date})
                            .count();
      if (std::abs(days) <= config.date_window_days) prov |= kLocationDate;
    }
    if (prov) edges.push_back({a, b, prov});
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& d : docs) ids.push_back(d.id);
  return SimilarityGraph(std::move(ids), std::move(edges));
}

bool is_partition_of(const Clustering& clustering, std::span<const std::string> ids) {
  std::unordered_set<std::string_view> expected(ids.begin(), ids.end());
  if (expected.size() != ids.size()) return false;
  std::unordered_set<std::string_view> seen;
  for (const auto& c : clustering.clusters) {
    if (c.members.empty()) return false;
    for (const auto& m : c.members) {
      if (!expected.count(m) || !seen.insert(m).second) return false;
    }
  }
  return seen.size() == expected.size();
}

void require_partition_of(const Clustering& clustering,
                          std::span<const std::string> ids) {
  if (!is_partition_of(clustering, ids)) {
    throw InputError("clustering is not a partition of the node set");
  }
}

std::vector<std::vector<std::string>> canonical(const Clustering& clustering) {
  std::vector<std::vector<std::string>> out;
  out.reserve(clustering.clusters.size());
  for (const auto& c : clustering.clusters) {
    auto members = c.members;
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> assignment(const Clustering& clustering,
                                      const SimilarityGraph& graph) {
  require_partition_of(clustering, graph.node_ids());
  std::vector<std::uint32_t> labels(graph.size());
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    for (const auto& m : clustering.clusters[c].members) {
      labels[*graph.index_of(m)] = static_cast<std::uint32_t>(c);
    }
  }
  return labels;
}

std::vector<std::uint32_t> pivot_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), std::uint32_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::uint32_t>(order));
  return order;
}

Clustering kwikcluster(const SimilarityGraph& graph, std::uint64_t seed) {
  const auto order = pivot_order(graph.size(), seed);
  return kwikcluster(graph, order);
}

Clustering kwikcluster(const SimilarityGraph& graph,
                       std::span<const std::uint32_t> order) {
  if (order.size() != graph.size()) {
    throw InputError("pivot order must cover every node once");
  }
  const auto& ids = graph.node_ids();
  std::vector<bool> taken(graph.size(), false);
  Clustering out;
  for (auto pivot : order) {
    if (pivot >= graph.size()) throw InputError("pivot out of range");
    if (taken[pivot]) continue;
    Cluster cluster{"c" + std::to_string(out.clusters.size()), {ids[pivot]}};
    taken[pivot] = true;
    for (auto nb : graph.neighbors(pivot)) {
      if (!taken[nb]) {
        taken[nb] = true;
        cluster.members.push_back(ids[nb]);
      }
    }
    out.clusters.push_back(std::move(cluster));
  }
  return out;
}

Clustering consensus(std::span<const Clustering> clusterings, double threshold) {
  if (clusterings.empty()) throw InputError("consensus needs at least one clustering");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw InputError("consensus threshold must lie in (0,1]");
  }
  std::vector<std::string> ids;
  for (const auto& c : clusterings.front().clusters) {
    ids.insert(ids.end(), c.members.begin(), c.members.end());
  }
  std::unordered_map<std::string_view, std::uint32_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], static_cast<std::uint32_t>(i)).second) {
      throw InputError("clustering lists '" + ids[i] + "' twice");
    }
  }
  for (const auto& c : clusterings) {
    if (!is_partition_of(c, ids)) {
      throw InputError("consensus inputs do not partition the same id set");
    }
  }

  const auto runs = static_cast<double>(clusterings.size());
  const auto needed = static_cast<std::uint32_t>(
      std::max(1.0, std::ceil(threshold * runs - 1e-9)));
  std::unordered_map<std::uint64_t, std::uint32_t> together;
  for (const auto& clustering : clusterings) {
    for (const auto& cluster : clustering.clusters) {
      for (std::size_t x = 0; x < cluster.members.size(); ++x) {
        const auto ix = index.at(cluster.members[x]);
        for (std::size_t y = x + 1; y < cluster.members.size(); ++y) {
          ++together[pair_key(ix, index.at(cluster.members[y]))];
        }
      }
    }
  }
  DisjointSets sets(ids.size());
  for (const auto& [key, count] : together) {
    if (count >= needed) {
      sets.unite(static_cast<std::uint32_t>(key >> 32),
                 static_cast<std::uint32_t>(key & 0xffffffffU));
    }
  }
  std::vector<std::uint32_t> labels(ids.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) labels[i] = sets.find(i);
  return from_labels(ids, labels, "k");
}

Clustering refine(const Clustering& clustering, const SimilarityGraph& graph,
                  int max_passes) {
  auto labels = assignment(clustering, graph);
  std::vector<std::int64_t> sizes(clustering.clusters.size(), 0);
  for (auto l : labels) ++sizes[l];

  std::unordered_map<std::uint32_t, std::int64_t> links;
  for (int pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::uint32_t v = 0; v < graph.size(); ++v) {
      const auto nb = graph.neighbors(v);
      if (nb.empty()) continue;
      links.clear();
      for (auto u : nb) ++links[labels[u]];
      const std::uint32_t home = labels[v];
      const std::int64_t home_links = links.count(home) ? links[home] : 0;
      // Cost of v's incident pairs inside cluster C, up to a constant:
      // |C \ {v}| - 2 * links(v, C).
      const std::int64_t stay = (sizes[home] - 1) - 2 * home_links;
      std::int64_t best = stay;
      std::uint32_t target = home;
      for (const auto& [cluster, count] : links) {
        if (cluster == home) continue;
        const std::int64_t cost = sizes[cluster] - 2 * count;
        if (cost < best || (cost == best && target != home && cluster < target)) {
          best = cost;
          target = cluster;
        }
      }
      if (target != home) {
        --sizes[home];
        ++sizes[target];
        labels[v] = target;
        moved = true;
      }
    }
    if (!moved) break;
  }

  Clustering out;
  std::vector<std::vector<std::string>> members(clustering.clusters.size());
  for (std::uint32_t v = 0; v < graph.size(); ++v) {
    members[labels[v]].push_back(graph.node_ids()[v]);
  }
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    if (members[c].empty()) continue;
    // Keep the input's member order for untouched clusters.
    auto ordered = clustering.clusters[c].members;
    std::vector<std::string> kept;
    std::unordered_set<std::string_view> now(members[c].begin(), members[c].end());
    for (const auto& m : ordered) {
      if (now.count(m)) kept.push_back(m);
    }
    std::unordered_set<std::string_view> had(ordered.begin(), ordered.end());
    for (const auto& m : members[c]) {
      if (!had.count(m)) kept.push_back(m);
    }
    out.clusters.push_back({clustering.clusters[c].id, std::move(kept)});
  }
  return out;
}

std::uint64_t disagreement_cost(const Clustering& clustering,
                                const SimilarityGraph& graph) {
  const auto labels = assignment(clustering, graph);
  std::uint64_t within_edges = 0;
  std::uint64_t cut = 0;
  for (const auto& e : graph.edges()) {
    if (labels[e.a] == labels[e.b]) {
      ++within_edges;
    } else {
      ++cut;
    }
  }
  std::uint64_t within_pairs = 0;
  for (const auto& c : clustering.clusters) within_pairs += choose2(c.members.size());
  return cut + (within_pairs - within_edges);
}

double adjusted_rand_index(const Clustering& a, const Clustering& b) {
  std::unordered_map<std::string_view, std::size_t> label_a;
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.clusters.size(); ++c) {
    for (const auto& m : a.clusters[c].members) {
      label_a[m] = c;
      ++n;
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> table;
  std::vector<std::uint64_t> row(a.clusters.size(), 0);
  std::vector<std::uint64_t> col(b.clusters.size(), 0);
  std::size_t seen = 0;
  for (std::size_t c = 0; c < b.clusters.size(); ++c) {
    for (const auto& m : b.clusters[c].members) {
      auto it = label_a.find(m);
      if (it == label_a.end()) throw InputError("clusterings cover different ids");
      ++table[{it->second, c}];
      ++row[it->second];
      ++col[c];
      ++seen;
    }
  }
  if (seen != n) throw InputError("clusterings cover different ids");
  double index = 0;
  for (const auto& [cell, count] : table) index += static_cast<double>(choose2(count));
  double sum_a = 0;
  double sum_b = 0;
  for (auto r : row) sum_a += static_cast<double>(choose2(r));
  for (auto c : col) sum_b += static_cast<double>(choose2(c));
  const double total = static_cast<double>(choose2(n));
  if (total == 0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ClusterResult cluster_corpus(const Corpus& corpus, const ClusterConfig& config) {
  if (config.runs < 1) throw InputError("cluster runs must be >= 1");
  ClusterResult result;
  result.graph = build_graph(corpus, config.graph);
  std::vector<Clustering> runs;
  runs.reserve(static_cast<std::size_t>(config.runs));
  for (int r = 0; r < config.runs; ++r) {
    runs.push_back(kwikcluster(result.graph, config.seed + static_cast<std::uint64_t>(r)));
  }
  Clustering merged = runs.size() == 1 ? std::move(runs.front())
                                       : consensus(runs, config.consensus_threshold);
  result.cost_before_refine = disagreement_cost(merged, result.graph);
  result.clustering = config.refine_passes > 0
                          ? refine(merged, result.graph, config.refine_passes)
                          : std::move(merged);
  result.cost = disagreement_cost(result.clustering, result.graph);
  return result;
}

void write_clustering(const Clustering& clustering, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "cluster_id,document_id\n";
  for (const auto& c : clustering.clusters) {
    for (const auto& m : c.members) out << csv::escape(c.id) << ',' << csv::escape(m) << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

Clustering read_clustering(const std::filesystem::path& path) {
  const auto table = csv::read(path, {"cluster_id", "document_id"});
  Clustering out;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& row : table.rows) {
    auto [it, inserted] = slot.emplace(row[0], out.clusters.size());
    if (inserted) out.clusters.push_back({row[0], {}});
    out.clusters[it->second].members.push_back(row[1]);
  }
  return out;
}

void write_graph(const SimilarityGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id_a,id_b,provenance\n";
  const auto& ids = graph.node_ids();
  for (const auto& e : graph.edges()) {
    out << csv::escape(ids[e.a]) << ',' << csv::escape(ids[e.b]) << ','
        << signals_to_string(e.provenance) << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace riskscore
