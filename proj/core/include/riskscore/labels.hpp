#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "riskscore/clustering.hpp"

namespace riskscore {

enum class Label { positive, negative };
enum class LabelSource { expert, sampled_noisy };

std::string_view to_string(Label label);
std::string_view to_string(LabelSource source);
Label parse_label(std::string_view s);
LabelSource parse_label_source(std::string_view s);

// A case study: a cluster of documents with a class label and where that
// label came from.
struct LabeledCluster {
  Cluster cluster;
  Label label = Label::negative;
  LabelSource source = LabelSource::sampled_noisy;

  bool operator==(const LabeledCluster&) const = default;
};

struct LabelRecord {
  std::string cluster_id;
  Label label;
  LabelSource source;
};

// CSV cluster_id,label,source with a header row.
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<LabelRecord>& labels,
                  const std::filesystem::path& path);
void write_labels(const std::vector<LabeledCluster>& labeled,
                  const std::filesystem::path& path);

// Joins label records with cluster memberships. Throws InputError for a label
// naming an unknown cluster.
std::vector<LabeledCluster> attach_labels(const std::vector<LabelRecord>& labels,
                                          const Clustering& clustering);

// Throws LeakageError if any document belongs to two labeled clusters, or
// any cluster id repeats.
void require_disjoint(const std::vector<LabeledCluster>& labeled);

}  // namespace riskscore
