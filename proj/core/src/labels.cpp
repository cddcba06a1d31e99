#include "riskscore/labels.hpp"

#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "riskscore/csv.hpp"
#include "riskscore/error.hpp"

namespace riskscore {

std::string_view to_string(Label label) {
  return label == Label::positive ? "positive" : "negative";
}

std::string_view to_string(LabelSource source) {
  return source == LabelSource::expert ? "expert" : "sampled-noisy";
}

Label parse_label(std::string_view s) {
  if (s == "positive" || s == "1" || s == "+") return Label::positive;
  if (s == "negative" || s == "0" || s == "-") return Label::negative;
  throw InputError("unknown label '" + std::string(s) + "'");
}

LabelSource parse_label_source(std::string_view s) {
  if (s == "expert") return LabelSource::expert;
  if (s == "sampled-noisy" || s == "sampled") return LabelSource::sampled_noisy;
  throw InputError("unknown label source '" + std::string(s) + "'");
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  const auto table = csv::read(path, {"cluster_id", "label", "source"});
  std::vector<LabelRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    out.push_back({row[0], parse_label(row[1]), parse_label_source(row[2])});
  }
  return out;
}

void write_labels(const std::vector<LabelRecord>& labels,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "cluster_id,label,source\n";
  for (const auto& l : labels) {
    out << csv::escape(l.cluster_id) << ',' << to_string(l.label) << ','
        << to_string(l.source) << '\n';
  }
  if (!out) throw IoError("write failed on " + path.string());
}

void write_labels(const std::vector<LabeledCluster>& labeled,
                  const std::filesystem::path& path) {
  std::vector<LabelRecord> records;
  records.reserve(labeled.size());
  for (const auto& l : labeled) records.push_back({l.cluster.id, l.label, l.source});
  write_labels(records, path);
}

std::vector<LabeledCluster> attach_labels(const std::vector<LabelRecord>& labels,
                                          const Clustering& clustering) {
  std::unordered_map<std::string_view, const Cluster*> by_id;
  for (const auto& c : clustering.clusters) by_id.emplace(c.id, &c);
  std::vector<LabeledCluster> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto it = by_id.find(l.cluster_id);
    if (it == by_id.end()) {
      throw InputError("label for unknown cluster '" + l.cluster_id + "'");
    }
    out.push_back({*it->second, l.label, l.source});
  }
  return out;
}

void require_disjoint(const std::vector<LabeledCluster>& labeled) {
  std::unordered_set<std::string_view> clusters;
  std::unordered_map<std::string_view, std::string_view> owner;
  for (const auto& l : labeled) {
    if (!clusters.insert(l.cluster.id).second) {
      throw LeakageError("cluster '" + l.cluster.id + "' labeled twice");
    }
    for (const auto& m : l.cluster.members) {
      auto [it, inserted] = owner.emplace(m, l.cluster.id);
      if (!inserted) {
        throw LeakageError("document '" + m + "' is in clusters '" +
                           std::string(it->second) + "' and '" + l.cluster.id + "'");
      }
    }
  }
}

}  // namespace riskscore
