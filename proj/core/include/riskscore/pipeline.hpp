#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "riskscore/bias.hpp"
#include "riskscore/clustering.hpp"
#include "riskscore/config.hpp"
#include "riskscore/eval.hpp"
#include "riskscore/sampling.hpp"
#include "riskscore/synth.hpp"

namespace riskscore {

enum class SampleMethod { random, conditioned };

// Every stage reads and writes files under paths.out. Input paths may use the
// placeholder {out}.
struct PipelineConfig {
  struct Paths {
    std::string corpus = "{out}/synth/corpus.jsonl";
    std::string labels = "{out}/synth/labels.csv";
    // Cluster map the label ids refer to; empty means the discovered clusters.
    std::string label_clusters = "{out}/synth/truth_clusters.csv";
    std::string gazetteer = "{out}/synth/gazetteer.txt";
    std::string rules = "{out}/synth/rules.jsonl";
    // Tokens removed from every text before training; empty disables.
    std::string lexicon;
    std::filesystem::path out = "out";
  } paths;

  std::size_t ingest_limit = 0;  // 0 = no cap
  ClusterConfig cluster;
  SampleMethod sample_method = SampleMethod::conditioned;
  double sample_ratio = 1.0;  // negatives per positive cluster
  std::vector<FeatureSpec> sample_features = {{"domain", {}, ""}};
  SizeBuckets buckets;
  std::vector<FeatureSpec> bias_features = {{"domain", {}, ""}, {"location", {}, ""}};
  // Attribute -> values kept as their own group; the rest fall to "other".
  std::map<std::string, Grouping> groupings;
  double alpha = 0.05;
  Correction correction = Correction::none;
  EvalConfig eval;
  std::size_t folds = 5;
  std::vector<FeatureSpec> fold_features = {{"domain", {}, ""}};
  int fold_retries = 50;
  bool table2 = false;  // diagnose the published domain x class fixture
  synth::SynthConfig synth;
  std::uint64_t seed = 1;

  // `{out}` expanded.
  std::filesystem::path resolve(const std::string& path) const;
  // Features with the configured groupings applied.
  std::vector<FeatureSpec> grouped(const std::vector<FeatureSpec>& features) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Every recognised key with its description, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Throws ConfigError naming the key for unknown keys or unparsable values.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);
PipelineConfig make_config(const KeyValues& values);
// One `key = value` line per key.
std::string dump_config(const PipelineConfig& config);

enum class Stage { synth, ingest, cluster, diagnose, sample, train, evaluate, indicators };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view s);
// The stages `pipeline` chains, in order (synth excluded).
const std::vector<Stage>& pipeline_stages();

// Range checks plus existence of the stage's external input files. Throws
// ConfigError naming the field.
void validate(const PipelineConfig& config, Stage stage);

// Runs one stage and returns its one-line summary.
std::string run_stage(const PipelineConfig& config, Stage stage);

}  // namespace riskscore
