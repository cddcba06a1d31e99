#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "riskscore/bias.hpp"
#include "riskscore/clustering.hpp"
#include "riskscore/corpus.hpp"
#include "riskscore/labels.hpp"

namespace riskscore::synth {

struct SignalToken {
  std::string token;
  double p_positive = 0.0;  // per-document (or per-cluster) injection probability
  double p_negative = 0.0;
};

// Group proportions for one attribute. Negative clusters follow `base`;
// positive clusters follow (1 - beta) * base + beta * [values[0]], so beta = 1
// puts every positive cluster in values[0]. Each cluster gets one primary
// value; each member document keeps it with probability `purity` and draws
// uniformly from all values otherwise.
struct FeatureBias {
  std::vector<std::string> values;
  std::vector<double> base;
  double beta = 0.0;
  double purity = 0.9;
};

struct SynthConfig {
  std::size_t num_clusters = 250;
  double positive_fraction = 0.25;
  // Cluster size is 1 + Geometric(size_p) failures, capped.
  double size_p = 0.125;
  std::size_t max_cluster_size = 64;
  std::size_t vocabulary_size = 2000;
  std::size_t tokens_per_doc = 30;
  std::vector<SignalToken> signal_tokens = {
      {"velvet", 0.35, 0.03}, {"discreet", 0.35, 0.03}, {"newgirl", 0.3, 0.02},
      {"outcall", 0.3, 0.03}, {"specials", 0.3, 0.03}};
  // Inject signals once per cluster (into every member) rather than per document.
  bool cluster_level_signals = false;

  FeatureBias domain = {{"backlist.example", "classy.example", "boardhub.example",
                         "postit.example"},
                        {0.4, 0.2, 0.2, 0.2},
                        0.0,
                        0.9};
  // Probability a document carries its domain's boilerplate token.
  double domain_proxy_rate = 0.8;

  FeatureBias location = {{"springfield", "riverton", "lakeside", "fairview", "greenville",
                           "kingsport", "milton", "ashford"},
                          {0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125},
                          0.0,
                          1.0};
  double location_mention_rate = 0.7;
  double phone_in_text_rate = 0.5;
  // Probability a member after the first copies an earlier member's text.
  double duplication_rate = 0.1;
  std::uint64_t seed = 1;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Boilerplate token for a domain value: its first label with non-letters
// removed ("backlist.example" -> "backlist").
std::string proxy_token(const std::string& domain);

struct SynthData {
  Corpus corpus;
  Clustering truth;
  std::vector<LabeledCluster> labels;    // every planted cluster, expert-sourced
  std::set<std::string> proxy_lexicon;   // domain boilerplate tokens
  std::set<std::string> location_lexicon;
  std::set<std::string> signal_lexicon;  // planted class-signal tokens

  std::vector<LabeledCluster> positives() const;
};

SynthData generate(const SynthConfig& config);

// corpus.jsonl, truth_clusters.csv, truth_labels.csv, labels.csv (expert
// positives), gazetteer.txt, lexicon.txt (domain proxies and locations) and
// rules.jsonl (example indicator rules).
void write_synth(const SynthData& data, const std::filesystem::path& dir);

// Document-by-domain-group counts of ads by label class:
// rows {backpage.com, other}, columns {positive, negative}.
ContingencyTable table2_fixture();

// A labeled corpus whose domain x class document counts are exactly the
// fixture's, along with the {backpage.com, other} grouping.
struct Table2Corpus {
  Corpus corpus;
  std::vector<LabeledCluster> labeled;
  FeatureSpec feature;
};
Table2Corpus table2_corpus();

}  // namespace riskscore::synth
