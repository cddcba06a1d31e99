#include "riskscore/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "riskscore/corpus.hpp"
#include "riskscore/csv.hpp"
#include "riskscore/error.hpp"
#include "riskscore/indicators.hpp"
#include "riskscore/labels.hpp"
#include "riskscore/model.hpp"
#include "riskscore/text.hpp"

namespace riskscore {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Value parsing

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string s = text::to_lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

std::vector<FeatureSpec> parse_features(const std::string& key, const std::string& v) {
  std::vector<FeatureSpec> out;
  for (const auto& a : parse_list(v)) out.push_back({a, {}, ""});
  if (out.empty()) throw ConfigError(key, "needs at least one attribute");
  return out;
}

std::string format_features(const std::vector<FeatureSpec>& features) {
  std::vector<std::string> names;
  for (const auto& f : features) names.push_back(f.attribute);
  return join(names);
}

template <typename Enum>
Enum parse_enum(const std::string& key, const std::string& v, Enum (*parse)(std::string_view)) {
  try {
    return parse(v);
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "cluster_vector") return Aggregation::cluster_vector;
  if (s == "mean_document_score") return Aggregation::mean_document_score;
  throw InputError("unknown aggregation '" + std::string(s) + "'");
}

std::string_view aggregation_name(Aggregation a) {
  return a == Aggregation::cluster_vector ? "cluster_vector" : "mean_document_score";
}

SampleMethod parse_sample_method(std::string_view s) {
  if (s == "random") return SampleMethod::random;
  if (s == "conditioned") return SampleMethod::conditioned;
  throw InputError("unknown sampling method '" + std::string(s) + "'");
}

Correction parse_correction(std::string_view s) {
  if (s == "none") return Correction::none;
  if (s == "bonferroni") return Correction::bonferroni;
  throw InputError("unknown correction '" + std::string(s) + "'");
}

struct Entry {
  ConfigKey doc;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define RS_STRING(KEY, FIELD, HELP)                                                         \
  Entry {                                                                                   \
    {KEY, HELP}, [](PipelineConfig& c, const std::string&, const std::string& v) { FIELD = v; }, \
        [](const PipelineConfig& c) { return std::string(FIELD); }                          \
  }
#define RS_DOUBLE(KEY, FIELD, HELP)                                                      \
  Entry {                                                                                \
    {KEY, HELP},                                                                         \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {              \
          FIELD = parse_double(k, v);                                                    \
        },                                                                               \
        [](const PipelineConfig& c) { return shortest(FIELD); }                          \
  }
#define RS_INT(KEY, FIELD, TYPE, HELP)                                                   \
  Entry {                                                                                \
    {KEY, HELP},                                                                         \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {              \
          const auto n = parse_u64(k, v);                                                \
          if (n > static_cast<std::uint64_t>(std::numeric_limits<TYPE>::max())) {        \
            throw ConfigError(k, "value too large");                                     \
          }                                                                              \
          FIELD = static_cast<TYPE>(n);                                                  \
        },                                                                               \
        [](const PipelineConfig& c) { return std::to_string(FIELD); }                    \
  }
#define RS_BOOL(KEY, FIELD, HELP)                                                        \
  Entry {                                                                                \
    {KEY, HELP},                                                                         \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {              \
          FIELD = parse_bool(k, v);                                                      \
        },                                                                               \
        [](const PipelineConfig& c) { return std::string(FIELD ? "true" : "false"); }    \
  }
#define RS_ENUM(KEY, FIELD, PARSE, NAME, HELP)                                           \
  Entry {                                                                                \
    {KEY, HELP},                                                                         \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {              \
          FIELD = parse_enum(k, v, PARSE);                                               \
        },                                                                               \
        [](const PipelineConfig& c) { return std::string(NAME(FIELD)); }                 \
  }

std::string_view loss_name(Loss v) { return to_string(v); }
std::string_view penalty_name(Penalty v) { return to_string(v); }
std::string_view schedule_name(Schedule v) { return to_string(v); }
std::string_view weighting_name(Weighting v) { return to_string(v); }
std::string_view method_name(SampleMethod m) {
  return m == SampleMethod::random ? "random" : "conditioned";
}
std::string_view correction_name(Correction c) {
  return c == Correction::none ? "none" : "bonferroni";
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      RS_STRING("paths.corpus", c.paths.corpus, "input corpus, one JSON record per line"),
      RS_STRING("paths.labels", c.paths.labels, "expert labels CSV cluster_id,label,source"),
      RS_STRING("paths.label_clusters", c.paths.label_clusters,
                "cluster map (cluster_id,document_id) the label ids refer to; empty = discovered clusters"),
      RS_STRING("paths.gazetteer", c.paths.gazetteer,
                "location terms matched in text at ingest; empty disables"),
      RS_STRING("paths.rules", c.paths.rules, "indicator rules, JSON lines; empty skips indicators"),
      RS_STRING("paths.lexicon", c.paths.lexicon,
                "tokens removed from texts before training (bias mitigation); empty disables"),
      Entry{{"paths.out", "artifact directory"},
            [](PipelineConfig& c, const std::string&, const std::string& v) { c.paths.out = v; },
            [](const PipelineConfig& c) { return c.paths.out.string(); }},
      RS_INT("seed", c.seed, std::uint64_t, "master seed for every randomized stage"),
      RS_INT("ingest.limit", c.ingest_limit, std::size_t, "cap on accepted records; 0 = none"),
      RS_DOUBLE("cluster.text_threshold", c.cluster.graph.text_threshold,
                "Jaccard shingle similarity that links two documents"),
      RS_INT("cluster.shingle_len", c.cluster.graph.shingle_len, int, "tokens per shingle"),
      RS_BOOL("cluster.use_phone", c.cluster.graph.use_phone, "link documents sharing a phone"),
      RS_BOOL("cluster.use_text", c.cluster.graph.use_text, "link near-duplicate texts"),
      RS_BOOL("cluster.use_location", c.cluster.graph.use_location,
              "link shared locations posted within the date window"),
      RS_INT("cluster.date_window_days", c.cluster.graph.date_window_days, int,
             "days apart for the location signal"),
      RS_INT("cluster.rare_shingle_df_cap", c.cluster.graph.rare_shingle_df_cap, std::size_t,
             "shingles in fewer documents than this form candidate blocks"),
      RS_INT("cluster.all_pairs_cutoff", c.cluster.graph.all_pairs_cutoff, std::size_t,
             "largest corpus compared all-pairs"),
      RS_INT("cluster.runs", c.cluster.runs, int, "KwikCluster runs combined by consensus"),
      RS_DOUBLE("cluster.consensus_threshold", c.cluster.consensus_threshold,
                "fraction of runs that must co-cluster a linked pair"),
      RS_INT("cluster.refine_passes", c.cluster.refine_passes, int, "local-move passes; 0 disables"),
      RS_ENUM("sample.method", c.sample_method, parse_sample_method, method_name,
              "negative sampling: random | conditioned"),
      RS_DOUBLE("sample.ratio", c.sample_ratio, "negative clusters per positive cluster"),
      Entry{{"sample.features", "attributes negatives are conditioned on (comma list)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              c.sample_features = parse_features(k, v);
            },
            [](const PipelineConfig& c) { return format_features(c.sample_features); }},
      Entry{{"sample.buckets", "cluster-size bucket lower bounds (comma list starting at 1)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              std::vector<std::size_t> bounds;
              for (const auto& b : parse_list(v)) bounds.push_back(parse_u64(k, b));
              c.buckets.lower_bounds = bounds;
            },
            [](const PipelineConfig& c) {
              std::vector<std::string> s;
              for (auto b : c.buckets.lower_bounds) s.push_back(std::to_string(b));
              return join(s);
            }},
      Entry{{"bias.features", "attributes audited for class dependence (comma list)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              c.bias_features = parse_features(k, v);
            },
            [](const PipelineConfig& c) { return format_features(c.bias_features); }},
      RS_DOUBLE("bias.alpha", c.alpha, "significance level for bias and fold tests"),
      RS_ENUM("bias.correction", c.correction, parse_correction, correction_name,
              "multiple-test correction: none | bonferroni"),
      RS_BOOL("diagnose.table2", c.table2, "diagnose the built-in domain x class count table"),
      RS_ENUM("model.loss", c.eval.train.loss, parse_loss, loss_name, "logistic | hinge"),
      RS_ENUM("model.penalty", c.eval.train.penalty, parse_penalty, penalty_name, "l2 | l1"),
      RS_DOUBLE("model.lambda", c.eval.train.lambda, "regularization strength"),
      RS_INT("model.epochs", c.eval.train.epochs, int, "full-batch gradient steps"),
      RS_DOUBLE("model.learning_rate", c.eval.train.learning_rate, "initial step size"),
      RS_ENUM("model.schedule", c.eval.train.schedule, parse_schedule, schedule_name,
              "halving_on_increase | constant"),
      RS_DOUBLE("model.tolerance", c.eval.train.tolerance, "relative improvement that stops training"),
      RS_ENUM("model.weighting", c.eval.weighting, parse_weighting, weighting_name, "tf | tfidf"),
      Entry{{"model.ngram_orders", "n-gram orders in the vocabulary (comma list of 1,2,3)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              std::set<int> orders;
              for (const auto& o : parse_list(v)) {
                const auto n = parse_u64(k, o);
                if (n < 1 || n > 3) throw ConfigError(k, "orders must lie in 1..3");
                orders.insert(static_cast<int>(n));
              }
              if (orders.empty()) throw ConfigError(k, "needs at least one order");
              c.eval.vocabulary.orders = orders;
            },
            [](const PipelineConfig& c) {
              std::vector<std::string> s;
              for (int o : c.eval.vocabulary.orders) s.push_back(std::to_string(o));
              return join(s);
            }},
      RS_INT("model.min_df", c.eval.vocabulary.min_df, std::size_t,
             "minimum document frequency of a vocabulary token"),
      RS_INT("model.max_vocabulary", c.eval.vocabulary.max_size, std::size_t,
             "vocabulary cap, most frequent first"),
      RS_ENUM("model.aggregation", c.eval.aggregation, parse_aggregation, aggregation_name,
              "cluster_vector | mean_document_score"),
      RS_INT("model.top_k", c.eval.top_k, std::size_t, "features listed in reports"),
      RS_INT("eval.folds", c.folds, std::size_t, "cross-validation folds"),
      Entry{{"eval.features", "attributes folds are stratified on (comma list)"},
            [](PipelineConfig& c, const std::string& k, const std::string& v) {
              c.fold_features = parse_features(k, v);
            },
            [](const PipelineConfig& c) { return format_features(c.fold_features); }},
      RS_INT("eval.max_retries", c.fold_retries, int, "reshuffles when a fold test rejects"),
      RS_INT("synth.num_clusters", c.synth.num_clusters, std::size_t, "planted clusters"),
      RS_DOUBLE("synth.positive_fraction", c.synth.positive_fraction, "share of positive clusters"),
      RS_DOUBLE("synth.size_p", c.synth.size_p, "geometric cluster-size parameter (mean 1/p)"),
      RS_INT("synth.max_cluster_size", c.synth.max_cluster_size, std::size_t, "cluster-size cap"),
      RS_INT("synth.vocabulary_size", c.synth.vocabulary_size, std::size_t,
             "background vocabulary size"),
      RS_INT("synth.tokens_per_doc", c.synth.tokens_per_doc, std::size_t,
             "background tokens per document"),
      RS_DOUBLE("synth.domain_beta", c.synth.domain.beta,
                "domain skew: share of positives forced into the first domain"),
      RS_DOUBLE("synth.domain_purity", c.synth.domain.purity,
                "probability a document keeps its cluster's domain"),
      RS_DOUBLE("synth.domain_proxy_rate", c.synth.domain_proxy_rate,
                "probability a document carries its domain's boilerplate token"),
      RS_DOUBLE("synth.location_beta", c.synth.location.beta, "location skew"),
      RS_DOUBLE("synth.location_purity", c.synth.location.purity,
                "probability a document keeps its cluster's location"),
      RS_DOUBLE("synth.location_mention_rate", c.synth.location_mention_rate,
                "probability the location appears in the text"),
      RS_DOUBLE("synth.phone_in_text_rate", c.synth.phone_in_text_rate,
                "probability the phone appears in the text"),
      RS_DOUBLE("synth.duplication_rate", c.synth.duplication_rate,
                "probability a member copies an earlier member's text"),
      RS_BOOL("synth.cluster_level_signals", c.synth.cluster_level_signals,
              "inject signal tokens per cluster instead of per document"),
  };
  return table;
}

#undef RS_STRING
#undef RS_DOUBLE
#undef RS_INT
#undef RS_BOOL
#undef RS_ENUM

const Entry* find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.doc.name == key) return &e;
  }
  return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.doc);
    out.push_back({"group.<attribute>",
                   "values of <attribute> kept as their own group; others become 'other'"});
    return out;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  if (key.rfind("group.", 0) == 0 && key.size() > 6) {
    Grouping g;
    for (const auto& v : parse_list(value)) g.groups[v] = v;
    if (g.groups.empty()) throw ConfigError(key, "needs at least one value");
    config.groupings[key.substr(6)] = g;
    return;
  }
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError(key, "unknown key");
  e->set(config, key, value);
}

std::string get_config_value(const PipelineConfig& config, const std::string& key) {
  if (key.rfind("group.", 0) == 0) {
    auto it = config.groupings.find(key.substr(6));
    if (it == config.groupings.end()) return "";
    std::vector<std::string> values;
    for (const auto& [v, g] : it->second.groups) values.push_back(v);
    return join(values);
  }
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError(key, "unknown key");
  return e->get(config);
}

PipelineConfig make_config(const KeyValues& values) {
  PipelineConfig config;
  for (const auto& [k, v] : values) set_config_value(config, k, v);
  return config;
}

std::string dump_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.doc.name + " = " + e.get(config) + "\n";
  for (const auto& [attr, g] : config.groupings) {
    out += "group." + attr + " = " + get_config_value(config, "group." + attr) + "\n";
  }
  return out;
}

fs::path PipelineConfig::resolve(const std::string& path) const {
  std::string s = path;
  const std::string token = "{out}";
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos)) {
    s.replace(pos, token.size(), paths.out.string());
    pos += paths.out.string().size();
  }
  return s;
}

std::vector<FeatureSpec> PipelineConfig::grouped(const std::vector<FeatureSpec>& features) const {
  std::vector<FeatureSpec> out = features;
  for (auto& f : out) {
    auto it = groupings.find(f.attribute);
    if (it != groupings.end()) f.grouping = it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::synth: return "synth";
    case Stage::ingest: return "ingest";
    case Stage::cluster: return "cluster";
    case Stage::diagnose: return "diagnose";
    case Stage::sample: return "sample";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
    case Stage::indicators: return "indicators";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::synth, Stage::ingest, Stage::cluster, Stage::diagnose, Stage::sample,
                   Stage::train, Stage::evaluate, Stage::indicators}) {
    if (to_string(st) == s) return st;
  }
  throw InputError("unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> stages = {Stage::ingest,   Stage::cluster, Stage::diagnose,
                                            Stage::sample,   Stage::train,   Stage::evaluate,
                                            Stage::indicators};
  return stages;
}

namespace {

void require_range(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

void require_file(const PipelineConfig& c, const std::string& key, const std::string& value,
                  bool optional) {
  if (value.empty()) {
    if (optional) return;
    throw ConfigError(key, "required");
  }
  const fs::path p = c.resolve(value);
  if (!fs::is_regular_file(p)) throw ConfigError(key, "file not found: " + p.string());
}

void validate_ranges(const PipelineConfig& c) {
  const auto& g = c.cluster.graph;
  require_range(g.text_threshold >= 0.0 && g.text_threshold <= 1.0, "cluster.text_threshold",
                "must lie in [0,1]");
  require_range(g.shingle_len >= 1, "cluster.shingle_len", "must be >= 1");
  require_range(g.rare_shingle_df_cap >= 2, "cluster.rare_shingle_df_cap", "must be >= 2");
  require_range(c.cluster.runs >= 1, "cluster.runs", "must be >= 1");
  require_range(c.cluster.consensus_threshold > 0.0 && c.cluster.consensus_threshold <= 1.0,
                "cluster.consensus_threshold", "must lie in (0,1]");
  require_range(c.sample_ratio > 0.0, "sample.ratio", "must be > 0");
  const auto& b = c.buckets.lower_bounds;
  require_range(!b.empty() && b.front() == 1 && std::is_sorted(b.begin(), b.end()) &&
                    std::adjacent_find(b.begin(), b.end()) == b.end(),
                "sample.buckets", "must start at 1 and strictly increase");
  require_range(c.alpha > 0.0 && c.alpha < 1.0, "bias.alpha", "must lie in (0,1)");
  require_range(c.eval.train.lambda >= 0.0, "model.lambda", "must be >= 0");
  require_range(c.eval.train.epochs >= 1, "model.epochs", "must be >= 1");
  require_range(c.eval.train.learning_rate > 0.0, "model.learning_rate", "must be > 0");
  require_range(c.eval.train.tolerance >= 0.0, "model.tolerance", "must be >= 0");
  require_range(c.eval.vocabulary.min_df >= 1, "model.min_df", "must be >= 1");
  require_range(c.eval.vocabulary.max_size >= 1, "model.max_vocabulary", "must be >= 1");
  require_range(c.eval.top_k >= 1, "model.top_k", "must be >= 1");
  require_range(c.folds >= 2, "eval.folds", "must be >= 2");
  require_range(c.fold_retries >= 0, "eval.max_retries", "must be >= 0");
  require_range(!c.paths.out.empty(), "paths.out", "required");
}

}  // namespace

void validate(const PipelineConfig& config, Stage stage) {
  validate_ranges(config);
  switch (stage) {
    case Stage::synth: {
      auto s = config.synth;
      s.seed = config.seed;
      try {
        s.validate();
      } catch (const ConfigError& e) {
        throw ConfigError("synth." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
      }
      break;
    }
    case Stage::ingest:
      require_file(config, "paths.corpus", config.paths.corpus, false);
      require_file(config, "paths.gazetteer", config.paths.gazetteer, true);
      break;
    case Stage::diagnose:
      if (config.table2) break;
      [[fallthrough]];
    case Stage::sample:
      require_file(config, "paths.labels", config.paths.labels, false);
      require_file(config, "paths.label_clusters", config.paths.label_clusters, true);
      break;
    case Stage::train:
    case Stage::evaluate:
      require_file(config, "paths.lexicon", config.paths.lexicon, true);
      break;
    case Stage::indicators:
      require_file(config, "paths.rules", config.paths.rules, true);
      break;
    case Stage::cluster:
      break;
  }
}

namespace {

// Artifact names, relative to paths.out.
constexpr const char* kCorpus = "corpus.jsonl";
constexpr const char* kClusters = "clusters.csv";
constexpr const char* kLabeled = "labeled.csv";
constexpr const char* kLabeledClusters = "labeled_clusters.csv";
constexpr const char* kModel = "model.json";

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

fs::path artifact(const PipelineConfig& c, const char* name, Stage producer) {
  fs::path p = c.paths.out / name;
  if (!fs::is_regular_file(p)) {
    throw IoError("missing " + p.string() + "; run `" + std::string(to_string(producer)) +
                  "` first");
  }
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

Corpus load_corpus(const PipelineConfig& c) {
  return ingest(artifact(c, kCorpus, Stage::ingest), {}).corpus;
}

Clustering load_clusters(const PipelineConfig& c) {
  return read_clustering(artifact(c, kClusters, Stage::cluster));
}

// Keeps only members present in the corpus; drops clusters left empty.
Clustering restrict_to(const Clustering& clustering, const Corpus& corpus) {
  Clustering out;
  for (const auto& cl : clustering.clusters) {
    Cluster kept{cl.id, {}};
    for (const auto& m : cl.members) {
      if (corpus.find(m)) kept.members.push_back(m);
    }
    if (!kept.members.empty()) out.clusters.push_back(std::move(kept));
  }
  return out;
}

struct ExpertLabels {
  std::vector<LabeledCluster> labeled;
  std::size_t positives = 0;
  std::size_t dropped = 0;  // labels naming clusters absent from this corpus
};

ExpertLabels load_expert(const PipelineConfig& c, const Corpus& corpus,
                         const Clustering& discovered) {
  auto records = read_labels(c.resolve(c.paths.labels));
  Clustering reference = c.paths.label_clusters.empty()
                             ? discovered
                             : restrict_to(read_clustering(c.resolve(c.paths.label_clusters)), corpus);
  std::set<std::string> known;
  for (const auto& cl : reference.clusters) known.insert(cl.id);
  ExpertLabels out;
  std::vector<LabelRecord> usable;
  for (const auto& r : records) {
    if (known.count(r.cluster_id)) {
      usable.push_back(r);
    } else if (!c.paths.label_clusters.empty()) {
      ++out.dropped;  // cluster vanished under ingest.limit
    } else {
      usable.push_back(r);  // let attach_labels report it
    }
  }
  out.labeled = attach_labels(usable, reference);
  for (auto& l : out.labeled) {
    if (l.label == Label::positive) ++out.positives;
  }
  require_disjoint(out.labeled);
  if (out.positives == 0) throw InputError("no positive labels in " + c.paths.labels);
  return out;
}

// Discovered clusters that may not be sampled: labeled ones and any sharing a
// document with a labeled cluster.
std::set<std::string> excluded_clusters(const Clustering& discovered,
                                        const std::vector<LabeledCluster>& labeled) {
  std::set<std::string> docs;
  std::set<std::string> ids;
  for (const auto& l : labeled) {
    ids.insert(l.cluster.id);
    docs.insert(l.cluster.members.begin(), l.cluster.members.end());
  }
  std::set<std::string> out;
  for (const auto& cl : discovered.clusters) {
    if (ids.count(cl.id)) {
      out.insert(cl.id);
      continue;
    }
    for (const auto& m : cl.members) {
      if (docs.count(m)) {
        out.insert(cl.id);
        break;
      }
    }
  }
  return out;
}

std::size_t negatives_needed(const PipelineConfig& c, const ExpertLabels& expert) {
  const auto target = static_cast<std::size_t>(
      std::llround(c.sample_ratio * static_cast<double>(expert.positives)));
  const std::size_t have = expert.labeled.size() - expert.positives;
  return target > have ? target - have : 0;
}

std::vector<LabeledCluster> load_labeled(const PipelineConfig& c) {
  const auto labels = read_labels(artifact(c, kLabeled, Stage::sample));
  const auto clusters = read_clustering(artifact(c, kLabeledClusters, Stage::sample));
  auto labeled = attach_labels(labels, clusters);
  require_disjoint(labeled);
  return labeled;
}

Corpus training_corpus(const PipelineConfig& c) {
  Corpus corpus = load_corpus(c);
  if (!c.paths.lexicon.empty()) corpus = remove_tokens(corpus, load_lexicon(c.resolve(c.paths.lexicon)));
  return corpus;
}

EvalConfig eval_config(const PipelineConfig& c) {
  EvalConfig e = c.eval;
  e.train.seed = c.seed;
  e.recheck_features = c.grouped(c.bias_features);
  e.alpha = c.alpha;
  return e;
}

std::string run_synth(const PipelineConfig& c) {
  auto s = c.synth;
  s.seed = c.seed;
  const auto data = synth::generate(s);
  const fs::path dir = c.paths.out / "synth";
  synth::write_synth(data, dir);
  return std::to_string(data.corpus.size()) + " documents in " +
         std::to_string(data.truth.clusters.size()) + " clusters (" +
         std::to_string(data.positives().size()) + " positive) -> " + dir.string();
}

std::string run_ingest(const PipelineConfig& c) {
  IngestOptions opts;
  if (c.ingest_limit > 0) opts.limit = c.ingest_limit;
  Gazetteer gazetteer;
  if (!c.paths.gazetteer.empty()) {
    gazetteer = Gazetteer(load_lexicon(c.resolve(c.paths.gazetteer)));
    opts.gazetteer = &gazetteer;
  }
  const auto result = ingest(c.resolve(c.paths.corpus), opts);
  fs::create_directories(c.paths.out);
  write_corpus(result.corpus, c.paths.out / kCorpus);
  write_json(c.paths.out / "ingest_summary.json",
             {{"documents", result.corpus.size()},
              {"lines", result.lines},
              {"skipped", result.skipped}});
  return std::to_string(result.corpus.size()) + " documents, " + std::to_string(result.skipped) +
         " skipped -> " + (c.paths.out / kCorpus).string();
}

std::string run_cluster(const PipelineConfig& c) {
  const Corpus corpus = load_corpus(c);
  auto cfg = c.cluster;
  cfg.seed = c.seed;
  const auto result = cluster_corpus(corpus, cfg);
  write_clustering(result.clustering, c.paths.out / kClusters);
  write_graph(result.graph, c.paths.out / "graph.csv");
  std::size_t largest = 0;
  std::size_t singletons = 0;
  for (const auto& cl : result.clustering.clusters) {
    largest = std::max(largest, cl.members.size());
    if (cl.members.size() == 1) ++singletons;
  }
  write_json(c.paths.out / "cluster_summary.json",
             {{"documents", corpus.size()},
              {"edges", result.graph.edges().size()},
              {"clusters", result.clustering.clusters.size()},
              {"singletons", singletons},
              {"largest", largest},
              {"cost_before_refine", result.cost_before_refine},
              {"cost", result.cost}});
  return std::to_string(result.clustering.clusters.size()) + " clusters from " +
         std::to_string(result.graph.edges().size()) + " edges, disagreement cost " +
         std::to_string(result.cost);
}

std::string describe(const BiasReport& report) {
  std::string out;
  for (const auto& f : report.features) {
    const auto& r = report.results.at(f);
    if (!out.empty()) out += "; ";
    out += f + " p=" + fmt("%.3g", r.p_value) + (r.rejected ? " (biased)" : "");
  }
  return out;
}

std::string run_diagnose(const PipelineConfig& c) {
  fs::create_directories(c.paths.out);
  if (c.table2) {
    const auto table = synth::table2_fixture();
    BiasReport report;
    report.features = {"domain"};
    report.results.emplace("domain", chi_squared_test(table, c.alpha));
    report.tables.emplace("domain", table);
    if (report.results.at("domain").rejected) report.flagged = {"domain"};
    write_bias_report(report, c.paths.out / "table2_report.txt", c.paths.out / "table2_summary.csv");
    const auto& r = report.results.at("domain");
    return "table2 domain x class chi2=" + fmt("%.2f", r.statistic) + " df=" +
           std::to_string(*r.degrees_of_freedom) + " p=" + fmt("%.3g", r.p_value) +
           (r.p_value < 1e-5 ? " (< 1e-5)" : "") + (r.rejected ? ", dependent" : ", independent");
  }
  const Corpus corpus = load_corpus(c);
  const Clustering discovered = load_clusters(c);
  auto expert = load_expert(c, corpus, discovered);
  auto labeled = expert.labeled;
  // Baseline: what an unconditioned draw of negatives would look like.
  const auto extra = random_negatives(discovered, excluded_clusters(discovered, labeled),
                                      negatives_needed(c, expert), c.seed);
  labeled.insert(labeled.end(), extra.begin(), extra.end());
  const auto report = audit(corpus, labeled, c.grouped(c.bias_features), c.alpha, c.correction);
  write_bias_report(report, c.paths.out / "diagnose_report.txt",
                    c.paths.out / "diagnose_summary.csv");
  return std::to_string(report.flagged.size()) + " of " + std::to_string(report.features.size()) +
         " features biased under random negatives: " + describe(report);
}

std::string run_sample(const PipelineConfig& c) {
  const Corpus corpus = load_corpus(c);
  const Clustering discovered = load_clusters(c);
  auto expert = load_expert(c, corpus, discovered);
  const auto exclude = excluded_clusters(discovered, expert.labeled);
  const std::size_t n = negatives_needed(c, expert);
  std::vector<LabeledCluster> positives;
  for (const auto& l : expert.labeled) {
    if (l.label == Label::positive) positives.push_back(l);
  }
  std::vector<LabeledCluster> negatives;
  std::ostringstream report;
  report << "method: " << method_name(c.sample_method) << "\n"
         << "expert positives: " << expert.positives << "\n"
         << "expert negatives: " << expert.labeled.size() - expert.positives << "\n"
         << "sampled negatives: " << n << "\n";
  if (expert.dropped) report << "labels dropped (clusters outside corpus): " << expert.dropped << "\n";
  if (c.sample_method == SampleMethod::conditioned) {
    const auto features = c.grouped(c.sample_features);
    auto sample = conditioned_negatives(discovered, corpus, positives, features, c.buckets, n,
                                        c.seed, exclude);
    negatives = std::move(sample.negatives);
    report << "\nstratum,quota,drawn\n";
    for (const auto& s : sample.plan.strata) {
      const auto q = sample.quotas.count(s) ? sample.quotas.at(s) : 0;
      report << s << "," << q << "," << sample.plan.target.at(s) << "\n";
    }
    for (const auto& [s, d] : sample.deficits) {
      report << "deficit " << s << ": " << d << " moved to other strata\n";
    }
  } else {
    negatives = random_negatives(discovered, exclude, n, c.seed);
  }
  auto labeled = expert.labeled;
  labeled.insert(labeled.end(), negatives.begin(), negatives.end());
  require_disjoint(labeled);
  std::vector<LabeledCluster> all_negatives;
  for (const auto& l : labeled) {
    if (l.label == Label::negative) all_negatives.push_back(l);
  }
  const auto alignment =
      verify_alignment(corpus, positives, all_negatives, c.grouped(c.bias_features), c.alpha);
  report << "\n" << format_bias_report(alignment);

  write_labels(negatives, c.paths.out / "negatives.csv");
  write_labels(labeled, c.paths.out / kLabeled);
  Clustering members;
  for (const auto& l : labeled) members.clusters.push_back(l.cluster);
  write_clustering(members, c.paths.out / kLabeledClusters);
  write_text(c.paths.out / "sample_report.txt", report.str());
  write_bias_report(alignment, c.paths.out / "sample_alignment.txt",
                    c.paths.out / "sample_summary.csv");
  return std::to_string(negatives.size()) + " " + std::string(method_name(c.sample_method)) +
         " negatives for " + std::to_string(expert.positives) + " positives; " +
         describe(alignment);
}

std::string run_train(const PipelineConfig& c) {
  const Corpus corpus = training_corpus(c);
  const auto labeled = load_labeled(c);
  const auto cfg = eval_config(c);
  const RiskModel model = fit(labeled, corpus, cfg);
  save_model(model, c.paths.out / kModel);

  std::ostringstream fi;
  fi << "rank,token,weight\n";
  const auto top = feature_importance(model, cfg.top_k);
  for (std::size_t i = 0; i < top.size(); ++i) {
    fi << i + 1 << "," << csv::escape(top[i].first) << "," << csv::number(top[i].second) << "\n";
  }
  write_text(c.paths.out / "feature_importance.csv", fi.str());

  // Rank every discovered cluster by risk.
  const Clustering discovered = restrict_to(load_clusters(c), corpus);
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& cl : discovered.clusters) {
    ranked.emplace_back(score_cluster(model, cl, corpus, cfg.aggregation), cl.id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::ostringstream sc;
  sc << "cluster_id,score\n";
  for (const auto& [s, id] : ranked) sc << csv::escape(id) << "," << csv::number(s) << "\n";
  write_text(c.paths.out / "cluster_scores.csv", sc.str());

  write_json(c.paths.out / "train_summary.json",
             {{"labeled_clusters", labeled.size()},
              {"vocabulary", model.vocabulary.size()},
              {"epochs_run", model.metadata.epochs_run},
              {"final_objective", model.metadata.final_objective},
              {"seed", model.metadata.seed}});
  std::string head = top.empty() ? "none" : top.front().first;
  return "model on " + std::to_string(labeled.size()) + " clusters, vocabulary " +
         std::to_string(model.vocabulary.size()) + ", top feature '" + head + "' -> " +
         (c.paths.out / kModel).string();
}

std::string run_evaluate(const PipelineConfig& c) {
  const Corpus corpus = training_corpus(c);
  const auto labeled = load_labeled(c);
  FoldConfig fc;
  fc.k = c.folds;
  fc.features = c.grouped(c.fold_features);
  fc.buckets = c.buckets;
  fc.alpha = c.alpha;
  fc.seed = c.seed;
  fc.max_retries = c.fold_retries;
  const FoldPlan plan = make_folds(labeled, corpus, fc);
  require_leak_free(plan, labeled);
  const auto report = cross_validate(labeled, plan, corpus, eval_config(c));
  write_eval_report(report, plan, c.paths.out);
  std::ostringstream folds;
  folds << "cluster_id,fold\n";
  for (const auto& [id, f] : plan.assignment) folds << csv::escape(id) << "," << f << "\n";
  write_text(c.paths.out / "folds.csv", folds.str());
  std::string out = "pooled AUC " + fmt("%.4f", report.auc) + " over " + std::to_string(plan.k) +
                    " folds" + (plan.homogeneous() ? "" : " (folds not homogeneous)");
  if (report.bias_recheck) out += "; recheck: " + describe(*report.bias_recheck);
  return out;
}

std::string run_indicators(const PipelineConfig& c) {
  if (c.paths.rules.empty()) return "no rules configured";
  const Corpus corpus = load_corpus(c);
  const Clustering discovered = load_clusters(c);
  const RuleSet rules(load_rules(c.resolve(c.paths.rules)));
  std::ostringstream out;
  out << "cluster_id,size";
  for (const auto& r : rules.rules()) out << "," << csv::escape(r.name);
  out << "\n";
  std::map<std::string, std::size_t> hits;
  for (const auto& cl : discovered.clusters) {
    const auto result = apply_indicators(cl, corpus, rules);
    out << csv::escape(cl.id) << "," << cl.members.size();
    for (const auto& r : rules.rules()) {
      const bool h = result.at(r.name);
      out << "," << (h ? 1 : 0);
      if (h) ++hits[r.name];
    }
    out << "\n";
  }
  write_text(c.paths.out / "indicators.csv", out.str());
  json summary = json::object();
  std::string line;
  for (const auto& r : rules.rules()) {
    summary[r.name] = hits[r.name];
    if (!line.empty()) line += ", ";
    line += r.name + " " + std::to_string(hits[r.name]);
  }
  write_json(c.paths.out / "indicators_summary.json", summary);
  return std::to_string(discovered.clusters.size()) + " clusters: " + (line.empty() ? "no rules" : line);
}

}  // namespace

std::string run_stage(const PipelineConfig& config, Stage stage) {
  validate(config, stage);
  switch (stage) {
    case Stage::synth: return run_synth(config);
    case Stage::ingest: return run_ingest(config);
    case Stage::cluster: return run_cluster(config);
    case Stage::diagnose: return run_diagnose(config);
    case Stage::sample: return run_sample(config);
    case Stage::train: return run_train(config);
    case Stage::evaluate: return run_evaluate(config);
    case Stage::indicators: return run_indicators(config);
  }
  return {};
}

}  // namespace riskscore
