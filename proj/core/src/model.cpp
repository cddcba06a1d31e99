#include "riskscore/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <unordered_set>

#include "riskscore/error.hpp"
#include "riskscore/text.hpp"

namespace riskscore {

using nlohmann::json;

SparseVector::SparseVector(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  for (const auto& e : entries) {
    if (!entries_.empty() && entries_.back().first == e.first) {
      entries_.back().second += e.second;
    } else {
      entries_.push_back(e);
    }
  }
  std::erase_if(entries_, [](const Entry& e) { return e.second == 0.0; });
}

double SparseVector::get(std::uint32_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const Entry& e, std::uint32_t i) { return e.first < i; });
  return (it != entries_.end() && it->first == index) ? it->second : 0.0;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second * e.second;
  return std::sqrt(s);
}

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& [i, w] : entries_) {
    if (i < dense.size()) s += w * dense[i];
  }
  return s;
}

SparseVector SparseVector::normalized() const {
  const double n = norm();
  if (n == 0.0) return {};
  std::vector<Entry> scaled = entries_;
  for (auto& e : scaled) e.second /= n;
  return SparseVector(std::move(scaled));
}

SparseVector normalized_mean(std::span<const SparseVector> vectors) {
  if (vectors.empty()) return {};
  std::vector<SparseVector::Entry> all;
  for (const auto& v : vectors) all.insert(all.end(), v.entries().begin(), v.entries().end());
  const double k = static_cast<double>(vectors.size());
  for (auto& e : all) e.second /= k;
  return SparseVector(std::move(all)).normalized();
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> df,
                       std::set<int> orders, std::size_t num_docs, VocabularyConfig config)
    : tokens_(std::move(tokens)),
      df_(std::move(df)),
      orders_(std::move(orders)),
      num_docs_(num_docs),
      config_(std::move(config)) {
  if (df_.size() != tokens_.size()) throw InputError("vocabulary df size mismatch");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i > 0 && !(tokens_[i - 1] < tokens_[i])) {
      throw InputError("vocabulary tokens must be sorted and unique");
    }
    index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
  }
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Vocabulary::features_of(std::string_view s) const {
  const auto tokens = text::tokenize(s);
  std::vector<std::string> out;
  for (int order : orders_) {
    auto grams = text::ngrams(tokens, order);
    out.insert(out.end(), std::make_move_iterator(grams.begin()),
               std::make_move_iterator(grams.end()));
  }
  return out;
}

bool Vocabulary::operator==(const Vocabulary& other) const {
  return tokens_ == other.tokens_ && df_ == other.df_ && orders_ == other.orders_ &&
         num_docs_ == other.num_docs_ && config_.min_df == other.config_.min_df &&
         config_.max_size == other.config_.max_size && config_.orders == other.config_.orders;
}

Vocabulary build_vocabulary(std::span<const std::string> texts, const VocabularyConfig& config) {
  if (texts.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
  if (config.orders.empty()) throw InputError("vocabulary needs at least one n-gram order");
  for (int o : config.orders) {
    if (o < 1 || o > 3) throw InputError("n-gram orders must lie in {1,2,3}");
  }
  if (config.min_df < 1) throw InputError("min_df must be >= 1");

  std::unordered_map<std::string, std::size_t> df;
  std::unordered_set<std::string> seen;
  for (const auto& t : texts) {
    seen.clear();
    const auto tokens = text::tokenize(t);
    for (int order : config.orders) {
      for (auto& gram : text::ngrams(tokens, order)) {
        if (seen.insert(gram).second) ++df[gram];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : df) {
    if (count >= config.min_df) kept.emplace_back(token, count);
  }
  if (kept.size() > config.max_size) {
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    kept.resize(config.max_size);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<std::string> tokens;
  std::vector<std::size_t> freq;
  tokens.reserve(kept.size());
  freq.reserve(kept.size());
  for (auto& [token, count] : kept) {
    tokens.push_back(std::move(token));
    freq.push_back(count);
  }
  return Vocabulary(std::move(tokens), std::move(freq), config.orders, texts.size(), config);
}

Vocabulary build_vocabulary(std::span<const Document> docs, const VocabularyConfig& config) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text);
  return build_vocabulary(std::span<const std::string>(texts), config);
}

SparseVector vectorize_document(std::string_view s, const Vocabulary& vocab, Weighting weighting) {
  std::vector<SparseVector::Entry> entries;
  for (const auto& gram : vocab.features_of(s)) {
    if (auto idx = vocab.index_of(gram)) entries.emplace_back(*idx, 1.0);
  }
  SparseVector counts(std::move(entries));
  if (weighting == Weighting::tfidf) {
    std::vector<SparseVector::Entry> weighted = counts.entries();
    const double n = static_cast<double>(vocab.num_docs());
    for (auto& [i, w] : weighted) {
      const double df = static_cast<double>(vocab.df(i));
      w *= std::log((1.0 + n) / (1.0 + df)) + 1.0;
    }
    counts = SparseVector(std::move(weighted));
  }
  return counts.normalized();
}

SparseVector vectorize_cluster(const Cluster& cluster, const Corpus& corpus,
                               const Vocabulary& vocab, Weighting weighting) {
  std::vector<SparseVector> members;
  members.reserve(cluster.members.size());
  for (const auto& m : cluster.members) {
    const Document* doc = corpus.find(m);
    if (!doc) throw InputError("cluster member '" + m + "' not in corpus");
    members.push_back(vectorize_document(doc->text, vocab, weighting));
  }
  return normalized_mean(members);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double label_sign(Label l) { return l == Label::positive ? 1.0 : -1.0; }

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double penalty_value(std::span<const double> w, const TrainConfig& config) {
  double p = 0.0;
  if (config.penalty == Penalty::l2) {
    for (double v : w) p += v * v;
    p *= 0.5;
  } else {
    for (double v : w) p += std::abs(v);
  }
  return config.lambda * p;
}

void check_examples(std::span<const Example> examples, std::size_t dimension) {
  for (const auto& ex : examples) {
    if (!ex.x.empty() && ex.x.entries().back().first >= dimension) {
      throw InputError("example index exceeds model dimension");
    }
  }
}

}  // namespace

double objective_value(std::span<const Example> examples, std::span<const double> weights,
                       double intercept, const TrainConfig& config) {
  if (examples.empty()) throw InputError("objective over an empty example set");
  double loss = 0.0;
  for (const auto& ex : examples) {
    const double ym = label_sign(ex.label) * (ex.x.dot(weights) + intercept);
    loss += config.loss == Loss::logistic ? softplus(-ym) : std::max(0.0, 1.0 - ym);
  }
  return loss / static_cast<double>(examples.size()) + penalty_value(weights, config);
}

ObjectiveGradient objective(std::span<const Example> examples, std::span<const double> weights,
                            double intercept, const TrainConfig& config) {
  if (examples.empty()) throw InputError("objective over an empty example set");
  ObjectiveGradient out;
  out.grad_weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  double loss = 0.0;
  for (const auto& ex : examples) {
    const double y = label_sign(ex.label);
    const double ym = y * (ex.x.dot(weights) + intercept);
    double dmargin;
    if (config.loss == Loss::logistic) {
      loss += softplus(-ym);
      dmargin = -y * sigmoid(-ym);
    } else {
      loss += std::max(0.0, 1.0 - ym);
      dmargin = ym < 1.0 ? -y : 0.0;
    }
    if (dmargin == 0.0) continue;
    for (const auto& [i, v] : ex.x.entries()) out.grad_weights[i] += inv_n * dmargin * v;
    out.grad_intercept += inv_n * dmargin;
  }
  out.value = loss * inv_n + penalty_value(weights, config);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (config.penalty == Penalty::l2) {
      out.grad_weights[i] += config.lambda * weights[i];
    } else if (weights[i] != 0.0) {
      out.grad_weights[i] += config.lambda * (weights[i] > 0 ? 1.0 : -1.0);
    }
  }
  return out;
}

LinearModel train_linear(std::span<const Example> examples, std::size_t dimension,
                         const TrainConfig& config) {
  if (examples.empty()) throw DegenerateTrainingError("no training examples");
  const bool has_pos = std::any_of(examples.begin(), examples.end(),
                                   [](const Example& e) { return e.label == Label::positive; });
  const bool has_neg = std::any_of(examples.begin(), examples.end(),
                                   [](const Example& e) { return e.label == Label::negative; });
  if (!has_pos || !has_neg) throw DegenerateTrainingError("training needs both classes");
  if (!(config.lambda >= 0.0)) throw InputError("lambda must be >= 0");
  if (!(config.learning_rate > 0.0)) throw InputError("learning rate must be > 0");
  check_examples(examples, dimension);

  LinearModel model;
  model.weights.assign(dimension, 0.0);
  model.metadata.seed = config.seed;
  double current = objective_value(examples, model.weights, model.intercept, config);
  double rate = config.learning_rate;
  std::vector<double> trial(dimension);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto g = objective(examples, model.weights, model.intercept, config);
    double next_value = 0.0;
    double next_intercept = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t i = 0; i < dimension; ++i) {
        trial[i] = model.weights[i] - rate * g.grad_weights[i];
      }
      next_intercept = model.intercept - rate * g.grad_intercept;
      next_value = objective_value(examples, trial, next_intercept, config);
      if (config.schedule == Schedule::constant || next_value <= current) {
        accepted = true;
        break;
      }
      rate *= 0.5;
    }
    if (!accepted) break;
    model.weights.swap(trial);
    model.intercept = next_intercept;
    const double improvement = current - next_value;
    current = next_value;
    model.metadata.objective_history.push_back(current);
    ++model.metadata.epochs_run;
    if (config.tolerance > 0.0 && config.schedule == Schedule::halving_on_increase &&
        improvement <= config.tolerance * std::max(1.0, std::abs(current))) {
      break;
    }
  }
  model.metadata.final_objective = current;
  return model;
}

double RiskModel::margin(const SparseVector& x) const { return x.dot(weights) + intercept; }

bool RiskModel::operator==(const RiskModel& o) const {
  return vocabulary == o.vocabulary && weighting == o.weighting && weights == o.weights &&
         intercept == o.intercept && config.loss == o.config.loss &&
         config.penalty == o.config.penalty && config.lambda == o.config.lambda &&
         config.epochs == o.config.epochs && config.learning_rate == o.config.learning_rate &&
         config.schedule == o.config.schedule && config.tolerance == o.config.tolerance &&
         config.seed == o.config.seed && metadata.epochs_run == o.metadata.epochs_run &&
         metadata.seed == o.metadata.seed && metadata.final_objective == o.metadata.final_objective &&
         metadata.objective_history == o.metadata.objective_history &&
         calibration_slope == o.calibration_slope && calibration_offset == o.calibration_offset;
}

RiskModel train(std::span<const Example> examples, const Vocabulary& vocab, Weighting weighting,
                const TrainConfig& config) {
  auto linear = train_linear(examples, vocab.size(), config);
  RiskModel model;
  model.vocabulary = vocab;
  model.weighting = weighting;
  model.weights = std::move(linear.weights);
  model.intercept = linear.intercept;
  model.config = config;
  model.metadata = std::move(linear.metadata);
  return model;
}

double score(const RiskModel& model, const SparseVector& x) {
  const double m = model.margin(x);
  if (model.config.loss == Loss::hinge) {
    return sigmoid(model.calibration_slope * m + model.calibration_offset);
  }
  return sigmoid(m);
}

double score_cluster_by_documents(const RiskModel& model, const Cluster& cluster,
                                  const Corpus& corpus) {
  if (cluster.members.empty()) throw InputError("cannot score an empty cluster");
  double total = 0.0;
  for (const auto& m : cluster.members) {
    const Document* doc = corpus.find(m);
    if (!doc) throw InputError("cluster member '" + m + "' not in corpus");
    total += score(model, vectorize_document(doc->text, model.vocabulary, model.weighting));
  }
  return total / static_cast<double>(cluster.members.size());
}

std::vector<std::pair<std::string, double>> feature_importance(const RiskModel& model,
                                                               std::size_t top_k) {
  std::vector<std::pair<std::string, double>> ranked;
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    if (model.weights[i] != 0.0) {
      ranked.emplace_back(model.vocabulary.token(static_cast<std::uint32_t>(i)), model.weights[i]);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    const double ma = std::abs(a.second);
    const double mb = std::abs(b.second);
    return ma != mb ? ma > mb : a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

std::string_view to_string(Loss loss) { return loss == Loss::logistic ? "logistic" : "hinge"; }
std::string_view to_string(Penalty penalty) { return penalty == Penalty::l2 ? "l2" : "l1"; }
std::string_view to_string(Schedule schedule) {
  return schedule == Schedule::halving_on_increase ? "halving" : "constant";
}
std::string_view to_string(Weighting weighting) {
  return weighting == Weighting::tf ? "tf" : "tfidf";
}

Loss parse_loss(std::string_view s) {
  if (s == "logistic") return Loss::logistic;
  if (s == "hinge") return Loss::hinge;
  throw InputError("unknown loss '" + std::string(s) + "'");
}
Penalty parse_penalty(std::string_view s) {
  if (s == "l2" || s == "L2") return Penalty::l2;
  if (s == "l1" || s == "L1") return Penalty::l1;
  throw InputError("unknown penalty '" + std::string(s) + "'");
}
Schedule parse_schedule(std::string_view s) {
  if (s == "halving" || s == "halving_on_increase") return Schedule::halving_on_increase;
  if (s == "constant") return Schedule::constant;
  throw InputError("unknown schedule '" + std::string(s) + "'");
}
Weighting parse_weighting(std::string_view s) {
  if (s == "tf") return Weighting::tf;
  if (s == "tfidf") return Weighting::tfidf;
  throw InputError("unknown weighting '" + std::string(s) + "'");
}

namespace {
constexpr int kModelVersion = 1;
}

std::string serialize_model(const RiskModel& model) {
  const auto& v = model.vocabulary;
  json weights = json::array();
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    if (model.weights[i] != 0.0) weights.push_back({i, model.weights[i]});
  }
  json doc = {
      {"format", "riskscore-model"},
      {"version", kModelVersion},
      {"dimension", model.weights.size()},
      {"weighting", to_string(model.weighting)},
      {"intercept", model.intercept},
      {"weights", weights},
      {"calibration", {{"slope", model.calibration_slope}, {"offset", model.calibration_offset}}},
      {"config",
       {{"loss", to_string(model.config.loss)},
        {"penalty", to_string(model.config.penalty)},
        {"lambda", model.config.lambda},
        {"epochs", model.config.epochs},
        {"learning_rate", model.config.learning_rate},
        {"schedule", to_string(model.config.schedule)},
        {"tolerance", model.config.tolerance},
        {"seed", model.config.seed}}},
      {"metadata",
       {{"epochs_run", model.metadata.epochs_run},
        {"seed", model.metadata.seed},
        {"final_objective", model.metadata.final_objective},
        {"objective_history", model.metadata.objective_history}}},
      {"vocabulary",
       {{"orders", v.orders()},
        {"min_df", v.config().min_df},
        {"max_size", v.config().max_size},
        {"num_docs", v.num_docs()},
        {"tokens", v.tokens()},
        {"df", v.df()}}},
  };
  return doc.dump(1) + "\n";
}

RiskModel deserialize_model(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "riskscore-model") throw InputError("not a model file");
    if (doc.at("version").get<int>() != kModelVersion) {
      throw InputError("unsupported model version " + doc.at("version").dump());
    }
    const auto& jv = doc.at("vocabulary");
    VocabularyConfig vc;
    vc.orders = jv.at("orders").get<std::set<int>>();
    vc.min_df = jv.at("min_df").get<std::size_t>();
    vc.max_size = jv.at("max_size").get<std::size_t>();
    RiskModel model;
    model.vocabulary = Vocabulary(jv.at("tokens").get<std::vector<std::string>>(),
                                  jv.at("df").get<std::vector<std::size_t>>(), vc.orders,
                                  jv.at("num_docs").get<std::size_t>(), vc);
    model.weighting = parse_weighting(doc.at("weighting").get<std::string>());
    model.intercept = doc.at("intercept").get<double>();
    model.weights.assign(doc.at("dimension").get<std::size_t>(), 0.0);
    for (const auto& w : doc.at("weights")) {
      const auto i = w.at(0).get<std::size_t>();
      if (i >= model.weights.size()) throw InputError("weight index out of range");
      model.weights[i] = w.at(1).get<double>();
    }
    model.calibration_slope = doc.at("calibration").at("slope").get<double>();
    model.calibration_offset = doc.at("calibration").at("offset").get<double>();
    const auto& jc = doc.at("config");
    model.config.loss = parse_loss(jc.at("loss").get<std::string>());
    model.config.penalty = parse_penalty(jc.at("penalty").get<std::string>());
    model.config.lambda = jc.at("lambda").get<double>();
    model.config.epochs = jc.at("epochs").get<int>();
    model.config.learning_rate = jc.at("learning_rate").get<double>();
    model.config.schedule = parse_schedule(jc.at("schedule").get<std::string>());
    model.config.tolerance = jc.at("tolerance").get<double>();
    model.config.seed = jc.at("seed").get<std::uint64_t>();
    const auto& jm = doc.at("metadata");
    model.metadata.epochs_run = jm.at("epochs_run").get<int>();
    model.metadata.seed = jm.at("seed").get<std::uint64_t>();
    model.metadata.final_objective = jm.at("final_objective").get<double>();
    model.metadata.objective_history = jm.at("objective_history").get<std::vector<double>>();
    return model;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const RiskModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_model(model);
  if (!out) throw IoError("write failed on " + path.string());
}

RiskModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace riskscore
