#include "riskscore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "riskscore/error.hpp"
#include "riskscore/random.hpp"

namespace riskscore::synth {

namespace {

void require_probability(double p, const std::string& field) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "must lie in [0,1]");
}

void validate_bias(const FeatureBias& bias, const std::string& field) {
  if (bias.values.empty()) throw ConfigError(field + ".values", "needs at least one value");
  if (bias.base.size() != bias.values.size()) {
    throw ConfigError(field + ".base", "needs one proportion per value");
  }
  double total = 0.0;
  for (double b : bias.base) {
    require_probability(b, field + ".base");
    total += b;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(field + ".base", "must sum to 1");
  require_probability(bias.beta, field + ".beta");
  require_probability(bias.purity, field + ".purity");
}

// Background vocabulary: "w" followed by three letters, so it never collides
// with digits, signals or proxies.
std::string background_word(std::size_t i) {
  std::string w = "w";
  w.push_back(static_cast<char>('a' + (i / 676) % 26));
  w.push_back(static_cast<char>('a' + (i / 26) % 26));
  w.push_back(static_cast<char>('a' + i % 26));
  return w;
}

// Low-discrepancy allocation: the value whose document share falls furthest
// below target after adding this cluster.
struct ShareTracker {
  std::vector<double> target;
  std::vector<double> count;
  double total = 0.0;

  explicit ShareTracker(std::vector<double> t) : target(std::move(t)), count(target.size(), 0.0) {}

  std::size_t assign(std::size_t size) {
    const double after = total + static_cast<double>(size);
    std::size_t best = 0;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < target.size(); ++g) {
      const double gap = target[g] * after - count[g];
      if (gap > best_gap) {
        best_gap = gap;
        best = g;
      }
    }
    count[best] += static_cast<double>(size);
    total = after;
    return best;
  }
};

std::vector<double> positive_target(const FeatureBias& bias) {
  std::vector<double> t(bias.base.size());
  for (std::size_t g = 0; g < t.size(); ++g) {
    t[g] = (1.0 - bias.beta) * bias.base[g] + (g == 0 ? bias.beta : 0.0);
  }
  return t;
}

std::string format_phone(std::uint64_t digits) {
  char buf[48];
  const auto area = digits / 10000000ULL;
  const auto exchange = (digits / 10000ULL) % 1000ULL;
  const auto line = digits % 10000ULL;
  std::snprintf(buf, sizeof buf, "%03llu-%03llu-%04llu", static_cast<unsigned long long>(area),
                static_cast<unsigned long long>(exchange), static_cast<unsigned long long>(line));
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_clusters < 2) throw ConfigError("num_clusters", "must be >= 2");
  require_probability(positive_fraction, "positive_fraction");
  const auto n_pos = static_cast<std::size_t>(
      std::llround(positive_fraction * static_cast<double>(num_clusters)));
  if (n_pos < 1 || n_pos >= num_clusters) {
    throw ConfigError("positive_fraction", "must leave at least one cluster per class");
  }
  if (!(size_p > 0.0 && size_p <= 1.0)) throw ConfigError("size_p", "must lie in (0,1]");
  if (max_cluster_size < 1) throw ConfigError("max_cluster_size", "must be >= 1");
  if (vocabulary_size < 1 || vocabulary_size > 17576) {
    throw ConfigError("vocabulary_size", "must lie in [1, 17576]");
  }
  if (tokens_per_doc < 1) throw ConfigError("tokens_per_doc", "must be >= 1");
  for (const auto& s : signal_tokens) {
    if (s.token.empty()) throw ConfigError("signal_tokens", "empty token");
    require_probability(s.p_positive, "signal_tokens." + s.token + ".p_positive");
    require_probability(s.p_negative, "signal_tokens." + s.token + ".p_negative");
  }
  validate_bias(domain, "domain");
  validate_bias(location, "location");
  require_probability(domain_proxy_rate, "domain_proxy_rate");
  require_probability(location_mention_rate, "location_mention_rate");
  require_probability(phone_in_text_rate, "phone_in_text_rate");
  require_probability(duplication_rate, "duplication_rate");
}

std::string proxy_token(const std::string& domain) {
  std::string label = domain.substr(0, domain.find('.'));
  std::string out;
  for (char c : label) {
    if (c >= 'a' && c <= 'z') out.push_back(c);
    if (c >= 'A' && c <= 'Z') out.push_back(static_cast<char>(c - 'A' + 'a'));
  }
  return out;
}

std::vector<LabeledCluster> SynthData::positives() const {
  std::vector<LabeledCluster> out;
  for (const auto& l : labels) {
    if (l.label == Label::positive) out.push_back(l);
  }
  return out;
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.num_clusters;
  const auto n_pos =
      static_cast<std::size_t>(std::llround(config.positive_fraction * static_cast<double>(n)));

  std::vector<Label> labels(n, Label::negative);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), Label::positive);
  rng.shuffle(std::span<Label>(labels));

  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) {
    s = 1;
    while (s < config.max_cluster_size && !rng.bernoulli(config.size_p)) ++s;
  }

  auto primaries = [&](const FeatureBias& bias) {
    ShareTracker pos(positive_target(bias));
    ShareTracker neg(bias.base);
    std::vector<std::size_t> out(n);
    for (std::size_t c = 0; c < n; ++c) {
      out[c] = (labels[c] == Label::positive ? pos : neg).assign(sizes[c]);
    }
    return out;
  };
  const auto domain_of = primaries(config.domain);
  const auto location_of = primaries(config.location);

  std::vector<std::string> vocab(config.vocabulary_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = background_word(i);

  struct Pending {
    Document doc;
    std::size_t cluster;
  };
  std::vector<Pending> pending;
  std::vector<std::vector<std::string>> texts(n);
  const auto base_day = std::chrono::sys_days{std::chrono::year{2016} / 1 / 1};

  for (std::size_t c = 0; c < n; ++c) {
    const bool positive = labels[c] == Label::positive;
    // Unique per cluster: 555 area code, serial in the remaining seven digits.
    const std::uint64_t phone_digits = 5550000000ULL + 1000000ULL + c;
    const std::string phone = std::to_string(phone_digits);
    const auto start = base_day + std::chrono::days{static_cast<long>(rng.below(350))};

    std::vector<bool> cluster_signals(config.signal_tokens.size(), false);
    for (std::size_t s = 0; s < config.signal_tokens.size(); ++s) {
      const auto& sig = config.signal_tokens[s];
      cluster_signals[s] = rng.bernoulli(positive ? sig.p_positive : sig.p_negative);
    }

    for (std::size_t j = 0; j < sizes[c]; ++j) {
      Document doc;
      const std::size_t d = config.domain.values.size();
      const std::size_t domain_idx =
          rng.bernoulli(config.domain.purity) ? domain_of[c] : static_cast<std::size_t>(rng.below(d));
      doc.source_domain = config.domain.values[domain_idx];
      const std::size_t l = config.location.values.size();
      const std::size_t loc_idx = rng.bernoulli(config.location.purity)
                                      ? location_of[c]
                                      : static_cast<std::size_t>(rng.below(l));
      const std::string& location = config.location.values[loc_idx];
      doc.locations = {location};
      doc.phones = {phone};
      doc.posted_date = std::chrono::year_month_day{start + std::chrono::days{static_cast<long>(rng.below(14))}};

      std::string body;
      if (j > 0 && rng.bernoulli(config.duplication_rate)) {
        body = texts[c][static_cast<std::size_t>(rng.below(j))];
      } else {
        std::vector<std::string> words;
        words.reserve(config.tokens_per_doc + 8);
        for (std::size_t t = 0; t < config.tokens_per_doc; ++t) {
          words.push_back(vocab[static_cast<std::size_t>(rng.below(vocab.size()))]);
        }
        auto insert = [&](std::string w) {
          const auto at = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
          words.insert(words.begin() + at, std::move(w));
        };
        for (std::size_t s = 0; s < config.signal_tokens.size(); ++s) {
          const auto& sig = config.signal_tokens[s];
          const bool on = config.cluster_level_signals
                              ? cluster_signals[s]
                              : rng.bernoulli(positive ? sig.p_positive : sig.p_negative);
          if (on) insert(sig.token);
        }
        if (rng.bernoulli(config.domain_proxy_rate)) insert(proxy_token(doc.source_domain));
        if (rng.bernoulli(config.location_mention_rate)) insert(location);
        for (std::size_t w = 0; w < words.size(); ++w) {
          if (w) body.push_back(' ');
          body += words[w];
        }
        if (rng.bernoulli(config.phone_in_text_rate)) body += " call " + format_phone(phone_digits);
      }
      texts[c].push_back(body);
      doc.text = body;
      pending.push_back({std::move(doc), c});
    }
  }

  rng.shuffle(std::span<Pending>(pending));
  SynthData data;
  data.truth.clusters.resize(n);
  for (std::size_t c = 0; c < n; ++c) data.truth.clusters[c].id = "g" + std::to_string(c);
  std::vector<Document> docs;
  docs.reserve(pending.size());
  char id[32];
  for (std::size_t i = 0; i < pending.size(); ++i) {
    std::snprintf(id, sizeof id, "doc%07zu", i);
    pending[i].doc.id = id;
    data.truth.clusters[pending[i].cluster].members.push_back(id);
    docs.push_back(std::move(pending[i].doc));
  }
  data.corpus = Corpus(std::move(docs));
  for (std::size_t c = 0; c < n; ++c) {
    data.labels.push_back({data.truth.clusters[c], labels[c], LabelSource::expert});
  }
  for (const auto& d : config.domain.values) data.proxy_lexicon.insert(proxy_token(d));
  data.location_lexicon.insert(config.location.values.begin(), config.location.values.end());
  for (const auto& s : config.signal_tokens) data.signal_lexicon.insert(s.token);
  return data;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_corpus(data.corpus, dir / "corpus.jsonl");
  write_clustering(data.truth, dir / "truth_clusters.csv");
  write_labels(data.labels, dir / "truth_labels.csv");
  write_labels(data.positives(), dir / "labels.csv");
  auto write_lines = [&](const std::filesystem::path& path, const std::set<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
  };
  write_lines(dir / "gazetteer.txt", data.location_lexicon);
  std::set<std::string> lexicon = data.proxy_lexicon;
  lexicon.insert(data.location_lexicon.begin(), data.location_lexicon.end());
  write_lines(dir / "lexicon.txt", lexicon);
  write_lines(dir / "signals.txt", data.signal_lexicon);

  std::ofstream rules(dir / "rules.jsonl", std::ios::binary);
  if (!rules) throw IoError("cannot write " + (dir / "rules.jsonl").string());
  rules << R"({"name": "movement", "scope": "cluster", "kind": "distinct_locations", "k": 2})" << '\n'
        << R"({"name": "shared_phones", "scope": "cluster", "kind": "distinct_phones", "k": 2})" << '\n'
        << R"({"name": "signal_terms", "scope": "cluster", "kind": "lexicon", "lexicon": "signals.txt", "k": 3})" << '\n'
        << R"({"name": "phone_in_text", "scope": "document", "kind": "pattern", "pattern": "[0-9]{3}-[0-9]{3}-[0-9]{4}"})" << '\n';
}

ContingencyTable table2_fixture() {
  return ContingencyTable({"backpage.com", "other"}, {"positive", "negative"},
                          {{165686, 125467}, {155271, 154627}});
}

Table2Corpus table2_corpus() {
  const auto table = table2_fixture();
  const std::vector<std::string> domains = {"backpage.com", "other.example"};
  constexpr std::size_t kClusterSize = 1000;
  Table2Corpus out;
  std::vector<Document> docs;
  docs.reserve(table.total());
  std::size_t next_id = 0;
  std::size_t next_cluster = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      const Label label = c == 0 ? Label::positive : Label::negative;
      std::uint64_t remaining = table.counts()[r][c];
      while (remaining > 0) {
        const auto size = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kClusterSize));
        LabeledCluster lc;
        lc.cluster.id = "t" + std::to_string(next_cluster++);
        lc.label = label;
        lc.source = LabelSource::expert;
        for (std::size_t i = 0; i < size; ++i) {
          Document d;
          d.id = "a" + std::to_string(next_id++);
          d.source_domain = domains[r];
          d.text = "ad";
          lc.cluster.members.push_back(d.id);
          docs.push_back(std::move(d));
        }
        out.labeled.push_back(std::move(lc));
        remaining -= size;
      }
    }
  }
  out.corpus = Corpus(std::move(docs));
  out.feature.attribute = "domain";
  out.feature.grouping.groups = {{"backpage.com", "backpage.com"}};
  out.feature.grouping.fallback = "other";
  return out;
}

}  // namespace riskscore::synth
