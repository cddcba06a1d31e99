#include "riskscore/indicators.hpp"

#include <fstream>
#include <json.hpp>
#include <unordered_set>

#include "riskscore/error.hpp"
#include "riskscore/text.hpp"

namespace riskscore {

using nlohmann::json;

std::string_view to_string(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::lexicon: return "lexicon";
    case PredicateKind::pattern: return "pattern";
    case PredicateKind::distinct_locations: return "distinct_locations";
    case PredicateKind::distinct_phones: return "distinct_phones";
    case PredicateKind::distinct_domains: return "distinct_domains";
  }
  return "unknown";
}

std::string_view to_string(RuleScope scope) {
  return scope == RuleScope::document ? "document" : "cluster";
}

RuleSet::RuleSet(std::vector<IndicatorRule> rules) : rules_(std::move(rules)) {
  std::set<std::string> names;
  for (const auto& r : rules_) {
    if (r.name.empty()) throw RuleCompilationError(r.name, "rule without a name");
    if (!names.insert(r.name).second) throw RuleCompilationError(r.name, "duplicate rule name");
    if (r.threshold == 0) throw RuleCompilationError(r.name, "threshold must be >= 1");
    std::unique_ptr<const TermMatcher> matcher;
    std::unique_ptr<const std::regex> pattern;
    if (r.kind == PredicateKind::lexicon) {
      if (r.lexicon.empty()) throw RuleCompilationError(r.name, "empty lexicon");
      matcher = std::make_unique<const TermMatcher>(r.lexicon);
    } else if (r.kind == PredicateKind::pattern) {
      if (r.pattern.empty()) throw RuleCompilationError(r.name, "empty pattern");
      try {
        pattern = std::make_unique<const std::regex>(
            r.pattern, std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& e) {
        throw RuleCompilationError(r.name, std::string("bad pattern: ") + e.what());
      }
    }
    matchers_.push_back(std::move(matcher));
    patterns_.push_back(std::move(pattern));
  }
}

std::size_t RuleSet::count(std::size_t index, std::span<const Document* const> docs) const {
  const auto& rule = rules_.at(index);
  std::size_t total = 0;
  std::unordered_set<std::string_view> distinct;
  for (const Document* doc : docs) {
    switch (rule.kind) {
      case PredicateKind::lexicon:
        total += matchers_[index]->count(doc->text);
        break;
      case PredicateKind::pattern: {
        const auto& re = *patterns_[index];
        total += static_cast<std::size_t>(
            std::distance(std::sregex_iterator(doc->text.begin(), doc->text.end(), re),
                          std::sregex_iterator()));
        break;
      }
      case PredicateKind::distinct_locations:
        distinct.insert(doc->locations.begin(), doc->locations.end());
        break;
      case PredicateKind::distinct_phones:
        distinct.insert(doc->phones.begin(), doc->phones.end());
        break;
      case PredicateKind::distinct_domains:
        distinct.insert(doc->source_domain);
        break;
    }
  }
  return total + distinct.size();
}

bool RuleSet::holds(std::size_t index, std::span<const Document* const> docs) const {
  const auto& rule = rules_.at(index);
  if (rule.scope == RuleScope::cluster) return count(index, docs) >= rule.threshold;
  for (const Document* doc : docs) {
    if (count(index, std::span<const Document* const>(&doc, 1)) >= rule.threshold) return true;
  }
  return false;
}

std::map<std::string, bool> apply_indicators(const Cluster& cluster, const Corpus& corpus,
                                             const RuleSet& rules) {
  std::vector<const Document*> docs;
  docs.reserve(cluster.members.size());
  for (const auto& m : cluster.members) {
    const Document* doc = corpus.find(m);
    if (!doc) throw InputError("cluster member '" + m + "' not in corpus");
    docs.push_back(doc);
  }
  std::map<std::string, bool> out;
  for (std::size_t i = 0; i < rules.rules().size(); ++i) {
    out[rules.rules()[i].name] = rules.holds(i, docs);
  }
  return out;
}

std::map<std::string, bool> apply_indicators(const Document& doc, const RuleSet& rules) {
  const Document* one = &doc;
  std::map<std::string, bool> out;
  for (std::size_t i = 0; i < rules.rules().size(); ++i) {
    out[rules.rules()[i].name] = rules.holds(i, std::span<const Document* const>(&one, 1));
  }
  return out;
}

std::vector<IndicatorRule> load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read rules file " + path.string());
  std::vector<IndicatorRule> rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(trimmed);
    } catch (const json::parse_error& e) {
      throw RuleCompilationError(where, std::string("invalid JSON: ") + e.what());
    }
    IndicatorRule rule;
    try {
      rule.name = obj.at("name").get<std::string>();
      const auto scope = obj.value("scope", std::string("cluster"));
      if (scope == "document") {
        rule.scope = RuleScope::document;
      } else if (scope == "cluster") {
        rule.scope = RuleScope::cluster;
      } else {
        throw RuleCompilationError(rule.name, "unknown scope '" + scope + "'");
      }
      const auto kind = obj.at("kind").get<std::string>();
      if (kind == "lexicon") {
        rule.kind = PredicateKind::lexicon;
      } else if (kind == "pattern") {
        rule.kind = PredicateKind::pattern;
      } else if (kind == "distinct_locations") {
        rule.kind = PredicateKind::distinct_locations;
      } else if (kind == "distinct_phones") {
        rule.kind = PredicateKind::distinct_phones;
      } else if (kind == "distinct_domains") {
        rule.kind = PredicateKind::distinct_domains;
      } else {
        throw RuleCompilationError(rule.name, "unknown predicate kind '" + kind + "'");
      }
      rule.threshold = obj.value("k", std::size_t{1});
      rule.pattern = obj.value("pattern", std::string());
      if (obj.contains("terms")) {
        for (const auto& t : obj.at("terms")) rule.lexicon.insert(text::to_lower(t.get<std::string>()));
      }
      if (obj.contains("lexicon")) {
        auto lex_path = std::filesystem::path(obj.at("lexicon").get<std::string>());
        if (lex_path.is_relative()) lex_path = path.parent_path() / lex_path;
        auto terms = load_lexicon(lex_path);
        rule.lexicon.insert(terms.begin(), terms.end());
      }
    } catch (const json::exception& e) {
      throw RuleCompilationError(rule.name.empty() ? where : rule.name, e.what());
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

}  // namespace riskscore
