#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "riskscore/clustering.hpp"
#include "riskscore/corpus.hpp"

namespace riskscore {

enum class RuleScope { document, cluster };

enum class PredicateKind {
  lexicon,             // lexicon term hits
  pattern,             // regular-expression matches (case-insensitive)
  distinct_locations,  // distinct location values
  distinct_phones,
  distinct_domains,
};

// A named boolean clue: the predicate's count reaches `threshold`. Document
// scope asks whether any single member does; cluster scope pools the
// members first.
struct IndicatorRule {
  std::string name;
  RuleScope scope = RuleScope::cluster;
  PredicateKind kind = PredicateKind::lexicon;
  std::set<std::string> lexicon;
  std::string pattern;
  std::size_t threshold = 1;
};

class RuleSet {
 public:
  // Throws RuleCompilationError naming the rule for duplicate names, bad
  // patterns, empty lexicons or a zero threshold.
  explicit RuleSet(std::vector<IndicatorRule> rules);
  RuleSet() = default;

  const std::vector<IndicatorRule>& rules() const noexcept { return rules_; }
  bool empty() const noexcept { return rules_.empty(); }

  std::size_t count(std::size_t rule, std::span<const Document* const> docs) const;
  bool holds(std::size_t rule, std::span<const Document* const> docs) const;

 private:
  std::vector<IndicatorRule> rules_;
  std::vector<std::unique_ptr<const TermMatcher>> matchers_;
  std::vector<std::unique_ptr<const std::regex>> patterns_;
};

std::map<std::string, bool> apply_indicators(const Cluster& cluster, const Corpus& corpus,
                                             const RuleSet& rules);
std::map<std::string, bool> apply_indicators(const Document& doc, const RuleSet& rules);

// One JSON object per line:
//   {"name": "movement", "scope": "cluster", "kind": "distinct_locations", "k": 2}
//   {"name": "ads", "kind": "lexicon", "terms": ["x", "y"]}   or "lexicon": "<path>"
//   {"name": "rates", "kind": "pattern", "pattern": "\\$[0-9]+"}
// Lexicon paths are relative to the rules file.
std::vector<IndicatorRule> load_rules(const std::filesystem::path& path);

std::string_view to_string(PredicateKind kind);
std::string_view to_string(RuleScope scope);

}  // namespace riskscore
