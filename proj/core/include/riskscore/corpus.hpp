#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace riskscore {

using Date = std::chrono::year_month_day;

// Parses YYYY-MM-DD, optionally followed by a 'T' time part which is ignored.
std::optional<Date> parse_date(std::string_view s);
std::string format_date(const Date& d);

// A cleaned record with its extracted linking attributes.
struct Document {
  std::string id;
  std::string source_domain;
  std::string text;
  std::vector<std::string> phones;     // normalized digit strings
  std::vector<std::string> locations;  // lowercase, trimmed
  std::optional<Date> posted_date;
  std::map<std::string, std::string> extras;

  // Keys this document contributes to the corpus schema.
  std::vector<std::string> attribute_names() const;

  bool operator==(const Document&) const = default;
};

// Field names with a fixed meaning in the record format; extras may not use
// them.
bool is_reserved_field(std::string_view name);

// Immutable ordered document collection with an id index.
class Corpus {
 public:
  Corpus() = default;

  // Throws InputError on duplicate ids, invalid phone or location entries, or
  // extras that shadow a reserved field.
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const noexcept { return docs_; }
  const std::set<std::string>& schema() const noexcept { return schema_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }

  const Document* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

 private:
  std::vector<Document> docs_;
  std::set<std::string> schema_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Strips non-digits, drops a leading country code "1" from 11-digit
// numbers, and accepts 7 to 15 digits.
std::optional<std::string> normalize_phone(std::string_view raw);

// Finds phone-like runs of digits and separators in free text.
std::vector<std::string> scan_phones(std::string_view text);

// Case-insensitive whole-token matcher for single- and multi-word terms.
class TermMatcher {
 public:
  TermMatcher() = default;
  explicit TermMatcher(const std::set<std::string>& terms);

  bool empty() const noexcept { return by_first_.empty(); }
  std::size_t size() const noexcept { return count_; }

  // Distinct matched terms in order of first appearance. Overlaps resolve to
  // the longest term starting at the earliest token.
  std::vector<std::string> find_all(std::string_view text) const;

  // Number of (non-overlapping) matches.
  std::size_t count(std::string_view text) const;

  // Deletes every matched occurrence, repeating until none remain, then
  // collapses whitespace.
  std::string remove(std::string_view text) const;

 private:
  struct Match {
    std::size_t first_token;
    std::size_t token_count;
    const std::string* term;
  };
  std::vector<Match> matches(const std::vector<std::string>& tokens) const;

  // First token -> (term tokens, term), longest first.
  std::unordered_map<std::string,
                     std::vector<std::pair<std::vector<std::string>, std::string>>>
      by_first_;
  std::size_t count_ = 0;
};

using Gazetteer = TermMatcher;

// One lowercase term per line; blank lines and lines starting with '#' are
// ignored.
std::set<std::string> load_lexicon(const std::filesystem::path& path);

// A parsed but not yet normalized line of the corpus file.
struct RawRecord {
  std::optional<std::string> id;
  std::optional<std::string> domain;
  std::optional<std::string> text;
  std::vector<std::string> phones;
  std::vector<std::string> locations;
  std::optional<std::string> date;
  std::map<std::string, std::string> extras;
};

// Throws MalformedRecordError for invalid JSON or a non-object line.
RawRecord parse_record(std::string_view line);

// Cleans text and extracts phones (explicit and scanned from text, deduped)
// and locations (explicit fields plus gazetteer hits, deduped). Throws
// MalformedRecordError when id, domain or text is missing, text is empty
// after cleaning, or the date is not ISO-8601.
Document extract_attributes(const RawRecord& raw, const Gazetteer& gazetteer);

struct IngestOptions {
  std::optional<std::size_t> limit;  // cap on accepted records
  const Gazetteer* gazetteer = nullptr;
};

struct IngestResult {
  Corpus corpus;
  std::size_t skipped = 0;  // malformed or duplicate-id lines
  std::size_t lines = 0;    // non-blank lines read
};

// Throws IoError when the file cannot be read and EmptyCorpusError when the
// file has records but none of them is valid. A file with no records at all
// yields an empty corpus.
IngestResult ingest(const std::filesystem::path& path,
                    const IngestOptions& options = {});

std::string to_record_line(const Document& doc);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Deletes lexicon tokens from every document's text. Texts may become empty.
Corpus remove_tokens(const Corpus& corpus, const std::set<std::string>& lexicon);

}  // namespace riskscore
