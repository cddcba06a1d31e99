#include "riskscore/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "riskscore/error.hpp"
#include "riskscore/text.hpp"

namespace riskscore {

using nlohmann::json;

namespace {

constexpr std::string_view kReserved[] = {"id",     "domain",    "text",
                                          "phones", "locations", "date"};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool valid_phone(std::string_view p) {
  return p.size() >= 7 && p.size() <= 15 &&
         std::all_of(p.begin(), p.end(), is_digit);
}

void push_unique(std::vector<std::string>& out, std::string value) {
  if (std::find(out.begin(), out.end(), value) == out.end()) {
    out.push_back(std::move(value));
  }
}

std::string scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

std::optional<Date> parse_date(std::string_view s) {
  if (s.size() > 10 && s[10] == 'T') s = s.substr(0, 10);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto parse = [&](std::string_view part, auto& out) {
    if (!std::all_of(part.begin(), part.end(), is_digit)) return false;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc{} && ptr == part.data() + part.size();
  };
  if (!parse(s.substr(0, 4), y) || !parse(s.substr(5, 2), m) ||
      !parse(s.substr(8, 2), d)) {
    return std::nullopt;
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

bool is_reserved_field(std::string_view name) {
  return std::find(std::begin(kReserved), std::end(kReserved), name) !=
         std::end(kReserved);
}

std::vector<std::string> Document::attribute_names() const {
  std::vector<std::string> names = {"id", "domain", "text"};
  if (!phones.empty()) names.emplace_back("phones");
  if (!locations.empty()) names.emplace_back("locations");
  if (posted_date) names.emplace_back("date");
  for (const auto& [key, value] : extras) names.push_back(key);
  return names;
}

Corpus::Corpus(std::vector<Document> documents) : docs_(std::move(documents)) {
  index_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const Document& doc = docs_[i];
    if (doc.id.empty()) throw InputError("document with empty id");
    if (!index_.emplace(doc.id, i).second) {
      throw InputError("duplicate document id '" + doc.id + "'");
    }
    for (const auto& p : doc.phones) {
      if (!valid_phone(p)) {
        throw InputError("document '" + doc.id + "': invalid phone '" + p + "'");
      }
    }
    for (const auto& loc : doc.locations) {
      if (loc.empty() || loc != text::trim(loc) || loc != text::to_lower(loc)) {
        throw InputError("document '" + doc.id +
                         "': location not lowercase/trimmed '" + loc + "'");
      }
    }
    for (const auto& [key, value] : doc.extras) {
      if (is_reserved_field(key)) {
        throw InputError("document '" + doc.id + "': extra field '" + key +
                         "' shadows a reserved field");
      }
    }
    for (auto& name : doc.attribute_names()) schema_.insert(std::move(name));
  }
}

const Document* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &docs_[it->second];
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> normalize_phone(std::string_view raw) {
  std::string digits;
  for (char c : raw) {
    if (is_digit(c)) digits.push_back(c);
  }
  if (digits.size() == 11 && digits.front() == '1') digits.erase(0, 1);
  if (digits.size() < 7 || digits.size() > 15) return std::nullopt;
  return digits;
}

std::vector<std::string> scan_phones(std::string_view s) {
  std::vector<std::string> out;
  auto is_sep = [](char c) {
    return c == '-' || c == '.' || c == '(' || c == ')' || c == '+';
  };
  auto word_byte = [](char c) {
    return text::is_word_byte(static_cast<unsigned char>(c));
  };
  std::size_t i = 0;
  while (i < s.size()) {
    const bool starts = is_digit(s[i]) ||
                        ((s[i] == '(' || s[i] == '+') && i + 1 < s.size() &&
                         is_digit(s[i + 1]));
    if (!starts || (i > 0 && word_byte(s[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t last_digit = std::string_view::npos;
    while (j < s.size()) {
      const char c = s[j];
      if (is_digit(c)) {
        last_digit = j;
      } else if (is_sep(c)) {
      } else if (c == ' ' && j + 1 < s.size() &&
                 (is_digit(s[j + 1]) || s[j + 1] == '(')) {
      } else {
        break;
      }
      ++j;
    }
    if (last_digit == std::string_view::npos) {
      i = j + 1;
      continue;
    }
    const std::size_t end = last_digit + 1;
    // A run glued to letters on its right is part of a word, not a number.
    if (!(end < s.size() && word_byte(s[end]) && !is_digit(s[end]))) {
      if (auto phone = normalize_phone(s.substr(i, end - i))) {
        push_unique(out, std::move(*phone));
      }
    }
    i = std::max(end, i + 1);
  }
  return out;
}

TermMatcher::TermMatcher(const std::set<std::string>& terms) {
  for (const auto& term : terms) {
    auto tokens = text::tokenize(term);
    if (tokens.empty()) continue;
    by_first_[tokens.front()].emplace_back(tokens, term);
    ++count_;
  }
  for (auto& [first, list] : by_first_) {
    std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.first.size() > b.first.size();
    });
  }
}

std::vector<TermMatcher::Match> TermMatcher::matches(
    const std::vector<std::string>& tokens) const {
  std::vector<Match> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    auto it = by_first_.find(tokens[i]);
    bool matched = false;
    if (it != by_first_.end()) {
      for (const auto& [term_tokens, term] : it->second) {
        if (i + term_tokens.size() > tokens.size()) continue;
        if (std::equal(term_tokens.begin(), term_tokens.end(),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
          out.push_back({i, term_tokens.size(), &term});
          i += term_tokens.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++i;
  }
  return out;
}

std::vector<std::string> TermMatcher::find_all(std::string_view s) const {
  std::vector<std::string> found;
  if (empty()) return found;
  for (const auto& m : matches(text::tokenize(s))) push_unique(found, *m.term);
  return found;
}

std::size_t TermMatcher::count(std::string_view s) const {
  if (empty()) return 0;
  return matches(text::tokenize(s)).size();
}

std::string TermMatcher::remove(std::string_view s) const {
  std::string current(s);
  if (empty()) return current;
  while (true) {
    const auto spans = text::token_spans(current);
    std::vector<std::string> tokens;
    tokens.reserve(spans.size());
    for (const auto& sp : spans) {
      tokens.push_back(text::to_lower(
          std::string_view(current).substr(sp.begin, sp.end - sp.begin)));
    }
    const auto found = matches(tokens);
    if (found.empty()) break;
    std::string next;
    next.reserve(current.size());
    std::size_t pos = 0;
    for (const auto& m : found) {
      const std::size_t b = spans[m.first_token].begin;
      const std::size_t e = spans[m.first_token + m.token_count - 1].end;
      next.append(current, pos, b - pos);
      pos = e;
    }
    next.append(current, pos, std::string::npos);
    current = std::move(next);
  }
  return text::collapse_whitespace(current);
}

std::set<std::string> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    auto term = text::to_lower(text::trim(line));
    if (term.empty() || term.front() == '#') continue;
    terms.insert(std::move(term));
  }
  return terms;
}

RawRecord parse_record(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedRecordError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw MalformedRecordError("record is not an object");

  RawRecord raw;
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw MalformedRecordError(std::string("field '") + key +
                                 "' must be a string");
    }
    return it->get<std::string>();
  };
  auto string_list = [&](const char* key) {
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return out;
    if (it->is_string()) {
      out.push_back(it->get<std::string>());
      return out;
    }
    if (!it->is_array()) {
      throw MalformedRecordError(std::string("field '") + key +
                                 "' must be an array of strings");
    }
    for (const auto& v : *it) {
      if (!v.is_string()) {
        throw MalformedRecordError(std::string("field '") + key +
                                   "' must be an array of strings");
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  };

  raw.id = opt_string("id");
  raw.domain = opt_string("domain");
  raw.text = opt_string("text");
  raw.date = opt_string("date");
  raw.phones = string_list("phones");
  raw.locations = string_list("locations");
  for (const auto& [key, value] : obj.items()) {
    if (is_reserved_field(key) || value.is_null()) continue;
    raw.extras[key] = scalar_to_string(value);
  }
  return raw;
}

Document extract_attributes(const RawRecord& raw, const Gazetteer& gazetteer) {
  if (!raw.id || text::trim(*raw.id).empty()) {
    throw MalformedRecordError("missing id");
  }
  if (!raw.text) throw MalformedRecordError("missing text");
  if (!raw.domain) throw MalformedRecordError("missing domain");

  Document doc;
  doc.id = text::trim(*raw.id);
  doc.source_domain = text::to_lower(text::trim(*raw.domain));
  doc.text = text::clean(*raw.text);
  if (doc.text.empty()) {
    throw MalformedRecordError("record '" + doc.id + "': empty text");
  }
  for (const auto& p : raw.phones) {
    if (auto phone = normalize_phone(p)) push_unique(doc.phones, std::move(*phone));
  }
  for (auto& p : scan_phones(doc.text)) push_unique(doc.phones, std::move(p));
  for (const auto& loc : raw.locations) {
    auto norm = text::to_lower(text::trim(loc));
    if (!norm.empty()) push_unique(doc.locations, std::move(norm));
  }
  for (auto& loc : gazetteer.find_all(doc.text)) {
    push_unique(doc.locations, std::move(loc));
  }
  if (raw.date) {
    doc.posted_date = parse_date(text::trim(*raw.date));
    if (!doc.posted_date) {
      throw MalformedRecordError("record '" + doc.id + "': invalid date '" +
                                 *raw.date + "'");
    }
  }
  doc.extras = raw.extras;
  return doc;
}

IngestResult ingest(const std::filesystem::path& path,
                    const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus file " + path.string());
  static const Gazetteer kNoGazetteer;
  const Gazetteer& gazetteer = options.gazetteer ? *options.gazetteer : kNoGazetteer;

  IngestResult result;
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (options.limit && docs.size() >= *options.limit) break;
    if (text::trim(line).empty()) continue;
    ++result.lines;
    try {
      Document doc = extract_attributes(parse_record(line), gazetteer);
      if (!seen.insert(doc.id).second) {
        ++result.skipped;
        continue;
      }
      docs.push_back(std::move(doc));
    } catch (const MalformedRecordError&) {
      ++result.skipped;
    }
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  if (docs.empty() && result.lines > 0) {
    throw EmptyCorpusError(path.string() + ": no valid records among " +
                           std::to_string(result.lines) + " lines");
  }
  result.corpus = Corpus(std::move(docs));
  return result;
}

std::string to_record_line(const Document& doc) {
  json obj = json::object();
  for (const auto& [key, value] : doc.extras) obj[key] = value;
  obj["id"] = doc.id;
  obj["domain"] = doc.source_domain;
  obj["text"] = doc.text;
  if (!doc.phones.empty()) obj["phones"] = doc.phones;
  if (!doc.locations.empty()) obj["locations"] = doc.locations;
  if (doc.posted_date) obj["date"] = format_date(*doc.posted_date);
  return obj.dump();
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& doc : corpus.documents()) out << to_record_line(doc) << '\n';
  if (!out) throw IoError("write failed on " + path.string());
}

Corpus remove_tokens(const Corpus& corpus, const std::set<std::string>& lexicon) {
  const TermMatcher matcher(lexicon);
  std::vector<Document> docs = corpus.documents();
  if (!matcher.empty()) {
    for (auto& doc : docs) doc.text = matcher.remove(doc.text);
  }
  return Corpus(std::move(docs));
}

}  // namespace riskscore
