#include "riskscore/text.hpp"

#include <algorithm>
#include <cctype>

namespace riskscore::text {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<TokenSpan> token_spans(std::string_view s) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_byte(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && is_word_byte(static_cast<unsigned char>(s[i]))) ++i;
    spans.push_back({start, i});
  }
  return spans;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  for (const auto& span : token_spans(s)) {
    tokens.push_back(to_lower(s.substr(span.begin, span.end - span.begin)));
  }
  return tokens;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string clean(std::string_view raw) {
  std::string stripped;
  stripped.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] == '<') {
      const auto close = raw.find('>', i + 1);
      if (close != std::string_view::npos) {
        // A tag separates words on either side of it.
        stripped.push_back(' ');
        i = close + 1;
        continue;
      }
    }
    stripped.push_back(raw[i]);
    ++i;
  }
  return collapse_whitespace(stripped);
}

std::vector<std::string> ngrams(const std::vector<std::string>& tokens,
                                int order) {
  std::vector<std::string> out;
  if (order < 1 || tokens.size() < static_cast<std::size_t>(order)) return out;
  const std::size_t n = tokens.size() - static_cast<std::size_t>(order) + 1;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string gram = tokens[i];
    for (int j = 1; j < order; ++j) {
      gram.push_back(' ');
      gram += tokens[i + static_cast<std::size_t>(j)];
    }
    out.push_back(std::move(gram));
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint64_t> shingle_hashes(const std::vector<std::string>& tokens,
                                          int k) {
  std::vector<std::uint64_t> out;
  if (tokens.empty() || k < 1) return out;
  const std::size_t width =
      std::min(tokens.size(), static_cast<std::size_t>(k));
  const std::size_t n = tokens.size() - width + 1;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t j = 0; j < width; ++j) {
      h = fnv1a(tokens[i + j], h);
      h = fnv1a("\x1f", h);
    }
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard(const std::vector<std::uint64_t>& a,
               const std::vector<std::uint64_t>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

}  // namespace riskscore::text
