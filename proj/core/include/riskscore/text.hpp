#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace riskscore::text {

// Alphanumeric ASCII or any byte of a multi-byte UTF-8 sequence, so
// non-ASCII words stay whole.
constexpr bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Lowercased maximal runs of word bytes.
std::vector<std::string> tokenize(std::string_view s);

// Byte spans of the tokens in s, in order.
struct TokenSpan {
  std::size_t begin;
  std::size_t end;
};
std::vector<TokenSpan> token_spans(std::string_view s);

// Strips <...> markup, collapses whitespace runs to one space and trims.
// Case is preserved.
std::string clean(std::string_view raw);

// Collapses whitespace runs to one space and trims.
std::string collapse_whitespace(std::string_view s);

// n-grams of consecutive tokens joined by a single space.
std::vector<std::string> ngrams(const std::vector<std::string>& tokens,
                                int order);

// Sorted, deduplicated 64-bit hashes of the word shingles of length k. A
// token sequence shorter than k yields a single shingle of the whole
// sequence; an empty sequence yields none.
std::vector<std::uint64_t> shingle_hashes(const std::vector<std::string>& tokens,
                                          int k);

std::uint64_t fnv1a(std::string_view s,
                    std::uint64_t h = 0xcbf29ce484222325ULL);

// Jaccard index of two sorted, deduplicated sets. Both empty gives 0.
double jaccard(const std::vector<std::uint64_t>& a,
               const std::vector<std::uint64_t>& b);

}  // namespace riskscore::text
