#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rrag::text {

/// Matching normalization shared by retrieval relevance, consistency checks
/// and answer metrics: NFKC, lowercase, whitespace runs collapsed to a single
/// space, leading/trailing whitespace stripped. Punctuation is kept.
/// Idempotent. Invalid UTF-8 sequences are replaced with U+FFFD.
std::string normalize(std::string_view input);

/// True iff normalize(needle) is a nonempty substring of normalize(haystack).
bool contains_normalized(std::string_view haystack, std::string_view needle);

struct TokenizerOptions {
  bool stem = false;
  bool remove_stopwords = false;
};

/// Lowercases and splits on runs of non-alphanumeric code points.
std::vector<std::string> tokenize(std::string_view input,
                                  const TokenizerOptions& options = {});

/// Classic Porter (1980) suffix stripping. Expects a lowercase ASCII word;
/// other input is returned unchanged.
std::string porter_stem(std::string_view word);

bool is_stopword(std::string_view token);

/// Number of whitespace-separated words.
std::size_t word_count(std::string_view input);

}  // namespace rrag::text
