#include "rrag/text.hpp"

#include <algorithm>
#include <array>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace rrag::text {
namespace {

const icu::Normalizer2& nfkc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* instance = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status) || instance == nullptr) {
    throw std::runtime_error(std::string("ICU NFKC unavailable: ") + u_errorName(status));
  }
  return *instance;
}

icu::UnicodeString apply_nfkc(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfkc().normalize(in, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error(std::string("ICU normalize failed: ") + u_errorName(status));
  }
  return out;
}

// NFKC, lowercase, NFKC again: lowercasing can leave text outside NFKC, and
// the second pass keeps normalize() idempotent.
icu::UnicodeString fold(std::string_view input) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(input.data(), static_cast<int32_t>(input.size())));
  s = apply_nfkc(s);
  s.toLower(icu::Locale::getRoot());
  return apply_nfkc(s);
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

void append_utf8(std::string& out, const icu::UnicodeString& s) { s.toUTF8String(out); }

}  // namespace

std::string normalize(std::string_view input) {
  const icu::UnicodeString folded = fold(input);
  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < folded.length();) {
    const UChar32 c = folded.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar>(u' '));
      pending_space = false;
    }
    collapsed.append(c);
  }
  std::string out;
  append_utf8(out, collapsed);
  return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
  const std::string n = normalize(needle);
  if (n.empty()) return false;
  return normalize(haystack).find(n) != std::string::npos;
}

std::vector<std::string> tokenize(std::string_view input, const TokenizerOptions& options) {
  const icu::UnicodeString folded = fold(input);
  std::vector<std::string> tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string token;
    append_utf8(token, current);
    current.remove();
    if (options.remove_stopwords && is_stopword(token)) return;
    if (options.stem) token = porter_stem(token);
    tokens.push_back(std::move(token));
  };
  for (int32_t i = 0; i < folded.length();) {
    const UChar32 c = folded.char32At(i);
    i += U16_LENGTH(c);
    if (u_isalnum(c)) {
      current.append(c);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

bool is_stopword(std::string_view token) {
  // Lucene's English stop set.
  static constexpr std::array<std::string_view, 33> kStopwords = {
      "a",    "an",    "and",  "are",  "as",    "at",    "be",   "but",  "by",
      "for",  "if",    "in",   "into", "is",    "it",    "no",   "not",  "of",
      "on",   "or",    "such", "that", "the",   "their", "then", "there",
      "these", "they", "this", "to",   "was",   "will",  "with"};
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::size_t word_count(std::string_view input) {
  std::size_t count = 0;
  bool in_word = false;
  for (const char c : input) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

}  // namespace rrag::text
