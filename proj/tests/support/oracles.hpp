#pragma once

// Deliberately naive reference implementations. They share no code with the
// library beyond the tokenizer, and are only meant for ASCII inputs.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "rrag/corpus.hpp"
#include "rrag/text.hpp"

namespace rrag::oracle {

/// Lowercase, whitespace runs to one space, trimmed.
inline std::string fold_ascii(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

inline bool contains(const std::string& haystack, const std::string& needle) {
  const auto n = fold_ascii(needle);
  return !n.empty() && fold_ascii(haystack).find(n) != std::string::npos;
}

inline bool group_hit(const std::string& text, const corpus::AnswerGroup& group) {
  for (const auto& alias : group) {
    if (contains(text, alias)) return true;
  }
  return false;
}

inline bool accuracy(const std::string& text, const std::vector<corpus::AnswerGroup>& groups) {
  for (const auto& g : groups) {
    if (group_hit(text, g)) return true;
  }
  return false;
}

inline double str_em(const std::string& text, const std::vector<corpus::AnswerGroup>& groups) {
  int hit = 0;
  for (const auto& g : groups) hit += group_hit(text, g) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(groups.size());
}

/// Relevance flags of a ranked list of bodies.
inline std::vector<bool> relevance(const std::vector<std::string>& ranked_bodies,
                                   const std::vector<corpus::AnswerGroup>& groups) {
  std::vector<bool> out;
  for (const auto& body : ranked_bodies) out.push_back(accuracy(body, groups));
  return out;
}

inline bool recall(const std::vector<bool>& relevant, int k) {
  for (int i = 0; i < k && i < static_cast<int>(relevant.size()); ++i) {
    if (relevant[static_cast<std::size_t>(i)]) return true;
  }
  return false;
}

inline double precision(const std::vector<bool>& relevant, int k) {
  int hits = 0;
  for (int i = 0; i < k && i < static_cast<int>(relevant.size()); ++i) hits += relevant[static_cast<std::size_t>(i)] ? 1 : 0;
  return static_cast<double>(hits) / k;
}

struct Scored {
  std::string doc_id;
  double score;
};

/// Okapi BM25 straight from its definition, evaluated for every document.
/// Documents sharing no term with the query are left out.
inline std::vector<Scored> bm25_rank(const std::vector<corpus::Document>& docs, const std::string& query,
                                     double k1 = 0.9, double b = 0.4) {
  std::vector<std::vector<std::string>> doc_tokens;
  for (const auto& d : docs) doc_tokens.push_back(text::tokenize(d.title + " " + d.body));
  double total = 0;
  for (const auto& t : doc_tokens) total += static_cast<double>(t.size());
  const double avgdl = total / static_cast<double>(docs.size());
  const double n = static_cast<double>(docs.size());
  const auto q = text::tokenize(query);
  std::vector<Scored> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0;
    bool matched = false;
    const double dl = static_cast<double>(doc_tokens[i].size());
    for (const auto& term : q) {
      const double tf = static_cast<double>(std::count(doc_tokens[i].begin(), doc_tokens[i].end(), term));
      if (tf == 0) continue;
      matched = true;
      double df = 0;
      for (const auto& t : doc_tokens) df += std::find(t.begin(), t.end(), term) != t.end() ? 1 : 0;
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
    }
    if (matched) out.push_back({docs[i].doc_id, score});
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
  return out;
}

}  // namespace rrag::oracle
