#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rrag/corpus.hpp"

namespace rrag::evaluation {

/// Gold aliases pre-normalized once, for repeated containment checks against
/// many texts.
class AnswerMatcher {
 public:
  explicit AnswerMatcher(const std::vector<corpus::AnswerGroup>& groups);

  /// True iff some alias of some group occurs in the text.
  bool any(std::string_view text) const;
  /// Number of groups with at least one alias occurring in the text.
  std::size_t groups_hit(std::string_view text) const;
  std::size_t group_count() const noexcept { return groups_.size(); }

 private:
  bool group_hit(std::size_t group, const std::string& normalized_text) const;

  std::vector<std::vector<std::string>> groups_;
};

/// Pattern accuracy: some alias of some group is a normalized substring.
bool accuracy(std::string_view generation, const std::vector<corpus::AnswerGroup>& groups);

/// Fraction of groups matched by at least one alias. Throws ArgumentError
/// when groups is empty.
double str_em(std::string_view generation, const std::vector<corpus::AnswerGroup>& groups);

}  // namespace rrag::evaluation
