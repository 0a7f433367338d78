#include "rrag/matching.hpp"

#include "rrag/error.hpp"
#include "rrag/text.hpp"

namespace rrag::evaluation {

AnswerMatcher::AnswerMatcher(const std::vector<corpus::AnswerGroup>& groups) {
  groups_.reserve(groups.size());
  for (const auto& group : groups) {
    std::vector<std::string> normalized;
    for (const auto& alias : group) {
      auto n = text::normalize(alias);
      if (!n.empty()) normalized.push_back(std::move(n));
    }
    groups_.push_back(std::move(normalized));
  }
}

bool AnswerMatcher::group_hit(std::size_t group, const std::string& normalized_text) const {
  for (const auto& alias : groups_[group]) {
    if (normalized_text.find(alias) != std::string::npos) return true;
  }
  return false;
}

bool AnswerMatcher::any(std::string_view text) const {
  const std::string normalized = text::normalize(text);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (group_hit(g, normalized)) return true;
  }
  return false;
}

std::size_t AnswerMatcher::groups_hit(std::string_view text) const {
  const std::string normalized = text::normalize(text);
  std::size_t hits = 0;
  for (std::size_t g = 0; g < groups_.size(); ++g) hits += group_hit(g, normalized) ? 1 : 0;
  return hits;
}

bool accuracy(std::string_view generation, const std::vector<corpus::AnswerGroup>& groups) {
  return AnswerMatcher(groups).any(generation);
}

double str_em(std::string_view generation, const std::vector<corpus::AnswerGroup>& groups) {
  if (groups.empty()) throw ArgumentError("str_em needs at least one answer group");
  const AnswerMatcher matcher(groups);
  return static_cast<double>(matcher.groups_hit(generation)) / static_cast<double>(groups.size());
}

}  // namespace rrag::evaluation
