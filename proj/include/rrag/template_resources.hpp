#pragma once

#include <string_view>
#include <vector>

namespace rrag::prompting::resources {

struct TemplateResource {
  std::string_view name;
  std::string_view text;
};

/// Canonical template texts compiled in from resources/templates, sorted by
/// name.
const std::vector<TemplateResource>& all();

/// Throws std::out_of_range for unknown names.
std::string_view get(std::string_view name);

}  // namespace rrag::prompting::resources
