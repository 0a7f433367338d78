#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace rrag::jsonl {

using Json = nlohmann::json;

/// Calls `visit(record, line_number)` for every nonblank line, 0-based line
/// numbers. Malformed JSON raises ParseError naming the line.
void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, std::size_t)>& visit);

/// Line-oriented writer. Records are dumped compactly, one per line, with
/// keys in insertion order of the caller's ordered_json.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void write(const nlohmann::ordered_json& record);
  std::size_t count() const noexcept { return count_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Reads a required string field, raising ParseError when absent or mistyped.
std::string require_string(const Json& record, const char* key,
                           const std::filesystem::path& source, std::size_t line);

}  // namespace rrag::jsonl
