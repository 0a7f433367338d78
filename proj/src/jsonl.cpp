#include "rrag/jsonl.hpp"

#include "rrag/error.hpp"

namespace rrag::jsonl {

void for_each(const std::filesystem::path& path,
              const std::function<void(const Json&, std::size_t)>& visit) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  for (; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(path.string(), line_no + 1, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) {
      throw ParseError(path.string(), line_no + 1, "expected a JSON object");
    }
    visit(record, line_no);
  }
}

Writer::Writer(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw ValidationError("cannot write " + path.string());
}

void Writer::write(const nlohmann::ordered_json& record) {
  out_ << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  if (!out_) throw ValidationError("write failed: " + path_.string());
  ++count_;
}

std::string require_string(const Json& record, const char* key,
                           const std::filesystem::path& source, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw ParseError(source.string(), line + 1, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace rrag::jsonl
