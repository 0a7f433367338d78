#include "rrag/learning.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "rrag/error.hpp"
#include "rrag/jsonl.hpp"

namespace rrag::learning {
namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                    static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

// Unbiased draw in [0, bound). std::uniform_int_distribution is
// implementation-defined, which would make samples differ across standard
// libraries.
std::size_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return static_cast<std::size_t>(x % bound);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(DemoScope scope) {
  return scope == DemoScope::kGlobal ? "global" : "per-query";
}

DemoScope parse_demo_scope(std::string_view text) {
  if (text == "global") return DemoScope::kGlobal;
  if (text == "per-query") return DemoScope::kPerQuery;
  throw ArgumentError("unknown demonstration scope '" + std::string(text) + "' (global, per-query)");
}

prompting::Demonstration SampledDemo::as(DemoResponse response) const {
  return {question, response == DemoResponse::kRationale ? rationale : answer};
}

std::vector<SampledDemo> sample_demonstrations(const synthesis::AugmentedDataset& aug,
                                               const ICLConfig& config,
                                               const std::set<std::string, std::less<>>& exclude_ids) {
  if (config.n_demos < 0) throw ArgumentError("n_demos must be >= 0");
  std::vector<const synthesis::AugmentedPair*> candidates;
  for (const auto& pair : aug.pairs) {
    if (!exclude_ids.contains(pair.sample.sample_id)) candidates.push_back(&pair);
  }
  const auto n = static_cast<std::size_t>(config.n_demos);
  if (n > candidates.size()) {
    throw SamplingError("cannot draw " + std::to_string(n) + " demonstrations from " +
                        std::to_string(candidates.size()) + " candidates");
  }
  auto rng = seeded_engine(config.seed);
  std::vector<SampledDemo> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    const auto& pair = *candidates[i];
    out.push_back({pair.sample.sample_id, pair.sample.question, pair.rationale.text,
                   corpus::answer_text(pair.sample)});
  }
  return out;
}

std::uint64_t per_query_seed(std::uint64_t base_seed, std::string_view sample_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char c : sample_id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(base_seed ^ h);
}

void write_demonstrations(const std::vector<SampledDemo>& demos, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& d : demos) {
    writer.write({{"sample_id", d.sample_id},
                  {"question", d.question},
                  {"rationale", d.rationale},
                  {"answer", d.answer}});
  }
}

std::vector<SampledDemo> read_demonstrations(const std::filesystem::path& path) {
  std::vector<SampledDemo> out;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    out.push_back({jsonl::require_string(record, "sample_id", path, line),
                   jsonl::require_string(record, "question", path, line),
                   jsonl::require_string(record, "rationale", path, line),
                   jsonl::require_string(record, "answer", path, line)});
  });
  return out;
}

std::vector<SFTRecord> build_sft(const synthesis::AugmentedDataset& aug,
                                 const corpus::CorpusStore& corpus,
                                 const retrieval::RetrievalMap& retrievals, int top_k) {
  if (top_k < 0) throw ArgumentError("top_k must be >= 0");
  std::vector<SFTRecord> out;
  out.reserve(aug.pairs.size());
  for (const auto& pair : aug.pairs) {
    auto it = retrievals.find(pair.sample.sample_id);
    if (it == retrievals.end()) {
      throw ReferentialError("no retrieval for sample '" + pair.sample.sample_id + "'");
    }
    if (pair.rationale.text.empty()) {
      throw ValidationError("sample '" + pair.sample.sample_id + "' has an empty rationale");
    }
    const auto docs = retrieval::top_documents(corpus, it->second, std::min(top_k, it->second.k));
    SFTRecord record;
    record.sample_id = pair.sample.sample_id;
    record.prompt_question = pair.sample.question;
    for (const auto& d : docs) record.prompt_doc_ids.push_back(d.doc_id);
    record.prompt_documents = prompting::format_documents(docs);
    record.messages = prompting::render_ft(pair.sample.question, docs).messages;
    record.messages.push_back({prompting::Role::kAssistant, pair.rationale.text});
    out.push_back(std::move(record));
  }
  return out;
}

std::size_t export_sft(const synthesis::AugmentedDataset& aug, const corpus::CorpusStore& corpus,
                       const retrieval::RetrievalMap& retrievals, int top_k,
                       const std::filesystem::path& path) {
  const auto records = build_sft(aug, corpus, retrievals, top_k);
  jsonl::Writer writer(path);
  for (const auto& record : records) {
    nlohmann::ordered_json messages = nlohmann::ordered_json::array();
    for (const auto& m : record.messages) {
      messages.push_back({{"role", prompting::to_string(m.role)}, {"content", m.content}});
    }
    writer.write({{"messages", std::move(messages)}});
  }
  return writer.count();
}

std::vector<std::vector<prompting::Message>> read_sft(const std::filesystem::path& path) {
  std::vector<std::vector<prompting::Message>> out;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    auto it = record.find("messages");
    if (it == record.end() || !it->is_array()) throw ParseError(path.string(), line + 1, "missing 'messages'");
    std::vector<prompting::Message> messages;
    for (const auto& m : *it) {
      const auto role = jsonl::require_string(m, "role", path, line);
      if (role != "user" && role != "assistant") {
        throw ParseError(path.string(), line + 1, "unexpected role '" + role + "'");
      }
      messages.push_back({role == "user" ? prompting::Role::kUser : prompting::Role::kAssistant,
                          jsonl::require_string(m, "content", path, line)});
    }
    out.push_back(std::move(messages));
  });
  return out;
}

}  // namespace rrag::learning
