#include "rrag/lm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "rrag/hash.hpp"
#include "rrag/jsonl.hpp"
#include "rrag/text.hpp"

namespace rrag::lm {
namespace {

std::string excerpt(const std::string& body, std::size_t limit = 200) {
  return body.size() <= limit ? body : body.substr(0, limit) + "...";
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
};

}  // namespace

HttpChatModel::HttpChatModel(EndpointConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch match;
  if (!std::regex_match(config_.base_url, match, kUrl)) {
    throw ConfigurationError("endpoint base_url must look like http(s)://host[:port][/prefix], got '" +
                             config_.base_url + "'");
  }
  if (config_.model_name.empty()) throw ConfigurationError("endpoint model name must not be empty");
  if (config_.max_retries < 0) throw ConfigurationError("max_retries must be >= 0");
  scheme_host_port_ = match[1].str();
  std::string prefix = match[2].matched ? match[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const bool has_version = prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0;
  path_ = prefix + (has_version ? "" : "/v1") + "/chat/completions";
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigurationError("API key variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
  }
}

nlohmann::ordered_json HttpChatModel::request_body(const std::string& model,
                                                   const CompletionRequest& request) {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& m : request.prompt.messages) {
    messages.push_back({{"role", prompting::to_string(m.role)}, {"content", m.content}});
  }
  return {{"model", model},
          {"messages", std::move(messages)},
          {"temperature", request.decode.temperature},
          {"max_tokens", request.decode.max_new_tokens}};
}

std::string HttpChatModel::complete(const CompletionRequest& request) {
  if (request.prompt.messages.empty()) throw ArgumentError("prompt has no messages");
  const std::string body = request_body(config_.model_name, request)
                               .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  SemaphoreGuard guard(in_flight_);
  std::string last_error;
  std::chrono::milliseconds slept{0};
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(scheme_host_port_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    ++calls_;
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_error = "request failed: " + httplib::to_string(result.error());
    } else if (result->status >= 200 && result->status < 300) {
      nlohmann::json response;
      try {
        response = nlohmann::json::parse(result->body);
        const auto& content = response.at("choices").at(0).at("message").at("content");
        return content.get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw EndpointError(result->status,
                            "malformed completion response (" + std::string(e.what()) + "): " +
                                excerpt(result->body));
      }
    } else if (transient_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status) + ": " + excerpt(result->body);
    } else {
      throw EndpointError(result->status, "endpoint returned HTTP " + std::to_string(result->status) +
                                              ": " + excerpt(result->body));
    }
    if (attempt >= config_.max_retries) break;
    std::chrono::milliseconds delay = config_.initial_backoff * (1LL << std::min(attempt, 30));
    delay = std::min<std::chrono::milliseconds>(delay, config_.max_backoff);
    if (slept + delay > config_.retry_ceiling) break;
    spdlog::debug("retrying {} after {} ms: {}", config_.model_name, delay.count(), last_error);
    std::this_thread::sleep_for(delay);
    slept += delay;
  }
  throw TransportError(config_.model_name + ": giving up, " + last_error);
}

// ---------------------------------------------------------------------------
// Mocks

std::string_view to_string(MockBehavior behavior) {
  switch (behavior) {
    case MockBehavior::kExtractive: return "extractive";
    case MockBehavior::kEcho: return "echo";
    case MockBehavior::kRefuse: return "refuse";
    case MockBehavior::kScripted: return "scripted";
  }
  return "unknown";
}

MockModel::MockModel(MockBehavior behavior, std::string name)
    : behavior_(behavior), name_(std::move(name)) {}

std::shared_ptr<MockModel> MockModel::extractive(const std::vector<corpus::QASample>& samples,
                                                 std::string name) {
  std::shared_ptr<MockModel> model(new MockModel(MockBehavior::kExtractive, std::move(name)));
  for (const auto& s : samples) model->answers_[s.sample_id] = s.answer_groups;
  return model;
}

std::shared_ptr<MockModel> MockModel::echo(std::string name) {
  return std::shared_ptr<MockModel>(new MockModel(MockBehavior::kEcho, std::move(name)));
}

std::shared_ptr<MockModel> MockModel::refuse(std::string name) {
  return std::shared_ptr<MockModel>(new MockModel(MockBehavior::kRefuse, std::move(name)));
}

std::shared_ptr<MockModel> MockModel::scripted(std::map<std::string, ScriptedReply> replies,
                                               std::optional<std::string> fallback,
                                               std::string name) {
  std::shared_ptr<MockModel> model(new MockModel(MockBehavior::kScripted, std::move(name)));
  model->replies_.insert(replies.begin(), replies.end());
  model->fallback_ = std::move(fallback);
  return model;
}

std::shared_ptr<MockModel> MockModel::scripted_from_file(const std::filesystem::path& path,
                                                         std::string name) {
  std::map<std::string, ScriptedReply> replies;
  std::optional<std::string> fallback;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    const auto id = jsonl::require_string(record, "sample_id", path, line);
    ScriptedReply reply;
    reply.fail = record.value("fail", false);
    if (!reply.fail) reply.text = jsonl::require_string(record, "reply", path, line);
    if (id == "*") {
      fallback = reply.text;
    } else {
      replies[id] = std::move(reply);
    }
  });
  return scripted(std::move(replies), std::move(fallback), std::move(name));
}

bool MockModel::cacheable() const {
  return behavior_ == MockBehavior::kEcho || behavior_ == MockBehavior::kRefuse;
}

std::string MockModel::complete(const CompletionRequest& request) {
  if (request.prompt.messages.empty()) throw ArgumentError("prompt has no messages");
  ++calls_;
  switch (behavior_) {
    case MockBehavior::kEcho:
      return sha256_hex(prompting::render_raw(request.prompt));
    case MockBehavior::kRefuse:
      return std::string(kRefusalText);
    case MockBehavior::kScripted: {
      auto it = replies_.find(request.sample_id);
      if (it == replies_.end()) {
        if (fallback_) return *fallback_;
        throw EndpointError(404, "no scripted reply for sample '" + request.sample_id + "'");
      }
      if (it->second.fail) {
        throw TransportError("scripted failure for sample '" + request.sample_id + "'");
      }
      return it->second.text;
    }
    case MockBehavior::kExtractive: {
      auto it = answers_.find(request.sample_id);
      if (it == answers_.end()) {
        throw EndpointError(404, "extractive mock has no answers for sample '" + request.sample_id + "'");
      }
      std::vector<std::pair<std::string, const std::string*>> aliases;
      for (const auto& group : it->second) {
        for (const auto& alias : group) aliases.emplace_back(text::normalize(alias), &alias);
      }
      for (const auto& body : shown_document_bodies(request.prompt)) {
        const std::string normalized = text::normalize(body);
        for (const auto& [needle, original] : aliases) {
          if (!needle.empty() && normalized.find(needle) != std::string::npos) return *original;
        }
      }
      return std::string(kUnknownAnswer);
    }
  }
  return {};
}

std::string CallbackModel::complete(const CompletionRequest& request) {
  ++calls_;
  return fn_(request);
}

std::vector<std::string> shown_document_bodies(const prompting::ChatPrompt& prompt) {
  static constexpr std::string_view kPrefix = "Document [";
  static constexpr std::string_view kTitle = "] (Title: ";
  static constexpr std::string_view kBodySep = "): ";
  std::vector<std::string> bodies;
  for (const auto& message : prompt.messages) {
    if (message.role != prompting::Role::kUser) continue;
    std::istringstream lines(message.content);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.rfind(kPrefix, 0) != 0) continue;
      std::size_t pos = kPrefix.size();
      const std::size_t digits = pos;
      while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos == digits || line.compare(pos, kTitle.size(), kTitle) != 0) continue;
      const std::size_t sep = line.find(kBodySep, pos + kTitle.size());
      if (sep == std::string::npos) continue;
      bodies.push_back(line.substr(sep + kBodySep.size()));
    }
  }
  return bodies;
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(const std::string& model, const prompting::ChatPrompt& prompt,
                               const DecodeParams& decode) {
  const nlohmann::ordered_json material{{"model", model},
                                        {"prompt", prompting::render_raw(prompt)},
                                        {"temperature", decode.temperature},
                                        {"max_new_tokens", decode.max_new_tokens}};
  return sha256_hex(material.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const auto path = path_for(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const auto value = nlohmann::json::parse(in);
    if (value.at("key").get<std::string>() != key) {
      spdlog::warn("cache entry {} carries a different key; ignoring", path.string());
      return std::nullopt;
    }
    return value.at("completion").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    spdlog::warn("unreadable cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const std::string& model,
                        const prompting::ChatPrompt& prompt, const DecodeParams& decode,
                        const std::string& completion) const {
  const auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  const nlohmann::ordered_json value{
      {"key", key},
      {"model", model},
      {"decode", {{"temperature", decode.temperature}, {"max_new_tokens", decode.max_new_tokens}}},
      {"prompt", prompting::render_raw(prompt)},
      {"completion", completion}};
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << '.'
         << std::chrono::steady_clock::now().time_since_epoch().count();
  auto tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write cache entry " + tmp.string());
    out << value.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<LanguageModel> model, std::shared_ptr<const ResponseCache> cache)
    : model_(std::move(model)),
      cache_(std::move(cache)),
      cache_hits_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (!model_) throw ArgumentError("gateway needs a model");
}

std::string Gateway::complete(const CompletionRequest& request) const {
  if (request.prompt.messages.empty()) throw ArgumentError("prompt has no messages");
  if (!cache_ || !model_->cacheable()) return model_->complete(request);
  const auto key = ResponseCache::key(model_->model_name(), request.prompt, request.decode);
  if (auto hit = cache_->get(key)) {
    ++*cache_hits_;
    return *hit;
  }
  std::string text = model_->complete(request);
  cache_->put(key, model_->model_name(), request.prompt, request.decode, text);
  return text;
}

std::vector<Completion> Gateway::batch_complete(std::span<const CompletionRequest> requests,
                                                int parallelism) const {
  if (parallelism < 1) throw ArgumentError("parallelism must be >= 1");
  std::vector<Completion> out(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < requests.size();) {
      const auto start = std::chrono::steady_clock::now();
      try {
        out[i].text = complete(requests[i]);
      } catch (const Error& e) {
        out[i].error_kind = e.kind();
        out[i].error = e.what();
      } catch (const std::exception& e) {
        out[i].error_kind = ErrorKind::kTransport;
        out[i].error = e.what();
      }
      out[i].latency = std::chrono::steady_clock::now() - start;
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), requests.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  return out;
}

}  // namespace rrag::lm
