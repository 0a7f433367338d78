#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrag/corpus.hpp"
#include "rrag/error.hpp"
#include "rrag/prompting.hpp"

namespace rrag::lm {

struct DecodeParams {
  double temperature = 0.0;
  int max_new_tokens = 512;
};

struct CompletionRequest {
  prompting::ChatPrompt prompt;
  DecodeParams decode;
  /// Sample the prompt was rendered for. Only mocks look at it.
  std::string sample_id;
};

/// A chat model reachable through complete(). Implementations must be safe to
/// call from several threads.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string model_name() const = 0;
  /// Whether output is a function of (model, prompt, decode) alone and may be
  /// served from the response cache.
  virtual bool cacheable() const { return true; }
  /// Requests that actually left the process (network or mock invocations).
  virtual std::size_t calls() const = 0;
};

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  /// Name of the environment variable holding the API key; empty for
  /// endpoints without authentication.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  /// Upper bound on total time spent sleeping between retries.
  std::chrono::milliseconds retry_ceiling{30000};
  int max_in_flight = 8;
};

/// Chat-completions HTTP client: POST {base}/v1/chat/completions, first
/// choice's message content.
class HttpChatModel final : public LanguageModel {
 public:
  /// Throws ConfigurationError for a malformed URL, a negative retry count,
  /// or a named API key variable that is not set.
  explicit HttpChatModel(EndpointConfig config);

  std::string complete(const CompletionRequest& request) override;
  std::string model_name() const override { return config_.model_name; }
  std::size_t calls() const override { return calls_.load(); }

  /// Request body sent for a prompt.
  static nlohmann::ordered_json request_body(const std::string& model,
                                             const CompletionRequest& request);

 private:
  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  std::atomic<std::size_t> calls_{0};
  std::counting_semaphore<1024> in_flight_;
};

enum class MockBehavior { kExtractive, kEcho, kRefuse, kScripted };

std::string_view to_string(MockBehavior behavior);

inline constexpr std::string_view kRefusalText = "I'm sorry, but I can't help with that.";
inline constexpr std::string_view kUnknownAnswer = "unknown";

/// Canned reply for the scripted mock. `fail` makes the call throw a
/// TransportError instead.
struct ScriptedReply {
  std::string text;
  bool fail = false;
};

/// Deterministic offline model.
///   Extractive: first gold alias of the first shown document containing one,
///               else "unknown". Needs the sample answers.
///   Echo:       SHA-256 of the raw prompt.
///   Refuse:     fixed refusal.
///   Scripted:   reply looked up by sample_id.
class MockModel final : public LanguageModel {
 public:
  static std::shared_ptr<MockModel> extractive(const std::vector<corpus::QASample>& samples,
                                               std::string name = "mock:extractive");
  static std::shared_ptr<MockModel> echo(std::string name = "mock:echo");
  static std::shared_ptr<MockModel> refuse(std::string name = "mock:refuse");
  static std::shared_ptr<MockModel> scripted(std::map<std::string, ScriptedReply> replies,
                                             std::optional<std::string> fallback = std::nullopt,
                                             std::string name = "mock:scripted");
  /// Scripted replies from JSONL records {"sample_id", "reply", "fail"?}.
  static std::shared_ptr<MockModel> scripted_from_file(const std::filesystem::path& path,
                                                       std::string name = "mock:scripted");

  std::string complete(const CompletionRequest& request) override;
  std::string model_name() const override { return name_; }
  bool cacheable() const override;
  std::size_t calls() const override { return calls_.load(); }
  MockBehavior behavior() const noexcept { return behavior_; }

 private:
  MockModel(MockBehavior behavior, std::string name);

  MockBehavior behavior_;
  std::string name_;
  std::map<std::string, std::vector<corpus::AnswerGroup>, std::less<>> answers_;
  std::map<std::string, ScriptedReply, std::less<>> replies_;
  std::optional<std::string> fallback_;
  std::atomic<std::size_t> calls_{0};
};

/// Model backed by an arbitrary function; for experiments and tests.
class CallbackModel final : public LanguageModel {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;

  CallbackModel(std::string name, Fn fn, bool cacheable = false)
      : name_(std::move(name)), fn_(std::move(fn)), cacheable_(cacheable) {}

  std::string complete(const CompletionRequest& request) override;
  std::string model_name() const override { return name_; }
  bool cacheable() const override { return cacheable_; }
  std::size_t calls() const override { return calls_.load(); }

 private:
  std::string name_;
  Fn fn_;
  bool cacheable_;
  std::atomic<std::size_t> calls_{0};
};

/// Bodies of the `Document [i] (Title: t): body` lines in a prompt, in order.
/// This is what the Extractive mock reads.
std::vector<std::string> shown_document_bodies(const prompting::ChatPrompt& prompt);

/// On-disk content-addressed completion cache. Layout:
///   <dir>/<key[0:2]>/<key>.json  with {"key","model","decode","prompt","completion"}
/// Writes go through a temporary file and rename, so concurrent writers of
/// the same key are idempotent.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(const std::string& model, const prompting::ChatPrompt& prompt,
                         const DecodeParams& decode);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& model, const prompting::ChatPrompt& prompt,
           const DecodeParams& decode, const std::string& completion) const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path dir_;
};

struct Completion {
  std::optional<std::string> text;
  ErrorKind error_kind = ErrorKind::kTransport;
  std::string error;
  std::chrono::nanoseconds latency{0};

  bool ok() const noexcept { return text.has_value(); }
};

/// Single access point to a model plus optional cache.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<LanguageModel> model,
                   std::shared_ptr<const ResponseCache> cache = nullptr);

  /// Cache first, then the model. Errors propagate.
  std::string complete(const CompletionRequest& request) const;

  /// output[i] answers requests[i]; at most `parallelism` calls in flight;
  /// per-item failures are captured, not thrown. Throws ArgumentError for
  /// parallelism < 1.
  std::vector<Completion> batch_complete(std::span<const CompletionRequest> requests,
                                         int parallelism) const;

  std::string model_name() const { return model_->model_name(); }
  LanguageModel& model() const noexcept { return *model_; }
  std::size_t cache_hits() const noexcept { return cache_hits_->load(); }

 private:
  std::shared_ptr<LanguageModel> model_;
  std::shared_ptr<const ResponseCache> cache_;
  std::shared_ptr<std::atomic<std::size_t>> cache_hits_;
};

}  // namespace rrag::lm
