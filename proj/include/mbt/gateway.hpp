#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mbt {

enum class Role { system, user, assistant };
std::string_view to_string(Role r) noexcept;
Role parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 32768;
  std::string seed_tag;
  // Provider-specific pass-through (e.g. "high"); folded into the digest only when set.
  std::optional<std::string> reasoning_effort;

  /// Throws ConfigError when messages are empty or sampling values are out of range.
  void validate() const;
};

/// Sampling knobs shared by every request a component issues.
struct Sampling {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 32768;
  std::optional<std::string> reasoning_effort;
};

CompletionRequest make_request(std::string model, std::vector<ChatMessage> messages,
                               const Sampling& sampling, std::string seed_tag);

enum class FinishReason { stop, length, other };
std::string_view to_string(FinishReason f) noexcept;
FinishReason parse_finish_reason(std::string_view s) noexcept;

struct CompletionResult {
  std::string content;
  std::optional<std::string> reasoning;
  FinishReason finish_reason = FinishReason::stop;
  std::optional<std::int64_t> reported_completion_tokens;
  bool cached = false;

  bool operator==(const CompletionResult&) const = default;
};

nlohmann::ordered_json to_json(const CompletionResult& r);
CompletionResult result_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const CompletionRequest& r);

/// Hex SHA-256 over (model, messages, temperature, top_p, max_tokens, seed_tag).
std::string request_digest(const CompletionRequest& request);

struct ReasoningSplit {
  std::string trace;
  std::string final_text;
  bool degraded = false;  // opened a think block that never closed
};

/// Separates the reasoning trace from the answer-bearing text. A reasoning channel
/// wins; otherwise a <think>...</think> block is split off; otherwise both halves
/// are the whole content.
ReasoningSplit extract_reasoning(const CompletionResult& result);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

/// 408, 429, 5xx, and status 0 (timeout / connection failure).
bool is_retryable_status(int status) noexcept;

/// One round trip to an endpoint. Implementations throw TransportError.
class Transport {
public:
  virtual ~Transport() = default;
  virtual CompletionResult send(const CompletionRequest& request) = 0;
  virtual bool uses_network() const noexcept { return true; }
};

struct HttpEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::chrono::seconds timeout{600};
};

/// OpenAI-compatible POST {base_url}/chat/completions.
class HttpTransport final : public Transport {
public:
  explicit HttpTransport(HttpEndpoint endpoint);
  CompletionResult send(const CompletionRequest& request) override;

  static nlohmann::ordered_json request_body(const CompletionRequest& request);
  /// Parses a chat-completions response body; throws TransportError on bad shape.
  static CompletionResult parse_response(std::string_view body);

private:
  HttpEndpoint endpoint_;
  std::string origin_;
  std::string path_;
};

/// Canned results keyed by request digest.
class FixtureStore {
public:
  FixtureStore() = default;
  static FixtureStore load(const std::filesystem::path& jsonl);
  void save(const std::filesystem::path& jsonl) const;

  void add(const std::string& digest, CompletionResult result);
  void add(const CompletionRequest& request, CompletionResult result);
  const CompletionResult* find(const std::string& digest) const;
  /// Known digests sharing the longest hex prefix with `digest`, best first.
  std::vector<std::string> nearest(const std::string& digest, std::size_t k = 3) const;
  std::size_t size() const noexcept { return entries_.size(); }

private:
  std::map<std::string, CompletionResult> entries_;
};

/// Deterministic lookup; throws MissingFixtureError for unknown digests.
CompletionResult replay(const CompletionRequest& request, const FixtureStore& fixtures);

class FixtureTransport final : public Transport {
public:
  explicit FixtureTransport(std::shared_ptr<const FixtureStore> fixtures)
      : fixtures_(std::move(fixtures)) {}
  CompletionResult send(const CompletionRequest& request) override { return replay(request, *fixtures_); }
  bool uses_network() const noexcept override { return false; }

private:
  std::shared_ptr<const FixtureStore> fixtures_;
};

/// Content-addressed response cache, one file per digest. Writes go to a temp
/// file that is renamed into place, so concurrent writers converge.
class ResponseCache {
public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<CompletionResult> get(const std::string& digest) const;
  void put(const std::string& digest, const CompletionResult& result) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

private:
  std::filesystem::path dir_;
};

struct GatewayOptions {
  RetryPolicy retry;
  std::size_t concurrency = 8;
  std::optional<std::filesystem::path> cache_dir;
  // Replaced in tests so backoff does not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
  std::uint64_t transport_calls = 0;
  std::uint64_t network_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

class Gateway {
public:
  Gateway(std::shared_ptr<Transport> transport, GatewayOptions options = {});

  CompletionResult complete(const CompletionRequest& request) const {
    return complete(request, options_.retry);
  }
  /// Cache lookup, then up to policy.max_attempts transport calls with exponential
  /// backoff on retryable failures. Throws TransportError carrying the attempt log.
  CompletionResult complete(const CompletionRequest& request, const RetryPolicy& policy) const;

  GatewayStats stats() const noexcept;
  std::size_t concurrency() const noexcept { return options_.concurrency; }

private:
  std::shared_ptr<Transport> transport_;
  GatewayOptions options_;
  std::optional<ResponseCache> cache_;
  std::unique_ptr<std::counting_semaphore<4096>> slots_;
  mutable std::atomic<std::uint64_t> transport_calls_{0};
  mutable std::atomic<std::uint64_t> network_calls_{0};
  mutable std::atomic<std::uint64_t> cache_hits_{0};
  mutable std::atomic<std::uint64_t> retries_{0};
};

}  // namespace mbt
