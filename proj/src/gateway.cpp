#include "mbt/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "mbt/errors.hpp"
#include "mbt/text.hpp"

namespace mbt {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw ConfigError("unknown message role '" + std::string(s) + "'");
}

std::string_view to_string(FinishReason f) noexcept {
  switch (f) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::other: return "other";
  }
  return "other";
}

FinishReason parse_finish_reason(std::string_view s) noexcept {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  return FinishReason::other;
}

void CompletionRequest::validate() const {
  if (messages.empty()) throw ConfigError("completion request has no messages");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
}

ordered_json to_json(const CompletionResult& r) {
  ordered_json j;
  j["content"] = r.content;
  j["reasoning"] = r.reasoning ? ordered_json(*r.reasoning) : ordered_json(nullptr);
  j["finish_reason"] = to_string(r.finish_reason);
  j["completion_tokens"] = r.reported_completion_tokens
                               ? ordered_json(*r.reported_completion_tokens)
                               : ordered_json(nullptr);
  return j;
}

CompletionResult result_from_json(const json& j) {
  CompletionResult r;
  r.content = j.value("content", std::string());
  if (auto it = j.find("reasoning"); it != j.end() && it->is_string()) r.reasoning = it->get<std::string>();
  r.finish_reason = parse_finish_reason(j.value("finish_reason", std::string("stop")));
  if (auto it = j.find("completion_tokens"); it != j.end() && it->is_number_integer()) {
    r.reported_completion_tokens = it->get<std::int64_t>();
  }
  return r;
}

ordered_json to_json(const CompletionRequest& r) {
  ordered_json j;
  j["model"] = r.model;
  auto msgs = ordered_json::array();
  for (const auto& m : r.messages) {
    msgs.push_back(ordered_json{{"role", to_string(m.role)}, {"content", m.content}});
  }
  j["messages"] = std::move(msgs);
  j["temperature"] = r.temperature;
  j["top_p"] = r.top_p;
  j["max_tokens"] = r.max_tokens;
  j["seed_tag"] = r.seed_tag;
  if (r.reasoning_effort) j["reasoning_effort"] = *r.reasoning_effort;
  return j;
}

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string request_digest(const CompletionRequest& request) {
  return sha256_hex(to_json(request).dump());
}

CompletionRequest make_request(std::string model, std::vector<ChatMessage> messages,
                               const Sampling& sampling, std::string seed_tag) {
  CompletionRequest r;
  r.model = std::move(model);
  r.messages = std::move(messages);
  r.temperature = sampling.temperature;
  r.top_p = sampling.top_p;
  r.max_tokens = sampling.max_tokens;
  r.seed_tag = std::move(seed_tag);
  r.reasoning_effort = sampling.reasoning_effort;
  return r;
}

ReasoningSplit extract_reasoning(const CompletionResult& result) {
  ReasoningSplit out;
  if (result.reasoning && !text::trim(*result.reasoning).empty()) {
    out.trace = std::string(text::trim(*result.reasoning));
    out.final_text = std::string(text::trim(result.content));
    return out;
  }
  constexpr std::string_view kOpen = "<think>";
  constexpr std::string_view kClose = "</think>";
  const std::string& c = result.content;
  const auto close = c.find(kClose);
  if (close != std::string::npos) {
    // Chat templates often inject the opening tag into the prompt, so the
    // completion may start mid-block with only a closing tag.
    const auto open = c.rfind(kOpen, close);
    const std::size_t body_begin = open == std::string::npos ? 0 : open + kOpen.size();
    const std::size_t prefix_end = open == std::string::npos ? 0 : open;
    out.trace = std::string(text::trim(std::string_view(c).substr(body_begin, close - body_begin)));
    std::string rest = c.substr(0, prefix_end) + c.substr(close + kClose.size());
    out.final_text = std::string(text::trim(rest));
    return out;
  }
  if (const auto open = c.find(kOpen); open != std::string::npos) {
    out.trace = std::string(text::trim(std::string_view(c).substr(open + kOpen.size())));
    out.degraded = true;
    return out;
  }
  out.trace = std::string(text::trim(c));
  out.final_text = out.trace;
  return out;
}

bool is_retryable_status(int status) noexcept {
  return status == 0 || status == 408 || status == 429 || (status >= 500 && status <= 599);
}

// ---------------------------------------------------------------------------
// Fixtures

MissingFixtureError::MissingFixtureError(std::string digest, std::vector<std::string> nearest)
    : Error([&] {
        std::string msg = "no fixture for request digest " + digest;
        if (!nearest.empty()) {
          msg += "; nearest known:";
          for (const auto& n : nearest) msg += " " + n;
        }
        return msg;
      }()),
      digest_(std::move(digest)),
      nearest_(std::move(nearest)) {}

FixtureStore FixtureStore::load(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw IoError("cannot open fixture file " + jsonl.string());
  FixtureStore store;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw RecordError(index, "", e.what());
    }
    if (!j.contains("digest") || !j.contains("result")) {
      throw RecordError(index, j.contains("digest") ? "result" : "digest", "missing field");
    }
    store.add(j["digest"].get<std::string>(), result_from_json(j["result"]));
    ++index;
  }
  return store;
}

void FixtureStore::save(const std::filesystem::path& jsonl) const {
  std::ofstream out(jsonl, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write fixture file " + jsonl.string());
  for (const auto& [digest, result] : entries_) {
    ordered_json j;
    j["digest"] = digest;
    j["result"] = to_json(result);
    out << j.dump() << '\n';
  }
}

void FixtureStore::add(const std::string& digest, CompletionResult result) {
  result.cached = false;
  entries_.insert_or_assign(digest, std::move(result));
}

void FixtureStore::add(const CompletionRequest& request, CompletionResult result) {
  add(request_digest(request), std::move(result));
}

const CompletionResult* FixtureStore::find(const std::string& digest) const {
  auto it = entries_.find(digest);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> FixtureStore::nearest(const std::string& digest, std::size_t k) const {
  std::vector<std::pair<std::size_t, std::string>> scored;
  scored.reserve(entries_.size());
  for (const auto& [known, _] : entries_) {
    const auto mismatch = std::mismatch(known.begin(), known.end(), digest.begin(), digest.end());
    scored.emplace_back(static_cast<std::size_t>(mismatch.first - known.begin()), known);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
  return out;
}

CompletionResult replay(const CompletionRequest& request, const FixtureStore& fixtures) {
  const std::string digest = request_digest(request);
  if (const CompletionResult* hit = fixtures.find(digest)) return *hit;
  throw MissingFixtureError(digest, fixtures.nearest(digest));
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<CompletionResult> ResponseCache::get(const std::string& digest) const {
  std::ifstream in(dir_ / (digest + ".json"));
  if (!in) return std::nullopt;
  try {
    json j = json::parse(in);
    return result_from_json(j);
  } catch (const json::exception&) {
    return std::nullopt;  // partial or foreign file; treat as a miss
  }
}

void ResponseCache::put(const std::string& digest, const CompletionResult& result) const {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const auto final_path = dir_ / (digest + ".json");
  const auto tmp = dir_ / (digest + ".tmp." + std::to_string(rng()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache entry " + tmp.string());
    out << to_json(result).dump() << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot commit cache entry " + final_path.string());
  }
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<Transport> transport, GatewayOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {
  if (!transport_) throw ConfigError("gateway requires a transport");
  options_.concurrency = std::clamp<std::size_t>(options_.concurrency, 1, 4096);
  if (options_.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
  slots_ = std::make_unique<std::counting_semaphore<4096>>(
      static_cast<std::ptrdiff_t>(options_.concurrency));
}

CompletionResult Gateway::complete(const CompletionRequest& request,
                                   const RetryPolicy& policy) const {
  request.validate();
  const std::string digest = request_digest(request);
  if (cache_) {
    if (auto hit = cache_->get(digest)) {
      ++cache_hits_;
      hit->cached = true;
      return *hit;
    }
  }

  std::vector<std::string> log;
  auto backoff = policy.initial_backoff;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      CompletionResult result;
      {
        slots_->acquire();
        struct Release {
          std::counting_semaphore<4096>& s;
          ~Release() { s.release(); }
        } release{*slots_};
        ++transport_calls_;
        if (transport_->uses_network()) ++network_calls_;
        result = transport_->send(request);
      }
      result.cached = false;
      if (cache_) cache_->put(digest, result);
      return result;
    } catch (const TransportError& e) {
      log.push_back("attempt " + std::to_string(attempt) + ": status " +
                    std::to_string(e.status()) + ": " + e.what());
      if (!e.retryable()) {
        throw TransportError("non-retryable failure: " + std::string(e.what()), e.status(), false,
                             std::move(log));
      }
      if (attempt == attempts) {
        throw TransportError("retries exhausted after " + std::to_string(attempts) + " attempts",
                             e.status(), true, std::move(log));
      }
      ++retries_;
      options_.sleep(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(std::llround(static_cast<double>(backoff.count()) * policy.multiplier)));
    }
  }
  throw TransportError("unreachable", 0, false, std::move(log));
}

GatewayStats Gateway::stats() const noexcept {
  return {transport_calls_.load(), network_calls_.load(), cache_hits_.load(), retries_.load()};
}

}  // namespace mbt
