#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "mbt/errors.hpp"
#include "mbt/gateway.hpp"

namespace mbt {

using nlohmann::json;
using nlohmann::ordered_json;

HttpTransport::HttpTransport(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  const std::string& url = endpoint_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint base_url needs a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_begin);
  std::string prefix = path_begin == std::string::npos ? std::string() : url.substr(path_begin);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
}

ordered_json HttpTransport::request_body(const CompletionRequest& request) {
  ordered_json body;
  body["model"] = request.model;
  auto msgs = ordered_json::array();
  for (const auto& m : request.messages) {
    msgs.push_back(ordered_json{{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = request.temperature;
  body["top_p"] = request.top_p;
  body["max_tokens"] = request.max_tokens;
  if (request.reasoning_effort) body["reasoning_effort"] = *request.reasoning_effort;
  return body;
}

CompletionResult HttpTransport::parse_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("unparseable response body: ") + e.what(), 200, false);
  }
  const auto& choices = j.value("choices", json::array());
  if (!choices.is_array() || choices.empty() || !choices[0].contains("message")) {
    throw TransportError("response has no choices[0].message", 200, false);
  }
  const json& choice = choices[0];
  const json& msg = choice["message"];
  CompletionResult r;
  if (msg.contains("content") && msg["content"].is_string()) r.content = msg["content"].get<std::string>();
  for (const char* key : {"reasoning_content", "reasoning"}) {
    if (msg.contains(key) && msg[key].is_string()) {
      r.reasoning = msg[key].get<std::string>();
      break;
    }
  }
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    r.finish_reason = parse_finish_reason(choice["finish_reason"].get<std::string>());
  } else {
    r.finish_reason = FinishReason::other;
  }
  if (j.contains("usage") && j["usage"].contains("completion_tokens") &&
      j["usage"]["completion_tokens"].is_number_integer()) {
    r.reported_completion_tokens = j["usage"]["completion_tokens"].get<std::int64_t>();
  }
  return r;
}

CompletionResult HttpTransport::send(const CompletionRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(endpoint_.timeout);
  client.set_write_timeout(std::chrono::seconds(60));
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

  auto res = client.Post(path_, headers, request_body(request).dump(), "application/json");
  if (!res) {
    throw TransportError("request failed: " + httplib::to_string(res.error()), 0, true);
  }
  if (res->status != 200) {
    std::string snippet = res->body.substr(0, 300);
    throw TransportError("HTTP " + std::to_string(res->status) + ": " + snippet, res->status,
                         is_retryable_status(res->status));
  }
  return parse_response(res->body);
}

}  // namespace mbt
