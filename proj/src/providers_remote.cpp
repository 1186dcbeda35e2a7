#include <chrono>
#include <cstdlib>
#include <string>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "animallm/providers.hpp"

namespace animallm {
namespace {

using json = nlohmann::json;

ProviderError error_for_status(int status, const std::string& body) {
  std::string msg = "HTTP " + std::to_string(status) + ": " + body.substr(0, 300);
  if (status == 401 || status == 403) return {ProviderError::Kind::Auth, msg};
  if (status == 429) return {ProviderError::Kind::RateLimited, msg};
  if (status == 408) return {ProviderError::Kind::Timeout, msg};
  return {ProviderError::Kind::Transport, msg};
}

std::string require_env(const char* var, const std::string& provider) {
  const char* value = std::getenv(var);
  if (value == nullptr || *value == '\0') {
    throw ProviderError(ProviderError::Kind::Auth,
                        provider + ": credential " + var + " is not set");
  }
  return value;
}

struct TimedResult {
  httplib::Result result;
  std::chrono::milliseconds latency;
};

TimedResult timed_post(const std::string& host, const httplib::Headers& headers,
                       const std::string& path, const std::string& body) {
  httplib::Client client(host);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  auto start = std::chrono::steady_clock::now();
  auto result = client.Post(path, headers, body, "application/json");
  auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return {std::move(result), latency};
}

class OpenAiAdapter final : public ChatAdapter {
 public:
  void preflight(const ModelSpec&) const override { require_env("ANIMALLM_OPENAI_KEY", "openai"); }

  ChatResponse send(const ModelSpec& spec, const ChatRequest& req) override {
    std::string key = require_env("ANIMALLM_OPENAI_KEY", "openai");

    json body;
    body["model"] = spec.model_name;
    body["temperature"] = req.decode.temperature;
    body["max_tokens"] = req.decode.max_output_tokens;
    if (req.decode.seed) body["seed"] = *req.decode.seed;
    json messages = json::array();
    if (!req.system_text.empty()) {
      messages.push_back({{"role", "system"}, {"content", req.system_text}});
    }
    messages.push_back({{"role", "user"}, {"content", req.user_text}});
    body["messages"] = messages;

    httplib::Headers headers = {{"Authorization", "Bearer " + key}};
    auto [result, latency] = timed_post("https://api.openai.com", headers,
                                        "/v1/chat/completions", body.dump());
    if (!result) {
      throw ProviderError(ProviderError::Kind::Transport,
                          "openai: " + httplib::to_string(result.error()));
    }
    if (result->status != 200) throw error_for_status(result->status, result->body);

    json reply = json::parse(result->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
      throw ProviderError(ProviderError::Kind::Transport, "openai: malformed completion payload");
    }
    const json& choice = reply["choices"][0];
    ChatResponse res;
    res.text = choice["message"].value("content", "");
    std::string finish = choice.value("finish_reason", "stop");
    if (finish == "length") {
      res.finish_reason = FinishReason::Truncated;
    } else if (finish == "content_filter") {
      res.finish_reason = FinishReason::RefusedByService;
    }
    // A nominally complete reply with no text is a service-side refusal.
    if (res.text.empty() && res.finish_reason == FinishReason::Complete) {
      res.finish_reason = FinishReason::RefusedByService;
    }
    res.latency = latency;
    return res;
  }
};

class AnthropicAdapter final : public ChatAdapter {
 public:
  void preflight(const ModelSpec&) const override {
    require_env("ANIMALLM_ANTHROPIC_KEY", "anthropic");
  }

  ChatResponse send(const ModelSpec& spec, const ChatRequest& req) override {
    std::string key = require_env("ANIMALLM_ANTHROPIC_KEY", "anthropic");

    json body;
    body["model"] = spec.model_name;
    body["temperature"] = req.decode.temperature;
    body["max_tokens"] = req.decode.max_output_tokens;
    if (!req.system_text.empty()) body["system"] = req.system_text;
    body["messages"] = json::array({{{"role", "user"}, {"content", req.user_text}}});

    httplib::Headers headers = {{"x-api-key", key}, {"anthropic-version", "2023-06-01"}};
    auto [result, latency] = timed_post("https://api.anthropic.com", headers,
                                        "/v1/messages", body.dump());
    if (!result) {
      throw ProviderError(ProviderError::Kind::Transport,
                          "anthropic: " + httplib::to_string(result.error()));
    }
    if (result->status != 200) throw error_for_status(result->status, result->body);

    json reply = json::parse(result->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("content")) {
      throw ProviderError(ProviderError::Kind::Transport, "anthropic: malformed message payload");
    }
    ChatResponse res;
    for (const auto& block : reply["content"]) {
      if (block.value("type", "") == "text") res.text += block.value("text", "");
    }
    if (reply.value("stop_reason", "end_turn") == "max_tokens") {
      res.finish_reason = FinishReason::Truncated;
    }
    if (res.text.empty() && res.finish_reason == FinishReason::Complete) {
      res.finish_reason = FinishReason::RefusedByService;
    }
    res.latency = latency;
    return res;
  }
};

}  // namespace

void register_remote_providers(ProviderRegistry& registry) {
  registry.register_adapter("openai", std::make_shared<OpenAiAdapter>());
  registry.register_adapter("anthropic", std::make_shared<AnthropicAdapter>());
}

}  // namespace animallm
