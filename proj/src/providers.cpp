#include "animallm/providers.hpp"

#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "animallm/hash.hpp"

namespace animallm {

std::string ModelSpec::id() const {
  if (model_name.empty()) return provider_id;
  return provider_id + ":" + model_name;
}

ModelSpec parse_model_spec(const std::string& text) {
  if (text.empty()) throw ValidationError("model spec is empty");
  ModelSpec spec;
  std::size_t colon = text.find(':');
  if (colon == std::string::npos) {
    spec.provider_id = text;
  } else {
    spec.provider_id = text.substr(0, colon);
    spec.model_name = text.substr(colon + 1);
  }
  if (spec.provider_id.empty()) throw ValidationError("model spec '" + text + "' lacks a provider");
  return spec;
}

std::string to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Complete: return "complete";
    case FinishReason::Truncated: return "truncated";
    case FinishReason::RefusedByService: return "refused_by_service";
  }
  return "complete";
}

FinishReason finish_reason_from_string(const std::string& s) {
  if (s == "truncated") return FinishReason::Truncated;
  if (s == "refused_by_service") return FinishReason::RefusedByService;
  return FinishReason::Complete;
}

void ConcurrencyGate::acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void ConcurrencyGate::release() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

ProviderClient::ProviderClient(std::shared_ptr<ChatAdapter> adapter, RetryPolicy policy,
                               Sleeper sleeper)
    : adapter_(std::move(adapter)),
      policy_(policy),
      sleep_(std::move(sleeper)),
      gate_(policy.max_concurrent_per_provider) {
  if (policy_.max_attempts < 1) throw ValidationError("retry policy: max_attempts must be >= 1");
  if (policy_.backoff_multiplier <= 1.0) {
    throw ValidationError("retry policy: backoff_multiplier must be > 1");
  }
  if (policy_.max_concurrent_per_provider < 1) {
    throw ValidationError("retry policy: max_concurrent_per_provider must be >= 1");
  }
  if (!sleep_) {
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

ChatResponse ProviderClient::complete(const ModelSpec& spec, const ChatRequest& req) const {
  if (req.user_text.empty()) throw ValidationError("chat request: user_text is empty");
  auto backoff = policy_.base_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      ConcurrencyGate::Permit permit(gate_);
      ChatResponse res = adapter_->send(spec, req);
      res.attempt_count = attempt;
      return res;
    } catch (const ProviderError& err) {
      if (err.kind() == ProviderError::Kind::Auth) throw;
      if (attempt >= policy_.max_attempts) {
        if (err.kind() == ProviderError::Kind::RateLimited) {
          throw ProviderError(ProviderError::Kind::RateLimitExhausted,
                              std::string("rate limit not cleared after ") +
                                  std::to_string(attempt) + " attempts: " + err.what());
        }
        throw;
      }
      sleep_(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(std::llround(backoff.count() * policy_.backoff_multiplier)));
    }
  }
}

void ProviderRegistry::register_adapter(const std::string& provider_id,
                                        std::shared_ptr<ChatAdapter> adapter, RetryPolicy policy) {
  clients_[provider_id] = std::make_unique<ProviderClient>(std::move(adapter), policy);
}

bool ProviderRegistry::has(const std::string& provider_id) const {
  return clients_.count(provider_id) > 0;
}

ProviderClient& ProviderRegistry::client_for(const ModelSpec& spec) {
  auto it = clients_.find(spec.provider_id);
  if (it == clients_.end()) {
    throw ValidationError("unknown provider '" + spec.provider_id + "'");
  }
  return *it->second;
}

namespace {

using json = nlohmann::json;

std::string hex16(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

std::string request_fingerprint(std::int64_t seed, const ChatRequest& req) {
  std::ostringstream key;
  key << seed << '\x1f' << req.system_text << '\x1f' << req.user_text << '\x1f'
      << req.decode.temperature << '\x1f' << req.decode.max_output_tokens << '\x1f';
  if (req.decode.seed) key << *req.decode.seed;
  return key.str();
}

class MockAdapter final : public ChatAdapter {
 public:
  ChatResponse send(const ModelSpec& spec, const ChatRequest& req) override {
    return mock_complete(seed_of(spec), req);
  }

 private:
  static std::int64_t seed_of(const ModelSpec& spec) {
    try {
      return spec.model_name.empty() ? 0 : std::stoll(spec.model_name);
    } catch (const std::exception&) {
      throw ValidationError("mock model '" + spec.id() + "': expected mock:<integer seed>");
    }
  }
};

// Always returns the same parseable payload; "const:90" is a fixed-point
// evaluator for offline regeneration tests.
class ConstAdapter final : public ChatAdapter {
 public:
  ChatResponse send(const ModelSpec& spec, const ChatRequest& req) override {
    int value = value_of(spec);
    ChatResponse res;
    if (req.user_text.find(kEvalMarker) != std::string::npos) {
      nlohmann::ordered_json payload;
      payload["s1_score"] = value;
      payload["s1_justification"] = "Constant evaluator.";
      payload["s2_score"] = value;
      payload["s2_justification"] = "Constant evaluator.";
      res.text = payload.dump();
    } else {
      res.text = "Constant response (value " + std::to_string(value) +
                 ").\nReasoning:\nFixed by configuration.";
    }
    return res;
  }

 private:
  static int value_of(const ModelSpec& spec) {
    try {
      return spec.model_name.empty() ? 0 : std::stoi(spec.model_name);
    } catch (const std::exception&) {
      throw ValidationError("const model '" + spec.id() + "': expected const:<integer>");
    }
  }
};

// Never parseable; exercises the missing-score path end to end.
class GarbageAdapter final : public ChatAdapter {
 public:
  ChatResponse send(const ModelSpec&, const ChatRequest&) override {
    ChatResponse res;
    res.text = "### no usable content ###";
    return res;
  }
};

// Always fails with a transport error; exercises run-level failure paths.
class FailAdapter final : public ChatAdapter {
 public:
  ChatResponse send(const ModelSpec&, const ChatRequest&) override {
    throw ProviderError(ProviderError::Kind::Transport, "fail provider: scripted transport error");
  }
};

}  // namespace

ChatResponse mock_complete(std::int64_t seed, const ChatRequest& req) {
  const std::uint64_t h = stable_hash64(request_fingerprint(seed, req));
  ChatResponse res;
  res.finish_reason = FinishReason::Complete;
  res.latency = std::chrono::milliseconds(0);

  if (req.user_text.find(kEvalMarker) != std::string::npos) {
    nlohmann::ordered_json payload;
    payload["s1_score"] = static_cast<int>(h % 101);
    payload["s1_justification"] = "Deterministic mock S1 rationale " + hex16(h) + ".";
    payload["s2_score"] = static_cast<int>((h >> 32) % 101);
    payload["s2_justification"] = "Deterministic mock S2 rationale " + hex16(h) + ".";
    // Alternate plain and fenced payloads so bulk runs exercise both
    // parser entry points.
    if (h & 0x80) {
      res.text = "```json\n" + payload.dump() + "\n```";
    } else {
      res.text = payload.dump();
    }
    return res;
  }

  res.text = "Mock answer " + hex16(h) +
             ": opinions on this query differ and this deterministic stand-in takes none.\n"
             "Reasoning:\nDerived from fingerprint " +
             hex16(h) + " of the request.";
  return res;
}

ProviderRegistry ProviderRegistry::with_default_providers() {
  ProviderRegistry registry;
  registry.register_adapter("mock", std::make_shared<MockAdapter>());
  registry.register_adapter("const", std::make_shared<ConstAdapter>());
  registry.register_adapter("garbage", std::make_shared<GarbageAdapter>());
  registry.register_adapter("fail", std::make_shared<FailAdapter>());
  register_remote_providers(registry);
  return registry;
}

}  // namespace animallm
