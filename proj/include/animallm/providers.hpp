#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "animallm/errors.hpp"

namespace animallm {

struct DecodeParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::optional<std::int64_t> seed;

  bool operator==(const DecodeParams&) const = default;
};

struct ModelSpec {
  std::string provider_id;
  std::string model_name;
  DecodeParams decode;

  // The identity recorded in manifests and record keys, e.g. "mock:7",
  // "openai:gpt-4-1106-preview".
  std::string id() const;
};

// Parses CLI model strings: "mock:7", "const:90", "garbage",
// "openai:gpt-4-1106-preview", "anthropic:claude-2.1".
ModelSpec parse_model_spec(const std::string& text);

struct ChatRequest {
  std::string system_text;  // perspective framing, may be empty
  std::string user_text;    // nonempty
  DecodeParams decode;

  bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { Complete, Truncated, RefusedByService };

std::string to_string(FinishReason reason);
FinishReason finish_reason_from_string(const std::string& s);

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Complete;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{200};
  double backoff_multiplier = 2.0;
  int max_concurrent_per_provider = 4;
};

class ProviderError : public std::runtime_error {
 public:
  enum class Kind { Transport, Auth, RateLimited, RateLimitExhausted, Timeout };

  ProviderError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Transport for one provider. Implementations must be safe for concurrent
// send() calls. Refusal text from a model is a normal response (refusals are
// data in this harness), not an error.
class ChatAdapter {
 public:
  virtual ~ChatAdapter() = default;

  // Throws ProviderError::Auth when the adapter cannot possibly succeed
  // (e.g. missing credential). Called before any request is issued.
  virtual void preflight(const ModelSpec& spec) const { (void)spec; }

  virtual ChatResponse send(const ModelSpec& spec, const ChatRequest& req) = 0;
};

// Caps in-flight calls per provider.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(int limit) : limit_(limit) {}

  class Permit {
   public:
    explicit Permit(ConcurrencyGate& gate) : gate_(gate) { gate_.acquire(); }
    ~Permit() { gate_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ConcurrencyGate& gate_;
  };

 private:
  void acquire();
  void release();

  int limit_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Wraps an adapter with the retry/rate-limit policy. Auth errors are never
// retried; rate-limit, transport and timeout errors are retried with
// exponential backoff until max_attempts, at which point a final rate-limit
// rejection surfaces as RateLimitExhausted. Thread-safe; at most
// max_concurrent_per_provider sends are in flight at once.
class ProviderClient {
 public:
  ProviderClient(std::shared_ptr<ChatAdapter> adapter, RetryPolicy policy,
                 Sleeper sleeper = {});

  ChatResponse complete(const ModelSpec& spec, const ChatRequest& req) const;
  void preflight(const ModelSpec& spec) const { adapter_->preflight(spec); }
  const RetryPolicy& policy() const { return policy_; }

 private:
  std::shared_ptr<ChatAdapter> adapter_;
  RetryPolicy policy_;
  Sleeper sleep_;
  mutable ConcurrencyGate gate_;
};

// provider_id -> shared client. Registration happens at setup; lookups are
// safe from any thread afterwards.
class ProviderRegistry {
 public:
  // mock, const, garbage, fail (offline), openai, anthropic (remote).
  static ProviderRegistry with_default_providers();

  void register_adapter(const std::string& provider_id,
                        std::shared_ptr<ChatAdapter> adapter,
                        RetryPolicy policy = {});
  bool has(const std::string& provider_id) const;
  ProviderClient& client_for(const ModelSpec& spec);  // ValidationError if unknown

 private:
  std::map<std::string, std::unique_ptr<ProviderClient>> clients_;
};

// Adds the "openai" and "anthropic" chat-completion adapters. Credentials
// come from ANIMALLM_OPENAI_KEY / ANIMALLM_ANTHROPIC_KEY; a missing key
// fails preflight before any network send.
void register_remote_providers(ProviderRegistry& registry);

// Deterministic offline stand-in: the response text is a pure function of
// (seed, stable hash of req). Requests carrying the evaluation-rubric marker
// phrase get a well-formed evaluator payload with hash-derived scores in
// [0,100]; other requests get a synthetic answer with a "Reasoning:" section.
ChatResponse mock_complete(std::int64_t seed, const ChatRequest& req);

// Marker build_eval_instruction puts first in every evaluation request.
inline constexpr const char* kEvalMarker = "Perform an in-depth evaluation";

}  // namespace animallm
