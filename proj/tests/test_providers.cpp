#include <doctest.h>

#include <cstdlib>
#include <set>
#include <thread>

#include "animallm/providers.hpp"
#include "animallm/scoring.hpp"
#include "test_support.hpp"

using namespace animallm;
using namespace animallm::testing;

TEST_CASE("model spec parsing") {
  ModelSpec mock = parse_model_spec("mock:7");
  CHECK(mock.provider_id == "mock");
  CHECK(mock.model_name == "7");
  CHECK(mock.id() == "mock:7");

  ModelSpec openai = parse_model_spec("openai:gpt-4-1106-preview");
  CHECK(openai.provider_id == "openai");
  CHECK(openai.model_name == "gpt-4-1106-preview");

  CHECK(parse_model_spec("garbage").id() == "garbage");
  CHECK_THROWS_AS(parse_model_spec(""), ValidationError);
}

TEST_CASE("mock provider is deterministic") {
  ChatRequest req{"system framing", "What should we do with cows?", {}};
  ChatResponse a = mock_complete(7, req);
  ChatResponse b = mock_complete(7, req);
  CHECK(a.text == b.text);
  CHECK(a.finish_reason == FinishReason::Complete);
  CHECK(a.latency.count() == 0);
}

TEST_CASE("mock evaluator payloads parse to in-range scores") {
  ChatRequest req;
  req.user_text = std::string(kEvalMarker) + " for the below Response...";
  ChatResponse res = mock_complete(1, req);
  ParseOutcome out = parse_scores(res.text);
  CHECK(out.parse_mode == ParseMode::Structured);
  REQUIRE(out.score.s1.has_value());
  REQUIRE(out.score.s2.has_value());
  CHECK((*out.score.s1 >= 0 && *out.score.s1 <= 100));
  CHECK((*out.score.s2 >= 0 && *out.score.s2 <= 100));
}

TEST_CASE("different seeds give mostly distinct texts") {
  ChatRequest req{"", "Fixed request body", {}};
  std::set<std::string> texts;
  for (int seed = 0; seed < 100; ++seed) texts.insert(mock_complete(seed, req).text);
  CHECK(texts.size() >= 95);
}

TEST_CASE("retry succeeds after scripted rate-limit rejections") {
  auto adapter = std::make_shared<FlakyAdapter>(2);
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.base_backoff = std::chrono::milliseconds(1);
  std::vector<std::chrono::milliseconds> delays;
  ProviderClient client(adapter, policy,
                        [&](std::chrono::milliseconds d) { delays.push_back(d); });

  ChatResponse res = client.complete(ModelSpec{"scripted", "", {}}, {"", "hello", {}});
  CHECK(res.attempt_count == 3);
  REQUIRE(delays.size() == 2);
  CHECK(delays[0] <= delays[1]);  // backoff never decreases
}

TEST_CASE("rate limit exhaustion surfaces after max_attempts") {
  auto adapter = std::make_shared<FlakyAdapter>(2);
  RetryPolicy policy;
  policy.max_attempts = 2;
  policy.base_backoff = std::chrono::milliseconds(1);
  ProviderClient client(adapter, policy, [](std::chrono::milliseconds) {});
  try {
    client.complete(ModelSpec{"scripted", "", {}}, {"", "hello", {}});
    FAIL("expected ProviderError");
  } catch (const ProviderError& err) {
    CHECK(err.kind() == ProviderError::Kind::RateLimitExhausted);
  }
}

TEST_CASE("auth errors are not retried") {
  int calls = 0;
  auto adapter = std::make_shared<ScriptedAdapter>([&](const ModelSpec&, const ChatRequest&) -> ChatResponse {
    ++calls;
    throw ProviderError(ProviderError::Kind::Auth, "no credential");
  });
  ProviderClient client(adapter, {}, [](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(client.complete(ModelSpec{"scripted", "", {}}, {"", "x", {}}), ProviderError);
  CHECK(calls == 1);
}

TEST_CASE("remote adapters fail preflight without credentials") {
  unsetenv("ANIMALLM_OPENAI_KEY");
  unsetenv("ANIMALLM_ANTHROPIC_KEY");
  ProviderRegistry registry = ProviderRegistry::with_default_providers();
  for (const char* model : {"openai:gpt-4-1106-preview", "anthropic:claude-2.1"}) {
    ModelSpec spec = parse_model_spec(model);
    try {
      registry.client_for(spec).preflight(spec);
      FAIL("expected auth error for ", model);
    } catch (const ProviderError& err) {
      CHECK(err.kind() == ProviderError::Kind::Auth);
    }
  }
}

TEST_CASE("unknown providers are rejected") {
  ProviderRegistry registry = ProviderRegistry::with_default_providers();
  CHECK_THROWS_AS(registry.client_for(parse_model_spec("nope:model")), ValidationError);
}

TEST_CASE("in-flight requests never exceed the per-provider cap") {
  auto probe = std::make_shared<ConcurrencyProbeAdapter>();
  RetryPolicy policy;
  policy.max_concurrent_per_provider = 3;
  ProviderClient client(probe, policy);

  std::vector<std::thread> threads;
  for (int t = 0; t < 16; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 5; ++i) {
        client.complete(ModelSpec{"probe", "", {}}, {"", "ping", {}});
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(probe->max_seen() <= 3);
  CHECK(probe->max_seen() >= 1);
}

TEST_CASE("complete leaves the request untouched") {
  ChatRequest req{"sys", "body", {}};
  ChatRequest copy = req;
  auto adapter = std::make_shared<ScriptedAdapter>([](const ModelSpec&, const ChatRequest&) {
    ChatResponse res;
    res.text = "fine";
    return res;
  });
  ProviderClient client(adapter, {});
  client.complete(ModelSpec{"scripted", "", {}}, req);
  CHECK(req == copy);
}

TEST_CASE("empty user text is rejected before any send") {
  auto adapter = std::make_shared<ScriptedAdapter>([](const ModelSpec&, const ChatRequest&) {
    ChatResponse res;
    return res;
  });
  ProviderClient client(adapter, {});
  CHECK_THROWS_AS(client.complete(ModelSpec{"scripted", "", {}}, {"", "", {}}), ValidationError);
}
