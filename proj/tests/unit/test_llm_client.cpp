#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "httplib.h"
#include "ragforge/errors.hpp"
#include "ragforge/llm_client.hpp"
#include "ragforge/text.hpp"
#include "test_util.hpp"

using namespace ragforge;
using namespace ragforge::llm;

namespace {

CompletionRequest req(const std::string& prompt, std::size_t n = 1) {
  CompletionRequest r;
  r.prompt = prompt;
  r.n = n;
  return r;
}

// Minimal completion backend. The first `fail_first` posts get `fail_status`;
// after that each choice text is "len=<prompt length>#<i>".
class StubServer {
 public:
  StubServer(int fail_first = 0, int fail_status = 503) : fail_first_(fail_first) {
    server_.Post("/v1/completions", [this, fail_status](const httplib::Request& rq, httplib::Response& rs) {
      ++hits_;
      last_auth_ = rq.get_header_value("Authorization");
      if (hits_ <= fail_first_) {
        rs.status = fail_status;
        return;
      }
      auto body = json::parse(rq.body);
      last_body_ = body;
      json choices = json::array();
      const auto n = body["n"].get<int>();
      for (int i = 0; i < n; ++i)
        choices.push_back({{"text", "len=" + std::to_string(body["prompt"].get<std::string>().size()) + "#" +
                                        std::to_string(i)}});
      rs.set_content(json{{"choices", choices}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions"; }
  int hits() const { return hits_; }
  json last_body() const { return last_body_; }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int fail_first_;
  std::atomic<int> hits_{0};
  json last_body_;
  std::string last_auth_;
};

HttpConfig http_cfg(const std::string& endpoint, int attempts = 3) {
  HttpConfig c;
  c.endpoint = endpoint;
  c.model = "stub";
  c.max_attempts = attempts;
  c.backoff_base = std::chrono::milliseconds(5);
  c.timeout = std::chrono::milliseconds(2000);
  return c;
}

}  // namespace

TEST(CompletionRequest, Validation) {
  EXPECT_THROW(req("").validate(), InputError);
  EXPECT_THROW(req("p", 0).validate(), InputError);
  auto r = req("p");
  r.top_p = 0;
  EXPECT_THROW(r.validate(), InputError);
  r.top_p = 1;
  r.temperature = -1;
  EXPECT_THROW(r.validate(), InputError);
  EXPECT_NO_THROW(req("p").validate());
}

TEST(ScriptedClient, OneCannedAnswer) {
  ScriptedClient c;
  c.set_script({"the answer"});
  auto r = c.complete(req("anything"));
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0], "the answer");
  EXPECT_EQ(r.provider, "scripted");
}

TEST(ScriptedClient, ScriptOrderForN) {
  ScriptedClient c;
  c.set_script({"a", "b", "c"});
  auto r = c.complete(req("x", 3));
  EXPECT_EQ(r.samples, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(c.complete(req("x", 2)).samples, (std::vector<std::string>{"a", "b"}));
}

TEST(ScriptedClient, FixtureBeatsResponderBeatsScript) {
  ScriptedClient c;
  c.set_script({"script"});
  c.set_responder([](const CompletionRequest& r, std::size_t i) { return r.prompt + std::to_string(i); });
  c.add_fixture_for_prompt("fixed", {"fx1", "fx2"});
  EXPECT_EQ(c.complete(req("fixed", 3)).samples, (std::vector<std::string>{"fx1", "fx2", "fx1"}));
  EXPECT_EQ(c.complete(req("other", 2)).samples, (std::vector<std::string>{"other0", "other1"}));
  EXPECT_EQ(c.call_count(), 2u);
  EXPECT_EQ(c.requests()[1].prompt, "other");
}

TEST(ScriptedClient, MissNamesHash) {
  ScriptedClient c;
  try {
    c.complete(req("nothing here"));
    FAIL();
  } catch (const FixtureMissError& e) {
    EXPECT_EQ(e.prompt_hash(), prompt_hash("nothing here"));
    EXPECT_NE(std::string(e.what()).find(prompt_hash("nothing here")), std::string::npos);
  }
}

TEST(ScriptedClient, FromDirectory) {
  testutil::TempDir dir;
  write_file(dir.file(prompt_hash("p1") + ".txt"), "one");
  write_file(dir.file(prompt_hash("p2") + ".json"), R"({"samples": ["x", "y"]})");
  write_file(dir.file("README.md"), "ignored");
  auto c = ScriptedClient::from_directory(dir.path().string());
  EXPECT_EQ(c->complete(req("p1")).samples[0], "one");
  EXPECT_EQ(c->complete(req("p2", 2)).samples, (std::vector<std::string>{"x", "y"}));
  EXPECT_THROW(ScriptedClient::from_directory(dir.file("missing")), IoError);
  write_file(dir.file("bad.json"), "{}");
  EXPECT_THROW(ScriptedClient::from_directory(dir.path().string()), FormatError);
}

TEST(ScriptedClient, Deterministic) {
  auto run = [] {
    ScriptedClient c;
    c.set_responder([](const CompletionRequest& r, std::size_t i) { return prompt_hash(r.prompt) + std::to_string(i); });
    std::vector<std::string> out;
    for (int i = 0; i < 20; ++i)
      for (auto& s : c.complete(req("q" + std::to_string(i % 7), 1 + i % 3)).samples) out.push_back(s);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(HttpClient, StubEchoesPromptLength) {
  StubServer stub;
  auto cfg = http_cfg(stub.endpoint());
  cfg.api_key = "sk-test-secret-123";
  HttpClient client(cfg);
  auto r = req("hello world", 2);
  r.temperature = 0.7;
  auto out = client.complete(r);
  EXPECT_EQ(out.samples, (std::vector<std::string>{"len=11#0", "len=11#1"}));
  EXPECT_EQ(out.provider, "http");
  auto body = stub.last_body();
  EXPECT_EQ(body["model"], "stub");
  EXPECT_EQ(body["n"], 2);
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
  EXPECT_EQ(stub.last_auth(), "Bearer sk-test-secret-123");
}

TEST(HttpClient, RetriesServerErrors) {
  StubServer stub(2, 503);
  HttpClient client(http_cfg(stub.endpoint(), 3));
  EXPECT_EQ(client.complete(req("abc")).samples[0], "len=3#0");
  EXPECT_EQ(stub.hits(), 3);
}

TEST(HttpClient, RetriesRateLimit) {
  StubServer stub(1, 429);
  HttpClient client(http_cfg(stub.endpoint(), 2));
  EXPECT_EQ(client.complete(req("abcd")).samples[0], "len=4#0");
  EXPECT_EQ(stub.hits(), 2);
}

TEST(HttpClient, GivesUpAfterMaxAttempts) {
  StubServer stub(100, 500);
  HttpClient client(http_cfg(stub.endpoint(), 3));
  EXPECT_THROW(client.complete(req("x")), TransportError);
  EXPECT_EQ(stub.hits(), 3);
}

TEST(HttpClient, ClientErrorNotRetried) {
  StubServer stub(100, 400);
  HttpClient client(http_cfg(stub.endpoint(), 3));
  EXPECT_THROW(client.complete(req("x")), TransportError);
  EXPECT_EQ(stub.hits(), 1);
}

TEST(HttpClient, UnreachableBackend) {
  int port;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  HttpClient client(http_cfg("http://127.0.0.1:" + std::to_string(port) + "/v1/completions", 2));
  EXPECT_THROW(client.complete(req("x")), TransportError);
  EXPECT_THROW(HttpClient(http_cfg("no-scheme")), ConfigError);
}

TEST(Secrets, Redaction) {
  EXPECT_EQ(redact_secret(""), "<unset>");
  EXPECT_EQ(redact_secret("short"), "****");
  const std::string key = "sk-abcdefghijklmnop";
  auto r = redact_secret(key);
  EXPECT_EQ(r.find("defghijklmn"), std::string::npos);
  EXPECT_LT(r.size(), key.size());
}

namespace {

class SlowClient : public Client {
 public:
  std::string name() const override { return "slow"; }
  CompletionResult complete(const CompletionRequest&) override {
    int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    ++calls;
    return CompletionResult{{"ok"}, name(), 2};
  }
  std::atomic<int> in_flight{0}, peak{0}, calls{0};
};

}  // namespace

TEST(BoundedClient, NeverExceedsLimit) {
  SlowClient inner;
  BoundedClient bounded(inner, 3);
  std::vector<std::thread> threads;
  for (int t = 0; t < 12; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 5; ++i) bounded.complete(req("p"));
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(inner.calls.load(), 60);
  EXPECT_LE(inner.peak.load(), 3);
  EXPECT_GE(inner.peak.load(), 2);
}
