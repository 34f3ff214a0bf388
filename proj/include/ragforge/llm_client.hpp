#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

namespace ragforge::llm {

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  double top_p = 1.0;
  std::size_t n = 1;
  std::size_t max_tokens = 512;

  void validate() const;  // throws InputError
};

struct CompletionResult {
  std::vector<std::string> samples;  // exactly n entries
  std::string provider;
  std::uint64_t latency_ms = 0;
};

// Implementations must be safe for concurrent calls.
class Client {
 public:
  virtual ~Client() = default;
  virtual std::string name() const = 0;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

// Deterministic test provider. Lookup order per request:
//   1. fixtures keyed by prompt_hash(prompt),
//   2. a responder callback,
//   3. a round-robin script (each call consumes n consecutive entries).
// When none applies, complete() throws FixtureMissError naming the hash.
class ScriptedClient : public Client {
 public:
  using Responder = std::function<std::string(const CompletionRequest&, std::size_t sample)>;

  ScriptedClient() = default;

  // Loads "<hash>.txt" (one sample) and "<hash>.json" ({"samples": [...]}) files.
  static std::unique_ptr<ScriptedClient> from_directory(const std::string& dir);

  void add_fixture(const std::string& prompt_hash, std::vector<std::string> samples);
  void add_fixture_for_prompt(const std::string& prompt, std::vector<std::string> samples);
  void set_script(std::vector<std::string> script);
  void set_responder(Responder responder);

  std::string name() const override { return "scripted"; }
  CompletionResult complete(const CompletionRequest& request) override;

  std::vector<CompletionRequest> requests() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> fixtures_;
  std::vector<std::string> script_;
  std::size_t script_pos_ = 0;
  Responder responder_;
  std::vector<CompletionRequest> log_;
};

struct HttpConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1/completions
  std::string model;
  std::string api_key;   // never logged
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{1000};
};

// Posts {"model","prompt","temperature","top_p","n","max_tokens"} and reads
// choices[].text (or choices[].message.content). Connection failures, 429 and
// 5xx are retried with exponential backoff; other statuses fail immediately.
class HttpClient : public Client {
 public:
  explicit HttpClient(HttpConfig cfg);
  std::string name() const override { return "http"; }
  CompletionResult complete(const CompletionRequest& request) override;

 private:
  HttpConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

// Reads RAGFORGE_LLM_API_KEY; empty when unset.
std::string api_key_from_env();
// "sk-abcd...wxyz" style masking for logs.
std::string redact_secret(const std::string& secret);

// Bounds in-flight calls on a wrapped client.
class BoundedClient : public Client {
 public:
  BoundedClient(Client& inner, std::ptrdiff_t max_in_flight = 4);
  std::string name() const override { return inner_.name(); }
  CompletionResult complete(const CompletionRequest& request) override;

 private:
  Client& inner_;
  std::counting_semaphore<1024> slots_;
};

}  // namespace ragforge::llm
