#include "ragforge/llm_client.hpp"

#include <cstdlib>
#include <filesystem>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "ragforge/errors.hpp"
#include "ragforge/jsonl.hpp"
#include "ragforge/text.hpp"

namespace ragforge::llm {

void CompletionRequest::validate() const {
  if (prompt.empty()) throw InputError("completion prompt is empty");
  if (n < 1) throw InputError("completion n must be >= 1");
  if (temperature < 0.0) throw InputError("completion temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw InputError("completion top_p must be in (0, 1]");
  if (max_tokens < 1) throw InputError("completion max_tokens must be >= 1");
}

namespace {

std::uint64_t elapsed_ms(std::chrono::steady_clock::time_point start) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
}

}  // namespace

std::unique_ptr<ScriptedClient> ScriptedClient::from_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("fixture directory not found: " + dir);
  auto client = std::make_unique<ScriptedClient>();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const std::string hash = p.stem().string();
    if (p.extension() == ".txt") {
      client->add_fixture(hash, {read_file(p.string())});
    } else if (p.extension() == ".json") {
      json j = json::parse(read_file(p.string()), nullptr, false);
      if (j.is_discarded() || !j.contains("samples") || !j["samples"].is_array()) {
        throw FormatError("bad fixture file " + p.string());
      }
      client->add_fixture(hash, j["samples"].get<std::vector<std::string>>());
    }
  }
  return client;
}

void ScriptedClient::add_fixture(const std::string& hash, std::vector<std::string> samples) {
  std::lock_guard lock(mu_);
  fixtures_[hash] = std::move(samples);
}

void ScriptedClient::add_fixture_for_prompt(const std::string& prompt, std::vector<std::string> samples) {
  add_fixture(prompt_hash(prompt), std::move(samples));
}

void ScriptedClient::set_script(std::vector<std::string> script) {
  std::lock_guard lock(mu_);
  script_ = std::move(script);
  script_pos_ = 0;
}

void ScriptedClient::set_responder(Responder responder) {
  std::lock_guard lock(mu_);
  responder_ = std::move(responder);
}

CompletionResult ScriptedClient::complete(const CompletionRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::string hash = prompt_hash(request.prompt);
  std::lock_guard lock(mu_);
  log_.push_back(request);
  spdlog::debug("scripted llm: prompt={} n={}", hash, request.n);

  CompletionResult out;
  out.provider = name();
  if (auto it = fixtures_.find(hash); it != fixtures_.end() && !it->second.empty()) {
    for (std::size_t i = 0; i < request.n; ++i) out.samples.push_back(it->second[i % it->second.size()]);
  } else if (responder_) {
    for (std::size_t i = 0; i < request.n; ++i) out.samples.push_back(responder_(request, i));
  } else if (!script_.empty()) {
    for (std::size_t i = 0; i < request.n; ++i) {
      out.samples.push_back(script_[script_pos_ % script_.size()]);
      ++script_pos_;
    }
  } else {
    throw FixtureMissError(hash);
  }
  out.latency_ms = elapsed_ms(start);
  return out;
}

std::vector<CompletionRequest> ScriptedClient::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t ScriptedClient::call_count() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

HttpClient::HttpClient(HttpConfig cfg) : cfg_(std::move(cfg)) {
  const std::string& url = cfg_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("llm.endpoint must be an absolute URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (cfg_.max_attempts < 1) cfg_.max_attempts = 1;
}

CompletionResult HttpClient::complete(const CompletionRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::string hash = prompt_hash(request.prompt);

  json body = {{"model", cfg_.model},       {"prompt", request.prompt}, {"temperature", request.temperature},
               {"top_p", request.top_p},    {"n", request.n},           {"max_tokens", request.max_tokens}};
  const std::string payload = body.dump();

  httplib::Client cli(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    spdlog::debug("http llm: prompt={} attempt={}", hash, attempt);
    auto res = cli.Post(path_, headers, payload, "application/json");
    if (res && res->status == 200) {
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array()) {
        throw TransportError("malformed completion response for prompt " + hash);
      }
      CompletionResult out;
      out.provider = name();
      for (const auto& choice : reply["choices"]) {
        if (choice.contains("text") && choice["text"].is_string()) {
          out.samples.push_back(choice["text"].get<std::string>());
        } else if (choice.contains("message") && choice["message"].contains("content")) {
          out.samples.push_back(choice["message"]["content"].get<std::string>());
        }
      }
      if (out.samples.size() != request.n) {
        throw TransportError("backend returned " + std::to_string(out.samples.size()) + " samples, expected " +
                             std::to_string(request.n));
      }
      out.latency_ms = elapsed_ms(start);
      return out;
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < cfg_.max_attempts) {
      std::this_thread::sleep_for(cfg_.backoff_base * (1 << (attempt - 1)));
    }
  }
  throw TransportError("LLM backend " + scheme_host_port_ + " failed for prompt " + hash + ": " + last_error);
}

std::string api_key_from_env() {
  const char* v = std::getenv("RAGFORGE_LLM_API_KEY");
  return v ? std::string(v) : std::string{};
}

std::string redact_secret(const std::string& secret) {
  if (secret.empty()) return "<unset>";
  if (secret.size() <= 8) return "****";
  return secret.substr(0, 3) + "..." + secret.substr(secret.size() - 2);
}

BoundedClient::BoundedClient(Client& inner, std::ptrdiff_t max_in_flight)
    : inner_(inner), slots_(std::max<std::ptrdiff_t>(1, std::min<std::ptrdiff_t>(max_in_flight, 1024))) {}

CompletionResult BoundedClient::complete(const CompletionRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_.complete(request);
}

}  // namespace ragforge::llm
