#include "ragforge/service.hpp"

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::service {

namespace {

Reply error_reply(int status, const std::string& message) { return {status, json{{"error", message}}}; }

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InputError("request body must be a JSON object");
  return j;
}

std::string require_query(const json& j) {
  auto it = j.find("query");
  if (it == j.end() || !it->is_string()) throw InputError("field 'query' must be a string");
  std::string q = it->get<std::string>();
  if (trim(q).empty()) throw InputError("field 'query' must not be empty");
  return q;
}

std::vector<std::string> optional_products(const json& j) {
  std::vector<std::string> out;
  auto it = j.find("products");
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw InputError("field 'products' must be an array of strings");
  for (const auto& p : *it) {
    if (!p.is_string()) throw InputError("field 'products' must be an array of strings");
    out.push_back(p.get<std::string>());
  }
  return out;
}

}  // namespace

Service::Service(rag::PipelineDeps deps, ServiceOptions opts) : deps_(deps), opts_(std::move(opts)) {}

Service::~Service() { stop(); }

Reply Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  try {
    if (method == "GET" && path == "/health") {
      return {200, json{{"status", "ok"},
                        {"index_size", deps_.index.size()},
                        {"projection_version", deps_.index.projection_version()}}};
    }
    if (method == "GET" && path == "/config") {
      json products = json::array();
      for (const auto& p : deps_.catalog.products()) products.push_back(p.name);
      return {200, json{{"products", products},
                        {"k", deps_.config.k},
                        {"context_budget", deps_.config.context_budget},
                        {"min_score", deps_.config.min_score},
                        {"intent_enabled", deps_.config.intent_enabled}}};
    }
    if (method == "POST" && path == "/ask") {
      json req = parse_body(body);
      auto bundle = rag::answer(require_query(req), deps_, optional_products(req));
      return {200, bundle.to_json(true)};
    }
    if (method == "POST" && path == "/retrieve") {
      json req = parse_body(body);
      std::string query = require_query(req);
      std::size_t k = deps_.config.k;
      if (auto it = req.find("k"); it != req.end()) {
        if (!it->is_number_integer() || it->get<long long>() < 1 ||
            it->get<long long>() > static_cast<long long>(opts_.max_retrieve_k)) {
          throw InputError("field 'k' must be an integer in [1, " + std::to_string(opts_.max_retrieve_k) + "]");
        }
        k = it->get<std::size_t>();
      }
      auto items = rag::retrieve(query, k, deps_, optional_products(req));
      json arr = json::array();
      for (const auto& r : items) arr.push_back(rag::retrieved_to_json(r));
      return {200, json{{"query", query}, {"items", arr}}};
    }
    if (path == "/health" || path == "/config" || path == "/ask" || path == "/retrieve") {
      return error_reply(405, "method not allowed");
    }
    return error_reply(404, "not found: " + path);
  } catch (const rag::PipelineTransportError& e) {
    return {502, json{{"error", e.what()}, {"partial", e.partial().to_json(true)}}};
  } catch (const TransportError& e) {
    return error_reply(502, e.what());
  } catch (const InputError& e) {
    return error_reply(400, e.what());
  } catch (const Error& e) {
    spdlog::error("{} {} failed: {}", method, path, e.what());
    return error_reply(500, e.what());
  }
}

void Service::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    Reply r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get("/health", forward);
  server_->Get("/config", forward);
  server_->Post("/ask", forward);
  server_->Post("/retrieve", forward);
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server_->set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    Reply r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  });
  server_->set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", opts_.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

int Service::start(const std::string& host, int port) {
  install_routes();
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("serving on {}:{}", host, port_);
  return port_;
}

void Service::serve_blocking(const std::string& host, int port) {
  install_routes();
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  port_ = port;
  spdlog::info("serving on {}:{}", host, port_);
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ragforge::service
