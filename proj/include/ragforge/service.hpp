#pragma once

#include <memory>
#include <string>
#include <thread>

#include "ragforge/rag_pipeline.hpp"

namespace httplib {
class Server;
}

namespace ragforge::service {

struct ServiceOptions {
  std::string cors_origin = "*";
  std::size_t max_retrieve_k = 1000;
};

struct Reply {
  int status = 200;
  json body;
};

// JSON endpoints over the answering pipeline:
//   POST /ask       {query, products?}      -> AnswerBundle
//   POST /retrieve  {query, k?, products?}  -> {query, items}
//   GET  /health                             -> {status, index_size, projection_version}
//   GET  /config                             -> catalog products and serving defaults
// Requests share only immutable state, so handlers run concurrently.
class Service {
 public:
  explicit Service(rag::PipelineDeps deps, ServiceOptions opts = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Transport-free dispatch, also used by the HTTP layer.
  Reply handle(const std::string& method, const std::string& path, const std::string& body) const;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void serve_blocking(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  rag::PipelineDeps deps_;
  ServiceOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace ragforge::service
