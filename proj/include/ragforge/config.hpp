#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragforge/embedder.hpp"
#include "ragforge/evaluation.hpp"
#include "ragforge/finetune_dataset.hpp"
#include "ragforge/qa_generator.hpp"
#include "ragforge/rag_pipeline.hpp"
#include "ragforge/sanitizer.hpp"

namespace ragforge::config {

// Relative paths are resolved against the config file's directory.
struct Paths {
  std::string documents;   // source items JSONL
  std::string clicks;      // click log JSONL
  std::string pairs;       // training pairs JSONL
  std::string projection;  // .rfpj
  std::string index;       // .rfix
  std::string catalog;     // product catalog JSON
  std::string fixtures;    // scripted LLM fixtures directory
  std::string exemplars;   // QA generation exemplars JSONL
  std::string names;       // sanitizer person-name list, one per line
};

struct LlmSettings {
  std::string provider = "scripted";  // "scripted" or "http"
  std::string endpoint;
  std::string model;
  std::int64_t timeout_ms = 30000;
  int max_attempts = 3;
  std::int64_t backoff_ms = 1000;
  std::size_t max_in_flight = 4;
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

struct Config {
  Paths paths;
  embed::FeatureConfig features;
  embed::TrainConfig train;
  rag::PipelineConfig pipeline;
  finetune::FinetuneConfig finetune;
  eval::SynthConfig synth;
  std::size_t eval_k = 10;
  sanitize::SanitizerConfig sanitizer;
  std::vector<std::string> sanitize_fields = {"question", "answer"};
  qa::GenerationOptions generation;
  LlmSettings llm;
  ServiceSettings service;

  // Sets every stage seed (training, finetune sampling, synth).
  void override_seed(std::uint64_t seed);
  void validate() const;
};

// Parses TOML text. Unknown sections or keys and type mismatches throw
// ConfigError naming the key path, e.g. "train.epochs".
Config parse_config(std::string_view text, const std::string& base_dir = ".");
Config load_config(const std::string& path);

}  // namespace ragforge::config
