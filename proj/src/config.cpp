#include "ragforge/config.hpp"

#include <filesystem>
#include <set>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"
#include "toml.hpp"

namespace ragforge::config {

namespace {

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  void str(const char* key, std::string& out) {
    if (auto* n = node(key)) {
      auto v = n->value<std::string>();
      if (!n->is_string() || !v) fail(key, "expected string");
      out = *v;
    }
  }
  template <typename T>
  void integer(const char* key, T& out, long long min = 0) {
    if (auto* n = node(key)) {
      if (!n->is_integer()) fail(key, "expected integer");
      long long v = **n->as_integer();
      if (v < min) fail(key, "must be >= " + std::to_string(min));
      out = static_cast<T>(v);
    }
  }
  void real(const char* key, double& out) {
    if (auto* n = node(key)) {
      if (n->is_floating_point()) out = **n->as_floating_point();
      else if (n->is_integer()) out = static_cast<double>(**n->as_integer());
      else fail(key, "expected number");
    }
  }
  void boolean(const char* key, bool& out) {
    if (auto* n = node(key)) {
      if (!n->is_boolean()) fail(key, "expected boolean");
      out = **n->as_boolean();
    }
  }
  void strings(const char* key, std::vector<std::string>& out) {
    if (auto* n = node(key)) {
      const auto* arr = n->as_array();
      if (!arr) fail(key, "expected array of strings");
      out.clear();
      for (const auto& e : *arr) {
        if (!e.is_string()) fail(key, "expected array of strings");
        out.push_back(**e.as_string());
      }
    }
  }
  void path(const char* key, std::string& out, const std::string& base) {
    str(key, out);
    if (!out.empty() && !std::filesystem::path(out).is_absolute() && seen_.count(key))
      out = (std::filesystem::path(base) / out).lexically_normal().string();
  }

  // Rejects keys nobody asked for.
  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.count(std::string(k.str()))) throw ConfigError("unknown key '" + name_ + "." + std::string(k.str()) + "'");
    }
  }

  [[noreturn]] void fail(const char* key, const std::string& why) const {
    throw ConfigError(name_ + "." + key + ": " + why);
  }

 private:
  const toml::node* node(const char* key) {
    seen_.insert(key);
    if (!table_) return nullptr;
    return table_->get(key);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

void Config::override_seed(std::uint64_t seed) {
  train.rng_seed = seed;
  finetune.rng_seed = seed;
  synth.rng_seed = seed;
}

void Config::validate() const {
  features.validate();
  train.validate();
  pipeline.dedup.validate();
  finetune.validate();
  synth.validate();
  if (pipeline.k == 0) throw ConfigError("retrieval.k: must be >= 1");
  if (pipeline.context_budget == 0) throw ConfigError("retrieval.context_budget: must be >= 1");
  if (eval_k == 0) throw ConfigError("eval.k: must be >= 1");
  if (llm.provider != "scripted" && llm.provider != "http")
    throw ConfigError("llm.provider: expected \"scripted\" or \"http\"");
  if (llm.provider == "http" && llm.endpoint.empty()) throw ConfigError("llm.endpoint: required for http provider");
  if (service.port < 0 || service.port > 65535) throw ConfigError("service.port: out of range");
}

Config parse_config(std::string_view text, const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + std::string(e.description()) + " at line " +
                      std::to_string(e.source().begin.line));
  }
  static const std::set<std::string> sections = {"paths",   "features", "train", "retrieval", "dedup",
                                                 "finetune", "synth",   "eval",  "sanitizer", "generation",
                                                 "llm",      "service"};
  for (const auto& [k, v] : root) {
    if (!sections.count(std::string(k.str()))) throw ConfigError("unknown key '" + std::string(k.str()) + "'");
    if (!v.is_table()) throw ConfigError(std::string(k.str()) + ": expected a section");
  }
  auto section = [&](const char* name) { return Section(root[name].as_table(), name); };

  Config c;
  {
    auto s = section("paths");
    s.path("documents", c.paths.documents, base_dir);
    s.path("clicks", c.paths.clicks, base_dir);
    s.path("pairs", c.paths.pairs, base_dir);
    s.path("projection", c.paths.projection, base_dir);
    s.path("index", c.paths.index, base_dir);
    s.path("catalog", c.paths.catalog, base_dir);
    s.path("fixtures", c.paths.fixtures, base_dir);
    s.path("exemplars", c.paths.exemplars, base_dir);
    s.path("names", c.paths.names, base_dir);
    s.finish();
  }
  {
    auto s = section("features");
    s.integer("dim", c.features.dim, 1);
    s.integer("hash_seed", c.features.hash_seed);
    std::string pooling(embed::to_string(c.features.pooling));
    s.str("pooling", pooling);
    try {
      c.features.pooling = embed::parse_pooling(pooling);
    } catch (const Error&) {
      s.fail("pooling", "expected mean, max or first");
    }
    s.finish();
  }
  {
    auto s = section("train");
    s.real("learning_rate", c.train.learning_rate);
    s.real("adam_beta1", c.train.adam_beta1);
    s.real("adam_beta2", c.train.adam_beta2);
    s.real("adam_eps", c.train.adam_eps);
    s.integer("epochs", c.train.epochs);
    s.integer("batch_size", c.train.batch_size, 1);
    s.real("in_batch_negative_weight", c.train.in_batch_negative_weight);
    s.integer("rng_seed", c.train.rng_seed);
    s.finish();
  }
  {
    auto s = section("retrieval");
    s.integer("k", c.pipeline.k, 1);
    s.integer("context_budget", c.pipeline.context_budget, 1);
    s.real("min_score", c.pipeline.min_score);
    s.integer("max_filter_products", c.pipeline.max_filter_products);
    s.boolean("intent_enabled", c.pipeline.intent_enabled);
    s.integer("max_tokens", c.pipeline.max_tokens, 1);
    s.finish();
  }
  {
    auto s = section("dedup");
    s.real("levenshtein_norm_threshold", c.pipeline.dedup.levenshtein_norm_threshold);
    s.real("question_sim_threshold", c.pipeline.dedup.question_sim_threshold);
    s.real("answer_sim_threshold", c.pipeline.dedup.answer_sim_threshold);
    s.finish();
  }
  {
    auto s = section("finetune");
    s.integer("min_answer_tokens", c.finetune.min_answer_tokens);
    s.integer("top_k_positives", c.finetune.top_k_positives, 1);
    s.integer("negatives_per_sample", c.finetune.negatives_per_sample);
    s.real("tau_sim", c.finetune.tau_sim);
    s.real("tau_dissim", c.finetune.tau_dissim);
    s.real("unanswerable_fraction", c.finetune.unanswerable_fraction);
    s.integer("rng_seed", c.finetune.rng_seed);
    s.finish();
  }
  {
    auto s = section("synth");
    s.integer("topics", c.synth.topics, 1);
    s.integer("vocab_per_topic", c.synth.vocab_per_topic, 1);
    s.integer("queries_per_topic", c.synth.queries_per_topic, 1);
    s.integer("docs_per_topic", c.synth.docs_per_topic, 1);
    s.integer("noise_tokens", c.synth.noise_tokens);
    s.real("click_temperature", c.synth.click_temperature);
    s.integer("clicks_per_query", c.synth.clicks_per_query, 1);
    s.real("eval_fraction", c.synth.eval_fraction);
    s.integer("rng_seed", c.synth.rng_seed);
    s.finish();
  }
  {
    auto s = section("eval");
    s.integer("k", c.eval_k, 1);
    s.finish();
  }
  {
    auto s = section("sanitizer");
    s.strings("signature_openers", c.sanitizer.signature_openers);
    s.integer("max_name_words", c.sanitizer.max_name_words, 1);
    s.integer("max_name_chars", c.sanitizer.max_name_chars, 1);
    s.strings("fields", c.sanitize_fields);
    s.finish();
  }
  {
    auto s = section("generation");
    s.integer("max_per_doc", c.generation.max_per_doc, 1);
    s.integer("chunk_words", c.generation.chunk_words, 1);
    s.integer("max_tokens", c.generation.max_tokens, 1);
    s.finish();
  }
  {
    auto s = section("llm");
    s.str("provider", c.llm.provider);
    s.str("endpoint", c.llm.endpoint);
    s.str("model", c.llm.model);
    s.integer("timeout_ms", c.llm.timeout_ms, 1);
    s.integer("max_attempts", c.llm.max_attempts, 1);
    s.integer("backoff_ms", c.llm.backoff_ms);
    s.integer("max_in_flight", c.llm.max_in_flight, 1);
    s.finish();
  }
  {
    auto s = section("service");
    s.str("host", c.service.host);
    s.integer("port", c.service.port);
    s.str("cors_origin", c.service.cors_origin);
    s.finish();
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  const std::string text = read_file(path);
  auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(text, base.empty() ? "." : base);
}

}  // namespace ragforge::config
