#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragforge/embedder.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/llm_client.hpp"
#include "ragforge/product_intent.hpp"
#include "ragforge/vector_index.hpp"

namespace ragforge::rag {

inline constexpr const char* kUnanswerable = "This question cannot be answered at the moment.";

inline constexpr const char* kDefaultAnswerTemplate =
    "You are an assistant that helps humans use {product}. You will be given a list of question-answer pairs "
    "(some pairs might be irrelevant) and a user query. Your goal is to answer the user query using only "
    "information from the given question-answer pairs.\n"
    "\n"
    "List of question-answer pairs:\n"
    "{qa_pairs}\n"
    "\n"
    "User query: {query}\n"
    "Answer:";

inline constexpr const char* kGenericProduct = "this product";

// Unit-cost edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);
// distance / max(len a, len b); 0 when both are empty.
double normalized_levenshtein(std::string_view a, std::string_view b);

// Helpx > Community > YouTube (video QA) > LLM-generated Helpx QA.
int credibility(ItemKind kind);

struct DedupConfig {
  double levenshtein_norm_threshold = 0.2;
  double question_sim_threshold = 0.92;
  double answer_sim_threshold = 0.85;

  void validate() const;  // all in (0, 1)
};

struct DropRecord {
  std::string kept_id;
  std::string dropped_id;
  std::string reason;  // "<trigger>/<rule>", e.g. "edit_distance/credibility"
  friend bool operator==(const DropRecord&, const DropRecord&) = default;
};

struct DedupResult {
  std::vector<index::RetrievedItem> kept;  // original order and ranks
  std::vector<DropRecord> drops;
};

using EmbedFn = std::function<embed::Embedding(std::string_view)>;

// Pairwise over surviving items in rank order. A pair is a duplicate when its
// questions are close (normalized edit distance below threshold, or question
// cosine above threshold) and its answers' cosine is above the answer
// threshold. The loser is the lower-credibility source, then the shorter
// answer, then the lower-ranked item.
DedupResult dedup(const std::vector<index::RetrievedItem>& items, const DedupConfig& cfg, const EmbedFn& embed);

// Numbered "Question:/Answer:" blocks substituted into the template together
// with the product name (or "this product") and the query. Throws InputError
// on an empty item list.
std::string assemble_prompt(std::string_view query, const std::vector<index::RetrievedItem>& items,
                            const std::optional<std::string>& product,
                            const std::string& tmpl = kDefaultAnswerTemplate);

struct PipelineConfig {
  std::size_t k = 8;
  std::size_t context_budget = 5;
  double min_score = 0.15;
  std::size_t max_filter_products = 2;
  bool intent_enabled = true;
  std::size_t max_tokens = 512;
  DedupConfig dedup;
  std::string answer_template = kDefaultAnswerTemplate;
};

// Everything answer() reads. All references are to immutable shared state
// except the client, which must be safe for concurrent use.
struct PipelineDeps {
  const index::Index& index;
  const embed::Projection& projection;
  const embed::FeatureConfig& features;
  const intent::ProductCatalog& catalog;
  llm::Client& client;
  const PipelineConfig& config;
};

struct StageTimings {
  std::map<std::string, double> ms;  // stage -> milliseconds
};

struct AnswerBundle {
  std::string query;
  std::string answer;
  bool answerable = false;
  std::vector<index::RetrievedItem> used_items;
  std::vector<DropRecord> dropped_duplicates;
  intent::IntentResult products;
  std::string prompt;
  StageTimings timings;

  json to_json(bool include_timings = true) const;
};

json retrieved_to_json(const index::RetrievedItem& r);

// intent -> embed -> search -> min-score cut -> dedup -> context budget ->
// prompt -> LLM. When nothing clears min_score the unanswerable string is
// returned without an LLM call. `product_override`, when non-empty, replaces
// automatic intent detection. Throws ConfigError when the projection does not
// match the index.
AnswerBundle answer(std::string_view query, const PipelineDeps& deps,
                    const std::vector<std::string>& product_override = {});

// Retrieval only (no LLM): intent-filtered search.
std::vector<index::RetrievedItem> retrieve(std::string_view query, std::size_t k, const PipelineDeps& deps,
                                           const std::vector<std::string>& product_override = {});

}  // namespace ragforge::rag

namespace ragforge::rag {

// LLM failure inside answer(); carries the bundle assembled up to the failing stage.
class PipelineTransportError : public TransportError {
 public:
  PipelineTransportError(const std::string& what, AnswerBundle partial)
      : TransportError(what), partial_(std::move(partial)) {}
  const AnswerBundle& partial() const noexcept { return partial_; }

 private:
  AnswerBundle partial_;
};

}  // namespace ragforge::rag
