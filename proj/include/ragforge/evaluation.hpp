#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ragforge/click_ingest.hpp"
#include "ragforge/document.hpp"
#include "ragforge/llm_client.hpp"
#include "ragforge/vector_index.hpp"

namespace ragforge::eval {

struct EvalQuery {
  std::string query;
  std::map<std::string, double> relevant;  // doc_id -> grade in (0, 1]
};

json eval_query_to_json(const EvalQuery& q);
EvalQuery eval_query_from_json(const json& j);  // throws FormatError

// Linear gain: DCG = sum grade(doc_i) / log2(i + 1) over the first k ranks;
// nDCG = DCG / IDCG, and 0 when IDCG is 0. Throws InputError when k == 0.
double ndcg_at_k(const std::vector<std::string>& ranked, const std::map<std::string, double>& grades, std::size_t k);

struct QueryScore {
  std::string query;
  double ndcg = 0.0;
};

struct EvalReport {
  double mean_ndcg = 0.0;
  std::size_t k = 10;
  std::vector<QueryScore> per_query;

  json to_json() const;
  std::string to_table() const;
};

// Embeds each query and ranks the whole index without a product filter.
// Throws EvaluationError for a graded doc_id missing from the index or an
// empty eval set.
EvalReport evaluate_retriever(const index::Index& index, const embed::Projection& proj,
                              const embed::FeatureConfig& fcfg, const std::vector<EvalQuery>& eval_set,
                              std::size_t k = 10);

struct SynthConfig {
  std::size_t topics = 10;
  std::size_t vocab_per_topic = 12;
  std::size_t queries_per_topic = 40;
  std::size_t docs_per_topic = 30;
  std::size_t noise_tokens = 2;
  double click_temperature = 0.1;
  std::size_t clicks_per_query = 20;
  double eval_fraction = 0.07;
  std::uint64_t rng_seed = 42;

  void validate() const;  // throws ConfigError
};

// Generator internals kept for inspection by tests.
struct SynthQuery {
  std::string text;
  std::size_t topic = 0;
  std::string anchor_doc;
};

struct SynthCorpus {
  std::vector<Document> documents;
  std::vector<SynthQuery> queries;
  std::vector<clicks::ClickRecord> all_rows;    // every (query, doc, clicks) row
  std::vector<clicks::ClickRecord> train_rows;  // all_rows minus the held-out rows
  std::vector<clicks::ClickRecord> eval_rows;   // held-out rows
  std::vector<EvalQuery> eval_set;              // held-out rows graded against the query's full click max
};

// Topic-structured corpus. Each topic has disjoint document and query
// vocabularies, so surface overlap between a query and its documents is limited
// to an optional anchor-title word and shared noise. Clicks for a query are
// drawn from softmax(affinity / temperature) with affinity 1 for the anchor
// document, 0.5 for the rest of its topic and 0 elsewhere.
SynthCorpus synth_clicks(const SynthConfig& cfg);

// Affinity used by the generator; exposed so tests can take the argmax.
double synth_affinity(const SynthCorpus& corpus, const SynthQuery& q, const Document& d);

struct JudgeScore {
  double mean = 0.0;
  std::vector<int> scores;
  std::size_t discarded = 0;
};

inline constexpr const char* kDefaultJudgeTemplate =
    "Rate how well the candidate answer matches the reference answer for the question, on a scale of 1 to 5 "
    "where 1 means unrelated or wrong and 5 means equivalent. Reply with the number first.\n\n"
    "Question: {question}\n\nReference answer: {gold}\n\nCandidate answer: {candidate}\n\nScore:";

// Leading integer in [1, 5] after optional whitespace; nullopt otherwise.
std::optional<int> parse_judge_score(std::string_view sample);

// One request with n = 20, temperature = 1, top_p = 1; mean of the parseable
// samples. Throws JudgeError when none parse.
JudgeScore judge_relevance(const std::string& question, const std::string& gold, const std::string& candidate,
                           llm::Client& client, const std::string& tmpl = kDefaultJudgeTemplate);

}  // namespace ragforge::eval
