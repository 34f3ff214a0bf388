#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ragforge/qa_generator.hpp"
#include "ragforge/vector_index.hpp"

namespace ragforge::finetune {

struct FinetuneConfig {
  std::size_t min_answer_tokens = 90;
  std::size_t top_k_positives = 2;
  std::size_t negatives_per_sample = 3;
  double tau_sim = 0.6;
  double tau_dissim = 0.2;
  double unanswerable_fraction = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws ConfigError
};

struct ContextDoc {
  std::string item_id;
  std::string text;
  friend bool operator==(const ContextDoc&, const ContextDoc&) = default;
};

struct FinetuneRecord {
  std::string question;
  std::string answer;
  std::string source_doc_id;
  std::vector<ContextDoc> positives;
  std::vector<ContextDoc> negatives;
  bool answerable = true;
  bool underfilled = false;  // fewer negatives than requested were available

  friend bool operator==(const FinetuneRecord&, const FinetuneRecord&) = default;
};

ordered_json record_to_json(const FinetuneRecord& r);
FinetuneRecord record_from_json(const json& j);

struct FilterResult {
  std::vector<qa::GeneratedQA> kept;
  std::size_t dropped = 0;
};

// Keeps answers with at least min_answer_tokens whitespace tokens.
FilterResult filter_short_answers(const std::vector<qa::GeneratedQA>& pairs, const FinetuneConfig& cfg);

// Cosine between stored item embeddings, snapped to a 1e-9 grid so band
// membership does not flicker on the last bits.
double quantized_similarity(const index::IndexItem& a, const index::IndexItem& b);

// Grounded document first, then its top_k_positives - 1 nearest items
// (score descending, id ascending). Throws RecordError when the grounded
// document is not in the index.
std::vector<ContextDoc> select_positives(const qa::GeneratedQA& pair, const index::Index& index,
                                         const FinetuneConfig& cfg);

struct NegativeSample {
  std::vector<ContextDoc> negatives;
  bool underfilled = false;
};

// Items with tau_dissim <= sim < tau_sim against the grounded document,
// excluding the grounded document and the positives; sampled uniformly
// without replacement.
std::vector<std::string> negative_band(const qa::GeneratedQA& pair, const index::Index& index,
                                       const std::vector<ContextDoc>& positives, const FinetuneConfig& cfg);
NegativeSample sample_negatives(const qa::GeneratedQA& pair, const index::Index& index,
                                const std::vector<ContextDoc>& positives, const FinetuneConfig& cfg,
                                std::mt19937_64& rng);

struct BuildReport {
  std::size_t input = 0;
  std::size_t answerable = 0;
  std::size_t unanswerable = 0;
  std::size_t skipped = 0;
  std::size_t underfilled = 0;
  std::size_t unanswerable_shortfall = 0;  // requested conversions without a negative to keep
  std::vector<std::pair<std::string, std::string>> skips;  // (source_doc_id, reason)

  json to_json() const;
};

struct Dataset {
  std::vector<FinetuneRecord> records;
  BuildReport report;
};

// Each pair draws from its own stream derive_seed(rng_seed, pair index). Then
// round(unanswerable_fraction * records) records that have at least one
// negative are converted: positives removed, answer set to the refusal string.
// Throws EmptyInputError on empty input.
Dataset build_dataset(const std::vector<qa::GeneratedQA>& pairs, const index::Index& index, const FinetuneConfig& cfg);

inline constexpr const char* kDefaultSampleTemplate =
    "### Context\n{context}\n\n### Question\n{question}\n\n### Answer\n{answer}";

// Positives and negatives shuffled together (seeded by `seed` and the
// question) into "[Document i]" blocks, then the question and the target answer.
std::string render_training_sample(const FinetuneRecord& record, const std::string& tmpl = kDefaultSampleTemplate,
                                   std::uint64_t seed = 0);

}  // namespace ragforge::finetune
