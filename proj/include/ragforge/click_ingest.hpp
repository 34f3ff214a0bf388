#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "ragforge/document.hpp"

namespace ragforge::clicks {

struct ClickRecord {
  std::string query;  // normalized
  std::string doc_id;
  std::uint64_t clicks = 0;

  friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

struct TrainingPair {
  std::string query;
  std::string doc_id;
  std::string doc_text;  // title + description
  double ratio = 0.0;      // clicks / max clicks for the query, in (0, 1]
  double log_ratio = 0.0;  // ln(ratio), <= 0
  double weight = 0.0;     // training weight; equals ratio

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

struct ParseStats {
  std::size_t lines = 0;
  std::size_t skipped = 0;       // malformed lines
  std::size_t zero_dropped = 0;  // (query, doc) groups whose summed clicks were 0
};

struct ParsedLog {
  std::vector<ClickRecord> records;  // sorted by (query, doc_id)
  ParseStats stats;
};

// Reads `{"query", "doc_id", "clicks"}` JSONL. Duplicate (query, doc_id) lines
// are summed after query normalization. Throws EmptyInputError when no line is
// valid and IoError when the stream fails.
ParsedLog parse_click_log(std::istream& in);
ParsedLog parse_click_log_file(const std::string& path);

struct RelevanceResult {
  std::vector<TrainingPair> pairs;  // sorted by (query, doc_id)
  std::size_t unresolved = 0;       // records whose doc_id was not in the doc map
};

// relevance = log(clicks(q -> d) / max_d' clicks(q -> d')). The max runs over the
// query's resolvable documents, so every query keeps a pair with ratio 1.
RelevanceResult compute_relevance(const std::vector<ClickRecord>& records,
                                  const std::map<std::string, Document>& docs);

ordered_json training_pair_to_json(const TrainingPair& p);
TrainingPair training_pair_from_json(const json& j);

}  // namespace ragforge::clicks
