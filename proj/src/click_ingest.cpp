#include "ragforge/click_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::clicks {

ParsedLog parse_click_log(std::istream& in) {
  if (!in) throw IoError("click log stream is not readable");
  std::map<std::pair<std::string, std::string>, std::uint64_t> totals;
  ParsedLog out;
  auto js = for_each_jsonl(in, [&](const json& row, std::size_t) {
    auto q = row.find("query");
    auto d = row.find("doc_id");
    auto c = row.find("clicks");
    if (q == row.end() || d == row.end() || c == row.end() || !q->is_string() || !d->is_string() ||
        !c->is_number_integer()) {
      ++out.stats.skipped;
      return;
    }
    auto clicks = c->get<std::int64_t>();
    std::string query = normalize_query(q->get<std::string>());
    std::string doc = std::string(trim(d->get<std::string>()));
    if (clicks < 0 || query.empty() || doc.empty()) {
      ++out.stats.skipped;
      return;
    }
    totals[{std::move(query), std::move(doc)}] += static_cast<std::uint64_t>(clicks);
  });
  out.stats.lines = js.lines;
  out.stats.skipped += js.malformed;
  for (auto& [key, clicks] : totals) {
    if (clicks == 0) {
      ++out.stats.zero_dropped;
      continue;
    }
    out.records.push_back({key.first, key.second, clicks});
  }
  if (out.records.empty()) throw EmptyInputError("click log contains no valid records");
  if (out.stats.skipped) spdlog::warn("click log: skipped {} malformed line(s)", out.stats.skipped);
  return out;
}

ParsedLog parse_click_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open click log " + path);
  return parse_click_log(in);
}

RelevanceResult compute_relevance(const std::vector<ClickRecord>& records,
                                  const std::map<std::string, Document>& docs) {
  if (records.empty()) throw EmptyInputError("no click records");

  // Re-aggregate so callers may pass unsorted or duplicated records.
  std::map<std::string, std::map<std::string, std::uint64_t>> by_query;
  RelevanceResult out;
  for (const auto& r : records) {
    if (r.clicks == 0) continue;
    if (!docs.contains(r.doc_id)) {
      ++out.unresolved;
      continue;
    }
    by_query[r.query][r.doc_id] += r.clicks;
  }

  for (const auto& [query, per_doc] : by_query) {
    std::uint64_t max_clicks = 0;
    for (const auto& [doc, c] : per_doc) max_clicks = std::max(max_clicks, c);
    for (const auto& [doc, c] : per_doc) {
      TrainingPair p;
      p.query = query;
      p.doc_id = doc;
      p.doc_text = docs.at(doc).doc_text();
      p.ratio = static_cast<double>(c) / static_cast<double>(max_clicks);
      p.log_ratio = std::log(p.ratio);
      p.weight = p.ratio;
      out.pairs.push_back(std::move(p));
    }
  }
  if (out.unresolved) spdlog::warn("relevance: {} record(s) reference unknown documents", out.unresolved);
  return out;
}

ordered_json training_pair_to_json(const TrainingPair& p) {
  ordered_json j;
  j["query"] = p.query;
  j["doc_id"] = p.doc_id;
  j["doc_text"] = p.doc_text;
  j["ratio"] = p.ratio;
  j["log_ratio"] = p.log_ratio;
  j["weight"] = p.weight;
  return j;
}

TrainingPair training_pair_from_json(const json& j) {
  TrainingPair p;
  try {
    p.query = j.at("query").get<std::string>();
    p.doc_id = j.value("doc_id", std::string{});
    p.doc_text = j.at("doc_text").get<std::string>();
    p.ratio = j.at("ratio").get<double>();
    p.log_ratio = j.value("log_ratio", std::log(p.ratio));
    p.weight = j.value("weight", p.ratio);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad training pair: ") + e.what());
  }
  return p;
}

}  // namespace ragforge::clicks
