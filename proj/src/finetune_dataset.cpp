#include "ragforge/finetune_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "ragforge/errors.hpp"
#include "ragforge/rag_pipeline.hpp"
#include "ragforge/text.hpp"

namespace ragforge::finetune {

void FinetuneConfig::validate() const {
  if (!(tau_dissim >= 0.0 && tau_dissim < tau_sim && tau_sim <= 1.0))
    throw ConfigError("finetune: require 0 <= tau_dissim < tau_sim <= 1");
  if (!(unanswerable_fraction >= 0.0 && unanswerable_fraction <= 1.0))
    throw ConfigError("finetune: unanswerable_fraction must lie in [0, 1]");
  if (top_k_positives < 1) throw ConfigError("finetune: top_k_positives must be >= 1");
}

namespace {

ordered_json docs_json(const std::vector<ContextDoc>& docs) {
  ordered_json arr = ordered_json::array();
  for (const auto& d : docs) arr.push_back({{"item_id", d.item_id}, {"text", d.text}});
  return arr;
}

std::vector<ContextDoc> docs_from(const json& arr) {
  std::vector<ContextDoc> out;
  for (const auto& d : arr) out.push_back({d.at("item_id").get<std::string>(), d.at("text").get<std::string>()});
  return out;
}

ContextDoc context_of(const index::IndexItem& item) { return {item.item_id, item.document_text()}; }

const index::IndexItem& grounded_item(const qa::GeneratedQA& pair, const index::Index& index) {
  const auto* item = index.find(pair.source_doc_id);
  if (!item) throw RecordError("grounded document '" + pair.source_doc_id + "' not in index");
  return *item;
}

}  // namespace

ordered_json record_to_json(const FinetuneRecord& r) {
  return ordered_json{{"question", r.question},     {"answer", r.answer},
                      {"source_doc_id", r.source_doc_id}, {"answerable", r.answerable},
                      {"underfilled", r.underfilled}, {"positives", docs_json(r.positives)},
                      {"negatives", docs_json(r.negatives)}};
}

FinetuneRecord record_from_json(const json& j) {
  try {
    FinetuneRecord r;
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.source_doc_id = j.value("source_doc_id", "");
    r.answerable = j.at("answerable").get<bool>();
    r.underfilled = j.value("underfilled", false);
    r.positives = docs_from(j.at("positives"));
    r.negatives = docs_from(j.at("negatives"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("finetune record: ") + e.what());
  }
}

FilterResult filter_short_answers(const std::vector<qa::GeneratedQA>& pairs, const FinetuneConfig& cfg) {
  FilterResult out;
  for (const auto& p : pairs) {
    if (count_whitespace_tokens(p.answer) >= cfg.min_answer_tokens) out.kept.push_back(p);
    else ++out.dropped;
  }
  return out;
}

double quantized_similarity(const index::IndexItem& a, const index::IndexItem& b) {
  return std::round(embed::cosine(a.embedding, b.embedding) * 1e9) / 1e9;
}

std::vector<ContextDoc> select_positives(const qa::GeneratedQA& pair, const index::Index& index,
                                         const FinetuneConfig& cfg) {
  const auto& grounded = grounded_item(pair, index);
  std::vector<ContextDoc> out{context_of(grounded)};
  if (cfg.top_k_positives <= 1) return out;

  std::vector<std::pair<double, const index::IndexItem*>> scored;
  for (const auto& item : index.items()) {
    if (item.item_id == grounded.item_id) continue;
    scored.emplace_back(embed::cosine(grounded.embedding, item.embedding), &item);
  }
  const std::size_t want = std::min(cfg.top_k_positives - 1, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(want), scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second->item_id < b.second->item_id;
                    });
  for (std::size_t i = 0; i < want; ++i) out.push_back(context_of(*scored[i].second));
  return out;
}

std::vector<std::string> negative_band(const qa::GeneratedQA& pair, const index::Index& index,
                                       const std::vector<ContextDoc>& positives, const FinetuneConfig& cfg) {
  const auto& grounded = grounded_item(pair, index);
  std::set<std::string> excluded{grounded.item_id};
  for (const auto& p : positives) excluded.insert(p.item_id);
  std::vector<std::string> band;
  for (const auto& item : index.items()) {
    if (excluded.count(item.item_id)) continue;
    const double raw = embed::cosine(grounded.embedding, item.embedding);
    const double q = quantized_similarity(grounded, item);
    if (raw < cfg.tau_sim && q < cfg.tau_sim && q >= cfg.tau_dissim) band.push_back(item.item_id);
  }
  return band;
}

NegativeSample sample_negatives(const qa::GeneratedQA& pair, const index::Index& index,
                                const std::vector<ContextDoc>& positives, const FinetuneConfig& cfg,
                                std::mt19937_64& rng) {
  auto band = negative_band(pair, index, positives, cfg);
  NegativeSample out;
  const std::size_t take = std::min(cfg.negatives_per_sample, band.size());
  out.underfilled = take < cfg.negatives_per_sample;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, band.size() - i));
    std::swap(band[i], band[j]);
    out.negatives.push_back(context_of(*index.find(band[i])));
  }
  return out;
}

json BuildReport::to_json() const {
  json s = json::array();
  for (const auto& [id, reason] : skips) s.push_back({{"source_doc_id", id}, {"reason", reason}});
  return json{{"input", input},
              {"answerable", answerable},
              {"unanswerable", unanswerable},
              {"skipped", skipped},
              {"underfilled", underfilled},
              {"unanswerable_shortfall", unanswerable_shortfall},
              {"skips", s}};
}

Dataset build_dataset(const std::vector<qa::GeneratedQA>& pairs, const index::Index& index, const FinetuneConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw EmptyInputError("no QA pairs to build a finetuning set from");
  Dataset ds;
  ds.report.input = pairs.size();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, i));
    try {
      FinetuneRecord rec;
      rec.question = pair.question;
      rec.answer = pair.answer;
      rec.source_doc_id = pair.source_doc_id;
      rec.positives = select_positives(pair, index, cfg);
      auto neg = sample_negatives(pair, index, rec.positives, cfg, rng);
      rec.negatives = std::move(neg.negatives);
      rec.underfilled = neg.underfilled;
      ds.records.push_back(std::move(rec));
    } catch (const RecordError& e) {
      spdlog::warn("skipping QA pair {}: {}", i, e.what());
      ds.report.skips.emplace_back(pair.source_doc_id, e.what());
    }
  }
  ds.report.skipped = ds.report.skips.size();

  const auto wanted = static_cast<std::size_t>(std::llround(cfg.unanswerable_fraction * static_cast<double>(ds.records.size())));
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    if (!ds.records[i].negatives.empty()) eligible.push_back(i);
  std::mt19937_64 rng(derive_seed(cfg.rng_seed, pairs.size()));
  portable_shuffle(eligible, rng);
  const std::size_t convert = std::min(wanted, eligible.size());
  ds.report.unanswerable_shortfall = wanted - convert;
  for (std::size_t c = 0; c < convert; ++c) {
    auto& rec = ds.records[eligible[c]];
    rec.positives.clear();
    rec.answer = rag::kUnanswerable;
    rec.answerable = false;
  }

  for (const auto& r : ds.records) {
    if (r.answerable) ++ds.report.answerable;
    else ++ds.report.unanswerable;
    if (r.underfilled) ++ds.report.underfilled;
  }
  return ds;
}

std::string render_training_sample(const FinetuneRecord& record, const std::string& tmpl, std::uint64_t seed) {
  std::vector<const ContextDoc*> blocks;
  for (const auto& d : record.positives) blocks.push_back(&d);
  for (const auto& d : record.negatives) blocks.push_back(&d);
  std::mt19937_64 rng(derive_seed(seed, fnv1a64(record.question)));
  portable_shuffle(blocks, rng);
  std::string context;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) context += "\n\n";
    context += "[Document " + std::to_string(i + 1) + "]\n" + blocks[i]->text;
  }
  return fill_template(tmpl, {{"context", context}, {"question", record.question}, {"answer", record.answer}});
}

}  // namespace ragforge::finetune
