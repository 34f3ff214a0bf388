#include "ragforge/rag_pipeline.hpp"

#include <algorithm>
#include <chrono>

#include <spdlog/spdlog.h>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::rag {

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::u32string s = utf8_decode(a);
  const std::u32string t = utf8_decode(b);
  if (s.empty()) return t.size();
  if (t.empty()) return s.size();
  std::vector<std::size_t> prev(t.size() + 1), cur(t.size() + 1);
  for (std::size_t j = 0; j <= t.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= s.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= t.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[t.size()];
}

double normalized_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(utf8_decode(a).size(), utf8_decode(b).size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

int credibility(ItemKind kind) {
  switch (kind) {
    case ItemKind::helpx_doc: return 4;
    case ItemKind::community_question: return 3;
    case ItemKind::generated_video_qa: return 2;
    case ItemKind::generated_helpx_qa: return 1;
  }
  return 0;
}

void DedupConfig::validate() const {
  for (double v : {levenshtein_norm_threshold, question_sim_threshold, answer_sim_threshold}) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("dedup thresholds must lie in (0, 1)");
  }
}

DedupResult dedup(const std::vector<index::RetrievedItem>& items, const DedupConfig& cfg, const EmbedFn& embed) {
  const std::size_t n = items.size();
  std::vector<std::optional<embed::Embedding>> q_emb(n), a_emb(n);
  auto question_embedding = [&](std::size_t i) -> const embed::Embedding& {
    if (!q_emb[i]) q_emb[i] = embed(items[i].item.question_text());
    return *q_emb[i];
  };
  auto answer_embedding = [&](std::size_t i) -> const embed::Embedding& {
    if (!a_emb[i]) a_emb[i] = embed(items[i].item.answer_text());
    return *a_emb[i];
  };

  std::vector<bool> alive(n, true);
  DedupResult out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n && alive[i]; ++j) {
      if (!alive[j]) continue;
      const auto& a = items[i].item;
      const auto& b = items[j].item;
      std::string trigger;
      if (normalized_levenshtein(a.question_text(), b.question_text()) < cfg.levenshtein_norm_threshold) {
        trigger = "edit_distance";
      } else if (embed::cosine(question_embedding(i), question_embedding(j)) > cfg.question_sim_threshold) {
        trigger = "question_similarity";
      } else {
        continue;
      }
      if (embed::cosine(answer_embedding(i), answer_embedding(j)) <= cfg.answer_sim_threshold) continue;

      std::size_t loser = j;
      std::string rule = "rank";
      const int ci = credibility(a.kind), cj = credibility(b.kind);
      const std::size_t li = a.answer_text().size(), lj = b.answer_text().size();
      if (ci != cj) {
        loser = ci < cj ? i : j;
        rule = "credibility";
      } else if (li != lj) {
        loser = li < lj ? i : j;
        rule = "answer_length";
      }
      const std::size_t winner = loser == i ? j : i;
      alive[loser] = false;
      out.drops.push_back({items[winner].item.item_id, items[loser].item.item_id, trigger + "/" + rule});
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.kept.push_back(items[i]);
  return out;
}

std::string assemble_prompt(std::string_view query, const std::vector<index::RetrievedItem>& items,
                            const std::optional<std::string>& product, const std::string& tmpl) {
  if (items.empty()) throw InputError("assemble_prompt needs at least one item");
  std::string pairs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) pairs += "\n\n";
    const auto& it = items[i].item;
    pairs += std::to_string(i + 1) + ". Question: " + it.question_text() + "\n";
    std::string answer = it.answer_text();
    pairs += answer.empty() ? "Answer:" : "Answer: " + answer;
  }
  return fill_template(tmpl, {{"product", product.value_or(kGenericProduct)},
                              {"qa_pairs", pairs},
                              {"query", std::string(query)}});
}

json retrieved_to_json(const index::RetrievedItem& r) {
  const auto& it = r.item;
  return json{{"item_id", it.item_id},
              {"kind", std::string(to_string(it.kind))},
              {"rank", r.rank},
              {"score", r.score},
              {"question", it.question ? json(*it.question) : json(nullptr)},
              {"answer", it.answer ? json(*it.answer) : json(nullptr)},
              {"url", it.url ? json(*it.url) : json(nullptr)},
              {"product_tags", std::vector<std::string>(it.product_tags.begin(), it.product_tags.end())}};
}

json AnswerBundle::to_json(bool include_timings) const {
  json used = json::array();
  for (const auto& r : used_items) used.push_back(retrieved_to_json(r));
  json drops = json::array();
  for (const auto& d : dropped_duplicates) drops.push_back({{"kept", d.kept_id}, {"dropped", d.dropped_id}, {"reason", d.reason}});
  json j{{"query", query},
         {"answer", answer},
         {"answerable", answerable},
         {"used_items", used},
         {"dropped_duplicates", drops},
         {"products", products.to_json()},
         {"prompt", prompt}};
  if (include_timings) j["timings"] = timings.ms;
  return j;
}

namespace {

class Stopwatch {
 public:
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void check_compatible(const PipelineDeps& deps) {
  if (deps.projection.version() != deps.index.projection_version()) {
    throw ConfigError("projection version " + std::to_string(deps.projection.version()) +
                      " does not match index projection version " + std::to_string(deps.index.projection_version()));
  }
  if (deps.projection.dim() != deps.index.dim() || deps.features.dim != deps.index.dim()) {
    throw ConfigError("projection/features dim does not match index dim");
  }
}

intent::IntentResult resolve_intent(std::string_view query, const PipelineDeps& deps,
                                    const std::vector<std::string>& product_override) {
  if (!product_override.empty()) return intent::manual_intent(product_override);
  if (!deps.config.intent_enabled) return {};
  return intent::detect_products(query, deps.catalog);
}

}  // namespace

std::vector<index::RetrievedItem> retrieve(std::string_view query, std::size_t k, const PipelineDeps& deps,
                                           const std::vector<std::string>& product_override) {
  check_compatible(deps);
  auto intent = resolve_intent(query, deps, product_override);
  auto aug = intent::augment_query(query, intent, deps.config.max_filter_products);
  auto q = embed::embed(aug.query, deps.projection, deps.features);
  return index::search(deps.index, q, k, aug.product_filter);
}

AnswerBundle answer(std::string_view query, const PipelineDeps& deps, const std::vector<std::string>& product_override) {
  check_compatible(deps);
  Stopwatch total, sw;
  AnswerBundle bundle;
  bundle.query = std::string(query);

  bundle.products = resolve_intent(query, deps, product_override);
  auto aug = intent::augment_query(query, bundle.products, deps.config.max_filter_products);
  bundle.timings.ms["intent"] = sw.lap();

  auto q = embed::embed(aug.query, deps.projection, deps.features);
  bundle.timings.ms["embed"] = sw.lap();

  auto hits = index::search(deps.index, q, deps.config.k, aug.product_filter);
  std::erase_if(hits, [&](const auto& h) { return h.score < deps.config.min_score; });
  bundle.timings.ms["retrieve"] = sw.lap();

  if (hits.empty()) {
    bundle.answer = kUnanswerable;
    bundle.answerable = false;
    bundle.timings.ms["total"] = total.lap();
    return bundle;
  }

  auto embed_fn = [&](std::string_view text) { return embed::embed(text, deps.projection, deps.features); };
  auto deduped = dedup(hits, deps.config.dedup, embed_fn);
  bundle.dropped_duplicates = std::move(deduped.drops);
  if (deduped.kept.size() > deps.config.context_budget) deduped.kept.resize(deps.config.context_budget);
  bundle.used_items = std::move(deduped.kept);
  bundle.timings.ms["dedup"] = sw.lap();

  std::optional<std::string> product;
  if (!bundle.products.products.empty()) product = bundle.products.products.front().product;
  bundle.prompt = assemble_prompt(aug.query, bundle.used_items, product, deps.config.answer_template);

  llm::CompletionRequest req;
  req.prompt = bundle.prompt;
  req.max_tokens = deps.config.max_tokens;
  try {
    auto result = deps.client.complete(req);
    bundle.answer = result.samples.at(0);
  } catch (const TransportError& e) {
    bundle.timings.ms["llm"] = sw.lap();
    throw PipelineTransportError(e.what(), bundle);
  }
  bundle.answerable = true;
  bundle.timings.ms["llm"] = sw.lap();
  bundle.timings.ms["total"] = total.lap();
  spdlog::debug("answered query with {} item(s), prompt={}", bundle.used_items.size(), prompt_hash(bundle.prompt));
  return bundle;
}

}  // namespace ragforge::rag
