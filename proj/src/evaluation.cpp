#include "ragforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"

namespace ragforge::eval {

json eval_query_to_json(const EvalQuery& q) { return json{{"query", q.query}, {"relevant", q.relevant}}; }

EvalQuery eval_query_from_json(const json& j) {
  try {
    EvalQuery q;
    q.query = j.at("query").get<std::string>();
    q.relevant = j.at("relevant").get<std::map<std::string, double>>();
    return q;
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval query: ") + e.what());
  }
}

double ndcg_at_k(const std::vector<std::string>& ranked, const std::map<std::string, double>& grades, std::size_t k) {
  if (k == 0) throw InputError("ndcg_at_k requires k >= 1");
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    auto it = grades.find(ranked[i]);
    if (it != grades.end()) dcg += it->second / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<double> ideal;
  for (const auto& [id, g] : grades) ideal.push_back(g);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  if (idcg <= 0.0) return 0.0;
  return std::clamp(dcg / idcg, 0.0, 1.0);
}

json EvalReport::to_json() const {
  json pq = json::array();
  for (const auto& q : per_query) pq.push_back({{"query", q.query}, {"ndcg", q.ndcg}});
  return json{{"mean_ndcg", mean_ndcg}, {"k", k}, {"per_query", pq}};
}

std::string EvalReport::to_table() const {
  std::string out = fmt::format("{:<60} {:>8}\n", "query", fmt::format("nDCG@{}", k));
  for (const auto& q : per_query) {
    std::string shown = q.query.size() > 60 ? q.query.substr(0, 57) + "..." : q.query;
    out += fmt::format("{:<60} {:>8.4f}\n", shown, q.ndcg);
  }
  out += fmt::format("{:<60} {:>8.4f}\n", "mean", mean_ndcg);
  return out;
}

EvalReport evaluate_retriever(const index::Index& index, const embed::Projection& proj,
                              const embed::FeatureConfig& fcfg, const std::vector<EvalQuery>& eval_set,
                              std::size_t k) {
  if (eval_set.empty()) throw EvaluationError("empty eval set");
  for (const auto& q : eval_set) {
    for (const auto& [id, g] : q.relevant) {
      if (!index.find(id)) throw EvaluationError("graded doc_id '" + id + "' is not in the index");
    }
  }
  EvalReport report;
  report.k = k;
  double sum = 0.0;
  for (const auto& q : eval_set) {
    auto hits = index::search(index, embed::embed(q.query, proj, fcfg), k);
    std::vector<std::string> ranked;
    for (const auto& h : hits) ranked.push_back(h.item.item_id);
    double s = ndcg_at_k(ranked, q.relevant, k);
    report.per_query.push_back({q.query, s});
    sum += s;
  }
  report.mean_ndcg = sum / static_cast<double>(eval_set.size());
  return report;
}

void SynthConfig::validate() const {
  if (topics == 0 || vocab_per_topic == 0 || queries_per_topic == 0 || docs_per_topic == 0 || clicks_per_query == 0)
    throw ConfigError("synth: counts must be positive");
  if (!(click_temperature > 0.0)) throw ConfigError("synth: click_temperature must be positive");
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) throw ConfigError("synth: eval_fraction must lie in [0, 1)");
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}
  std::string next() {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    for (;;) {
      std::string w;
      const std::size_t syllables = 2 + uniform_index(rng_, 2);
      for (std::size_t s = 0; s < syllables; ++s) {
        w += consonants[uniform_index(rng_, consonants.size())];
        w += vowels[uniform_index(rng_, vowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }
  std::vector<std::string> many(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(next());
    return out;
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

std::string pick(const std::vector<std::string>& words, std::mt19937_64& rng) {
  return words[uniform_index(rng, words.size())];
}

std::string doc_topic_id(std::size_t t, std::size_t d) { return fmt::format("t{:02}_d{:03}", t, d); }

}  // namespace

double synth_affinity(const SynthCorpus&, const SynthQuery& q, const Document& d) {
  if (d.doc_id == q.anchor_doc) return 1.0;
  if (starts_with(d.doc_id, fmt::format("t{:02}_", q.topic))) return 0.5;
  return 0.0;
}

SynthCorpus synth_clicks(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.rng_seed);
  WordMaker words(rng);
  const auto noise = words.many(std::max<std::size_t>(cfg.noise_tokens * 8, 8));
  std::vector<std::vector<std::string>> doc_vocab, query_vocab;
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    doc_vocab.push_back(words.many(cfg.vocab_per_topic));
    query_vocab.push_back(words.many(cfg.vocab_per_topic));
  }

  SynthCorpus c;
  std::vector<std::vector<std::string>> titles(cfg.topics);
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t d = 0; d < cfg.docs_per_topic; ++d) {
      Document doc;
      doc.doc_id = doc_topic_id(t, d);
      doc.kind = ItemKind::helpx_doc;
      std::vector<std::string> title, desc;
      for (int i = 0; i < 3; ++i) title.push_back(pick(doc_vocab[t], rng));
      for (int i = 0; i < 6; ++i) desc.push_back(pick(doc_vocab[t], rng));
      for (std::size_t i = 0; i < cfg.noise_tokens; ++i) desc.push_back(pick(noise, rng));
      doc.title = join(title, " ");
      doc.description = join(desc, " ");
      titles[t].push_back(doc.title);
      c.documents.push_back(std::move(doc));
    }
  }

  std::set<std::string> seen;
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t qi = 0; qi < cfg.queries_per_topic; ++qi) {
      for (;;) {
        const std::size_t anchor = uniform_index(rng, cfg.docs_per_topic);
        std::vector<std::string> toks;
        for (int i = 0; i < 3; ++i) toks.push_back(pick(query_vocab[t], rng));
        if (uniform01(rng) < 0.5) {
          auto title_words = split(titles[t][anchor], ' ');
          toks.push_back(pick(title_words, rng));
        }
        if (cfg.noise_tokens > 0) toks.push_back(pick(noise, rng));
        std::string text = join(toks, " ");
        if (!seen.insert(text).second) continue;
        c.queries.push_back({text, t, doc_topic_id(t, anchor)});
        break;
      }
    }
  }

  // Clicks: clicks_per_query draws from softmax(affinity / T) over all docs.
  for (const auto& q : c.queries) {
    std::vector<double> w;
    double top = 0.0;
    for (const auto& d : c.documents) top = std::max(top, synth_affinity(c, q, d));
    double total = 0.0;
    for (const auto& d : c.documents) {
      w.push_back(std::exp((synth_affinity(c, q, d) - top) / cfg.click_temperature));
      total += w.back();
    }
    std::map<std::string, std::uint64_t> counts;
    for (std::size_t n = 0; n < cfg.clicks_per_query; ++n) {
      double u = uniform01(rng) * total;
      std::size_t i = 0;
      for (; i + 1 < w.size() && u >= w[i]; ++i) u -= w[i];
      ++counts[c.documents[i].doc_id];
    }
    for (const auto& [doc, n] : counts) c.all_rows.push_back({q.text, doc, n});
  }
  std::sort(c.all_rows.begin(), c.all_rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query, a.doc_id) < std::tie(b.query, b.doc_id);
  });

  // Row-level holdout.
  std::vector<std::size_t> order(c.all_rows.size());
  std::iota(order.begin(), order.end(), 0);
  portable_shuffle(order, rng);
  const auto held = static_cast<std::size_t>(std::llround(cfg.eval_fraction * static_cast<double>(order.size())));
  std::vector<bool> is_eval(order.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_eval[order[i]] = true;

  std::map<std::string, std::uint64_t> query_max;
  for (const auto& r : c.all_rows) query_max[r.query] = std::max(query_max[r.query], r.clicks);
  std::map<std::string, EvalQuery> eval_by_query;
  for (std::size_t i = 0; i < c.all_rows.size(); ++i) {
    const auto& r = c.all_rows[i];
    if (!is_eval[i]) {
      c.train_rows.push_back(r);
      continue;
    }
    c.eval_rows.push_back(r);
    auto& eq = eval_by_query[r.query];
    eq.query = r.query;
    eq.relevant[r.doc_id] = static_cast<double>(r.clicks) / static_cast<double>(query_max[r.query]);
  }
  for (auto& [q, eq] : eval_by_query) c.eval_set.push_back(std::move(eq));
  return c;
}

std::optional<int> parse_judge_score(std::string_view sample) {
  std::size_t i = 0;
  while (i < sample.size() && std::isspace(static_cast<unsigned char>(sample[i]))) ++i;
  std::size_t j = i;
  while (j < sample.size() && std::isdigit(static_cast<unsigned char>(sample[j]))) ++j;
  if (j == i || j - i > 1) return std::nullopt;
  int v = sample[i] - '0';
  if (v < 1 || v > 5) return std::nullopt;
  return v;
}

JudgeScore judge_relevance(const std::string& question, const std::string& gold, const std::string& candidate,
                           llm::Client& client, const std::string& tmpl) {
  llm::CompletionRequest req;
  req.prompt = fill_template(tmpl, {{"question", question}, {"gold", gold}, {"candidate", candidate}});
  req.n = 20;
  req.temperature = 1.0;
  req.top_p = 1.0;
  req.max_tokens = 8;
  auto result = client.complete(req);
  JudgeScore out;
  for (const auto& s : result.samples) {
    if (auto v = parse_judge_score(s)) out.scores.push_back(*v);
    else ++out.discarded;
  }
  if (out.scores.empty()) throw JudgeError("no parseable judge score among " + std::to_string(result.samples.size()) + " samples");
  out.mean = static_cast<double>(std::accumulate(out.scores.begin(), out.scores.end(), 0)) /
             static_cast<double>(out.scores.size());
  return out;
}

}  // namespace ragforge::eval
