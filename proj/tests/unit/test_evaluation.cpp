#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ragforge/click_ingest.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/evaluation.hpp"
#include "test_util.hpp"

using namespace ragforge;
using namespace ragforge::eval;

namespace {

// DCG written out directly with 1-based ranks.
double direct_ndcg(const std::vector<std::string>& ranked, const std::map<std::string, double>& grades, std::size_t k) {
  auto grade = [&](const std::string& id) {
    auto it = grades.find(id);
    return it == grades.end() ? 0.0 : it->second;
  };
  double dcg = 0;
  for (std::size_t r = 1; r <= std::min(k, ranked.size()); ++r) dcg += grade(ranked[r - 1]) / std::log2(double(r) + 1);
  std::vector<double> ideal;
  for (auto& [id, g] : grades) ideal.push_back(g);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0;
  for (std::size_t r = 1; r <= std::min(k, ideal.size()); ++r) idcg += ideal[r - 1] / std::log2(double(r) + 1);
  return idcg == 0 ? 0 : dcg / idcg;
}

SynthConfig small_synth() {
  SynthConfig c;
  c.topics = 5;
  c.queries_per_topic = 12;
  c.docs_per_topic = 8;
  return c;
}

}  // namespace

TEST(Ndcg, WorkedExample) {
  const double v = ndcg_at_k({"a", "b", "c"}, {{"a", 3}, {"c", 2}}, 3);
  EXPECT_NEAR(v, 4.0 / (3.0 + 2.0 / std::log2(3.0)), 1e-12);
  EXPECT_NEAR(v, 0.93855, 1e-5);
}

TEST(Ndcg, IdealAndEmpty) {
  EXPECT_DOUBLE_EQ(ndcg_at_k({"a", "b", "x"}, {{"a", 1.0}, {"b", 0.5}}, 10), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k({"x", "y"}, {{"a", 1.0}}, 2), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k({"x"}, {}, 2), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k({"x", "a"}, {{"a", 1.0}}, 1), 0.0);
  EXPECT_THROW(ndcg_at_k({"a"}, {{"a", 1}}, 0), InputError);
}

TEST(NdcgProperty, OracleRangeTailAndExchange) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> g(0.01, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    std::vector<std::string> ranked;
    for (std::size_t i = 0; i < n; ++i) ranked.push_back("d" + std::to_string(i));
    std::shuffle(ranked.begin(), ranked.end(), rng);
    std::map<std::string, double> grades;
    for (std::size_t i = 0; i < n; ++i)
      if (rng() % 2) grades["d" + std::to_string(i)] = g(rng);
    const std::size_t k = 1 + rng() % (n + 2);
    const double v = ndcg_at_k(ranked, grades, k);
    EXPECT_NEAR(v, direct_ndcg(ranked, grades, k), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);

    // Shuffling the irrelevant tail after the last relevant item in the top k.
    std::size_t last = 0;
    for (std::size_t i = 0; i < std::min(k, n); ++i)
      if (grades.contains(ranked[i])) last = i + 1;
    auto tail = ranked;
    std::shuffle(tail.begin() + static_cast<std::ptrdiff_t>(last), tail.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)), rng);
    EXPECT_NEAR(ndcg_at_k(tail, grades, k), v, 1e-12);

    // Moving a higher grade earlier never hurts.
    std::size_t i = rng() % n, j = rng() % n;
    if (i > j) std::swap(i, j);
    auto gi = grades.contains(ranked[i]) ? grades[ranked[i]] : 0.0;
    auto gj = grades.contains(ranked[j]) ? grades[ranked[j]] : 0.0;
    if (gj > gi) {
      auto swapped = ranked;
      std::swap(swapped[i], swapped[j]);
      EXPECT_GE(ndcg_at_k(swapped, grades, k), v - 1e-12);
    }
  }
}

TEST(EvalQuery, JsonRoundTrip) {
  EvalQuery q{"how to crop", {{"a", 1.0}, {"b", 0.25}}};
  auto back = eval_query_from_json(eval_query_to_json(q));
  EXPECT_EQ(back.query, q.query);
  EXPECT_EQ(back.relevant, q.relevant);
  EXPECT_THROW(eval_query_from_json(json{{"query", "x"}}), FormatError);
}

TEST(EvaluateRetriever, SelfRetrievalIsPerfect) {
  std::vector<Document> docs = {testutil::helpx("a", "merge pdf files", "combine documents"),
                                testutil::helpx("b", "crop photo", "trim the edges"),
                                testutil::helpx("c", "export video", "render a sequence")};
  embed::FeatureConfig f;
  auto proj = embed::Projection::identity(f.dim);
  auto idx = index::build(docs, proj, f);
  std::vector<EvalQuery> set = {{"merge pdf files combine documents", {{"a", 1.0}}},
                                {"crop photo trim the edges", {{"b", 1.0}, {"a", 0.1}}},
                                {"export video render a sequence", {{"c", 1.0}}}};
  auto rep = evaluate_retriever(idx, proj, f, set, 3);
  EXPECT_DOUBLE_EQ(rep.per_query[0].ndcg, 1.0);
  EXPECT_DOUBLE_EQ(rep.per_query[2].ndcg, 1.0);
  auto single = evaluate_retriever(idx, proj, f, {set[1]}, 3);
  EXPECT_DOUBLE_EQ(single.mean_ndcg, single.per_query[0].ndcg);
  EXPECT_THROW(evaluate_retriever(idx, proj, f, {}, 3), EvaluationError);
  try {
    evaluate_retriever(idx, proj, f, {{"q", {{"zzz", 1.0}}}}, 3);
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST(EvaluateRetriever, FiftyQueryBruteForceOracle) {
  auto corpus = synth_clicks(small_synth());
  embed::FeatureConfig f;
  f.dim = 128;
  auto proj = embed::Projection::initial(f.dim, 3, 0.05);
  auto idx = index::build(corpus.documents, proj, f);
  std::vector<EvalQuery> set;
  for (std::size_t i = 0; set.size() < 50 && i < corpus.queries.size(); ++i) {
    std::map<std::string, double> grades;
    std::mt19937_64 rng(i);
    for (int k = 0; k < 3; ++k)
      grades[corpus.documents[rng() % corpus.documents.size()].doc_id] = 0.2 + 0.8 * ((rng() % 100) / 100.0);
    set.push_back({corpus.queries[i].text, grades});
  }
  ASSERT_EQ(set.size(), 50u);
  auto rep = evaluate_retriever(idx, proj, f, set, 10);
  double sum = 0;
  for (std::size_t qi = 0; qi < set.size(); ++qi) {
    auto q = embed::embed(set[qi].query, proj, f);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& it : idx.items()) {
      double dot = 0;
      for (std::size_t d = 0; d < q.values.size(); ++d) dot += double(q.values[d]) * it.embedding.values[d];
      scored.emplace_back(-dot, it.item_id);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> ranked;
    for (auto& [s, id] : scored) ranked.push_back(id);
    EXPECT_NEAR(rep.per_query[qi].ndcg, direct_ndcg(ranked, set[qi].relevant, 10), 1e-9) << set[qi].query;
    sum += rep.per_query[qi].ndcg;
  }
  EXPECT_NEAR(rep.mean_ndcg, sum / 50.0, 1e-12);
  auto j = rep.to_json();
  EXPECT_EQ(j["k"], 10);
  EXPECT_EQ(j["per_query"].size(), 50u);
  EXPECT_NE(rep.to_table().find("mean"), std::string::npos);
}

TEST(Synth, DeterministicAndSeedSensitive) {
  auto a = synth_clicks(small_synth());
  auto b = synth_clicks(small_synth());
  EXPECT_EQ(a.all_rows, b.all_rows);
  EXPECT_EQ(a.eval_rows, b.eval_rows);
  auto cfg = small_synth();
  cfg.rng_seed = 43;
  EXPECT_NE(synth_clicks(cfg).all_rows, a.all_rows);
}

TEST(Synth, HoldoutFraction) {
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthConfig cfg;
    cfg.rng_seed = seed;
    auto c = synth_clicks(cfg);
    const double expect = 0.07 * double(c.all_rows.size());
    EXPECT_LE(std::abs(double(c.eval_rows.size()) - expect), 1.0);
    EXPECT_EQ(c.train_rows.size() + c.eval_rows.size(), c.all_rows.size());
    std::set<std::pair<std::string, std::string>> train;
    for (auto& r : c.train_rows) train.insert({r.query, r.doc_id});
    for (auto& r : c.eval_rows) EXPECT_FALSE(train.contains({r.query, r.doc_id}));
  }
}

TEST(Synth, EvalGradesAgainstFullMax) {
  auto c = synth_clicks(small_synth());
  std::map<std::string, std::uint64_t> max_clicks;
  for (auto& r : c.all_rows) max_clicks[r.query] = std::max(max_clicks[r.query], r.clicks);
  std::size_t graded = 0;
  for (const auto& q : c.eval_set) {
    for (const auto& [doc, grade] : q.relevant) {
      auto row = std::find_if(c.eval_rows.begin(), c.eval_rows.end(),
                              [&](auto& r) { return r.doc_id == doc && r.query == q.query; });
      ASSERT_NE(row, c.eval_rows.end());
      EXPECT_DOUBLE_EQ(grade, double(row->clicks) / double(max_clicks[q.query]));
      EXPECT_GT(grade, 0.0);
      EXPECT_LE(grade, 1.0);
      ++graded;
    }
  }
  EXPECT_EQ(graded, c.eval_rows.size());
}

TEST(Synth, ColdArgmaxIsTrueTopicDoc) {
  auto cfg = small_synth();
  cfg.click_temperature = 0.001;
  cfg.clicks_per_query = 50;
  auto c = synth_clicks(cfg);
  std::map<std::string, Document> docs;
  for (auto& d : c.documents) docs[d.doc_id] = d;
  std::map<std::string, std::pair<std::uint64_t, std::string>> top;
  for (auto& r : c.all_rows) {
    auto& t = top[r.query];
    if (r.clicks > t.first) t = {r.clicks, r.doc_id};
  }
  ASSERT_FALSE(top.empty());
  for (const auto& q : c.queries) {
    auto it = top.find(q.text);
    ASSERT_NE(it, top.end()) << q.text;
    double best = 0;
    for (auto& d : c.documents) best = std::max(best, synth_affinity(c, q, d));
    EXPECT_DOUBLE_EQ(synth_affinity(c, q, docs[it->second.second]), best) << q.text;
    if (!q.anchor_doc.empty()) EXPECT_EQ(it->second.second, q.anchor_doc);
  }
}

TEST(Synth, RatiosObeyIngestInvariants) {
  auto c = synth_clicks(small_synth());
  std::map<std::string, Document> docs;
  for (auto& d : c.documents) docs[d.doc_id] = d;
  auto rel = clicks::compute_relevance(c.train_rows, docs);
  EXPECT_EQ(rel.unresolved, 0u);
  std::map<std::string, double> max_ratio;
  for (const auto& p : rel.pairs) {
    EXPECT_GT(p.ratio, 0.0);
    EXPECT_LE(p.ratio, 1.0);
    EXPECT_LE(p.log_ratio, 0.0);
    EXPECT_NEAR(std::exp(p.log_ratio), p.ratio, 1e-12);
    max_ratio[p.query] = std::max(max_ratio[p.query], p.ratio);
  }
  for (auto& [q, m] : max_ratio) EXPECT_DOUBLE_EQ(m, 1.0) << q;
}

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.topics = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.click_temperature = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Judge, ParseScore) {
  EXPECT_EQ(parse_judge_score("4"), 4);
  EXPECT_EQ(parse_judge_score("  5 - equivalent"), 5);
  EXPECT_EQ(parse_judge_score("3."), 3);
  EXPECT_FALSE(parse_judge_score("0"));
  EXPECT_FALSE(parse_judge_score("6"));
  EXPECT_FALSE(parse_judge_score("45"));
  EXPECT_FALSE(parse_judge_score("score: 4"));
  EXPECT_FALSE(parse_judge_score(""));
}

TEST(Judge, ConstantAndMixedMeans) {
  llm::ScriptedClient c;
  c.set_script({"4"});
  auto s = judge_relevance("q", "gold", "cand", c);
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_EQ(s.scores.size(), 20u);
  auto req = c.requests().back();
  EXPECT_EQ(req.n, 20u);
  EXPECT_DOUBLE_EQ(req.temperature, 1.0);
  EXPECT_DOUBLE_EQ(req.top_p, 1.0);
  EXPECT_NE(req.prompt.find("gold"), std::string::npos);

  llm::ScriptedClient mixed;
  mixed.set_script({"5", "3"});
  EXPECT_DOUBLE_EQ(judge_relevance("q", "g", "c", mixed).mean, 4.0);

  llm::ScriptedClient partial;
  partial.set_script({"2", "n/a", "5", "??"});
  auto p = judge_relevance("q", "g", "c", partial);
  EXPECT_DOUBLE_EQ(p.mean, 3.5);
  EXPECT_EQ(p.discarded, 10u);
}

TEST(Judge, NothingParseable) {
  llm::ScriptedClient c;
  c.set_script({"I think it is good"});
  EXPECT_THROW(judge_relevance("q", "g", "c", c), JudgeError);
}
