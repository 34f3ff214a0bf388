#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ragforge/embedder.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/evaluation.hpp"
#include "test_util.hpp"

using namespace ragforge;
using namespace ragforge::embed;

namespace {

FeatureConfig dims(std::size_t d, std::uint64_t seed = 0) {
  FeatureConfig c;
  c.dim = d;
  c.hash_seed = seed;
  return c;
}

double norm(const Embedding& e) {
  double s = 0;
  for (float x : e.values) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

// Independent loss: direct formula on explicitly projected vectors.
double oracle_loss(const std::vector<EncodedPair>& batch, const std::vector<double>& w, std::size_t dim,
                   double lambda) {
  auto project = [&](const Vector& x) {
    Vector y(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t c = 0; c < dim; ++c) y[r] += w[r * dim + c] * x[c];
    return y;
  };
  auto cos = [](const Vector& a, const Vector& b) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      d += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return d / std::sqrt(na * nb);
  };
  std::vector<Vector> q, d;
  for (const auto& p : batch) {
    q.push_back(project(p.query));
    d.push_back(project(p.doc));
  }
  double wsum = 0, pos = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    wsum += batch[i].weight;
    pos += batch[i].weight * std::pow(cos(q[i], d[i]) - batch[i].ratio, 2);
  }
  double loss = wsum > 0 ? pos / wsum : 0.0;
  double neg = 0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (i == j || batch[i].query_key == batch[j].query_key || batch[i].doc_key == batch[j].doc_key) continue;
      neg += std::pow(cos(q[i], d[j]), 2);
      ++terms;
    }
  if (terms) loss += lambda * neg / static_cast<double>(terms);
  return loss;
}

std::vector<clicks::TrainingPair> random_pairs(std::mt19937_64& rng, std::size_t n) {
  std::vector<clicks::TrainingPair> out;
  std::uniform_real_distribution<double> ratio(0.05, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    clicks::TrainingPair p;
    p.query = testutil::random_sentence(rng, 1 + rng() % 4);
    p.doc_id = "d" + std::to_string(i);
    p.doc_text = testutil::random_sentence(rng, 2 + rng() % 6);
    p.ratio = ratio(rng);
    p.weight = p.ratio;
    p.log_ratio = std::log(p.ratio);
    out.push_back(p);
  }
  return out;
}

Projection noisy(std::size_t dim, std::uint64_t seed, double std) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, std);
  std::vector<double> m(dim * dim);
  for (std::size_t i = 0; i < dim * dim; ++i) m[i] = n(rng) + (i % (dim + 1) == 0 ? 1.0 : 0.0);
  return Projection(dim, m, 0);
}

}  // namespace

TEST(Featurize, OneVectorPerToken) {
  auto f = featurize("edit pdf", dims(64));
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].size(), 64u);
  EXPECT_TRUE(featurize("", dims(64)).empty());
  EXPECT_TRUE(featurize("   ", dims(64)).empty());
}

TEST(Featurize, DeterministicAndSeedSensitive) {
  EXPECT_EQ(featurize("export to pdf", dims(64, 3)), featurize("export to pdf", dims(64, 3)));
  EXPECT_NE(featurize("pdf", dims(256, 1)), featurize("pdf", dims(256, 2)));
}

TEST(Pool, SingleTokenIsIdentityForAllModes) {
  auto f = featurize("crop", dims(32));
  for (auto m : {Pooling::mean, Pooling::max, Pooling::first}) EXPECT_EQ(pool(f, m, 32), f[0]);
}

TEST(Pool, ArithmeticExamples) {
  EXPECT_EQ(pool({{1, 0}, {0, 1}}, Pooling::mean, 2), (Vector{0.5, 0.5}));
  EXPECT_EQ(pool({{1, -2}, {0, 3}}, Pooling::max, 2), (Vector{1, 3}));
  EXPECT_EQ(pool({{1, -2}, {0, 3}}, Pooling::first, 2), (Vector{1, -2}));
  EXPECT_EQ(pool({}, Pooling::mean, 3), (Vector{0, 0, 0}));
  EXPECT_EQ(parse_pooling("max"), Pooling::max);
  EXPECT_THROW(parse_pooling("median"), ConfigError);
}

TEST(Embed, UnitNormAndSelfSimilarity) {
  std::mt19937_64 rng(11);
  auto proj = Projection::initial(64, 5);
  for (int i = 0; i < 100; ++i) {
    auto text = testutil::random_sentence(rng, rng() % 6);
    auto e = embed::embed(text, proj, dims(64));
    EXPECT_NEAR(norm(e), 1.0, 1e-5) << text;
    EXPECT_NEAR(cosine(e, e), 1.0, 1e-6);
  }
}

TEST(Embed, EmptyTextMapsToFixedBasisDirection) {
  auto id = Projection::identity(16);
  auto e = embed::embed("", id, dims(16));
  EXPECT_FLOAT_EQ(e.values[0], 1.0f);
  for (std::size_t i = 1; i < 16; ++i) EXPECT_FLOAT_EQ(e.values[i], 0.0f);
}

TEST(Embed, DisjointHashesGiveZeroCosineUnderIdentity) {
  auto cfg = dims(256);
  auto id = Projection::identity(256);
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int attempt = 0; attempt < 200 && checked < 20; ++attempt) {
    auto a = testutil::random_sentence(rng, 2), b = testutil::random_sentence(rng, 2);
    auto va = base_vector(a, cfg), vb = base_vector(b, cfg);
    bool overlap = false;
    for (std::size_t i = 0; i < 256; ++i) overlap |= (va[i] != 0.0 && vb[i] != 0.0);
    if (overlap) continue;  // only collision-free pairs qualify
    ++checked;
    EXPECT_NEAR(cosine(embed::embed(a, id, cfg), embed::embed(b, id, cfg)), 0.0, 1e-6);
  }
  EXPECT_GE(checked, 5);
}

TEST(Embed, CosineSymmetricAndBounded) {
  std::mt19937_64 rng(4);
  auto proj = Projection::initial(32, 1, 0.3);
  for (int i = 0; i < 100; ++i) {
    auto a = embed::embed(testutil::random_sentence(rng, 3), proj, dims(32));
    auto b = embed::embed(testutil::random_sentence(rng, 3), proj, dims(32));
    EXPECT_EQ(cosine(a, b), cosine(b, a));
    EXPECT_LE(std::abs(cosine(a, b)), 1.0 + 1e-6);
  }
}

TEST(Embed, SharedTowerForQueriesAndDocuments) {
  // The same text must embed identically whichever side of a pair it sits on.
  clicks::TrainingPair p{"merge pdf files", "d", "merge pdf files", 1.0, 0.0, 1.0};
  auto e = encode_pair(p, dims(64));
  EXPECT_EQ(e.query, e.doc);
}

TEST(Projection, InitialIsIdentityPlusSmallNoise) {
  auto p = Projection::initial(64, 7);
  double off = 0, diag = 0;
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c) (r == c ? diag : off) += std::pow(p.at(r, c) - (r == c ? 1.0 : 0.0), 2);
  const double sd = std::sqrt((off + diag) / (64.0 * 64.0));
  EXPECT_NEAR(sd, 0.01, 0.001);
  EXPECT_EQ(p, Projection::initial(64, 7));
  EXPECT_NE(p.version(), Projection::initial(64, 8).version());
}

TEST(Projection, SaveLoadRoundTripAndCorruption) {
  testutil::TempDir dir;
  auto p = Projection::initial(16, 2);
  save_projection(p, dir.file("p.rfpj"));
  EXPECT_EQ(load_projection(dir.file("p.rfpj")), p);

  auto bytes = encode_projection(p);
  EXPECT_EQ(bytes.substr(0, 4), "RFPJ");
  auto flipped = bytes;
  flipped[20] ^= 0x01;
  EXPECT_THROW(decode_projection(flipped), FormatError);
  EXPECT_THROW(decode_projection(bytes.substr(0, bytes.size() - 3)), FormatError);
  auto wrong = bytes;
  wrong[0] = 'X';
  try {
    decode_projection(wrong);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("RFPJ"), std::string::npos);
  }
}

TEST(Loss, ZeroWhenCosineMatchesRatio) {
  auto cfg_f = dims(16);
  auto id = Projection::identity(16);
  TrainConfig cfg;
  cfg.in_batch_negative_weight = 0.0;
  std::vector<EncodedPair> batch;
  for (const char* t : {"alpha beta", "gamma", "delta epsilon zeta"}) {
    clicks::TrainingPair p{t, "d", t, 1.0, 0.0, 1.0};
    batch.push_back(encode_pair(p, cfg_f));
  }
  auto lg = loss_and_grad(batch, id, cfg);
  EXPECT_NEAR(lg.loss, 0.0, 1e-12);
  for (double g : lg.grad) EXPECT_NEAR(g, 0.0, 1e-9);
}

TEST(Loss, ZeroWeightPairDoesNotChangeLoss) {
  std::mt19937_64 rng(8);
  auto pairs = random_pairs(rng, 4);
  TrainConfig cfg;
  cfg.in_batch_negative_weight = 0.0;
  auto proj = Projection::initial(16, 1, 0.2);
  auto base = loss_and_grad(std::span(pairs), proj, cfg, dims(16)).loss;
  auto extra = pairs;
  auto z = random_pairs(rng, 1)[0];
  z.weight = 0.0;
  extra.push_back(z);
  EXPECT_NEAR(loss_and_grad(std::span(extra), proj, cfg, dims(16)).loss, base, 1e-12);
}

TEST(Loss, MatchesIndependentFormula) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    auto pairs = random_pairs(rng, 6);
    std::vector<EncodedPair> enc;
    for (const auto& p : pairs) enc.push_back(encode_pair(p, dims(16)));
    TrainConfig cfg;
    cfg.in_batch_negative_weight = 0.3;
    auto proj = noisy(16, t, 0.2);
    EXPECT_NEAR(loss_and_grad(enc, proj, cfg).loss, oracle_loss(enc, proj.matrix(), 16, 0.3), 1e-12);
  }
}

TEST(Loss, SameQueryOrDocPairsAreNotNegatives) {
  // Both pairs share a query, so no negative term exists and lambda is inert.
  std::vector<clicks::TrainingPair> pairs = {{"q", "a", "alpha doc", 1.0, 0.0, 1.0}, {"q", "b", "beta doc", 0.5, std::log(0.5), 0.5}};
  auto proj = Projection::initial(16, 1, 0.2);
  TrainConfig off, on;
  off.in_batch_negative_weight = 0.0;
  on.in_batch_negative_weight = 1.0;
  EXPECT_DOUBLE_EQ(loss_and_grad(std::span(pairs), proj, off, dims(16)).loss,
                   loss_and_grad(std::span(pairs), proj, on, dims(16)).loss);
}

TEST(Loss, EmptyBatchRejected) {
  std::vector<EncodedPair> none;
  EXPECT_THROW(loss_and_grad(none, Projection::identity(8), TrainConfig{}), InputError);
}

// Central finite differences (h = 1e-4) against the analytic gradient on
// random batches for dims 8 and 32; norm-wise relative error <= 1e-3.
TEST(LossProperty, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(99);
  int batches = 0;
  for (std::size_t dim : {8u, 32u}) {
    for (int t = 0; t < 10; ++t, ++batches) {
      auto pairs = random_pairs(rng, 2 + rng() % 5);
      std::vector<EncodedPair> enc;
      for (const auto& p : pairs) enc.push_back(encode_pair(p, dims(dim, rng())));
      TrainConfig cfg;
      cfg.in_batch_negative_weight = (t % 2) ? 0.2 : 0.0;
      auto proj = noisy(dim, rng(), 0.1);
      auto lg = loss_and_grad(enc, proj, cfg);
      const double h = 1e-4;
      double diff2 = 0, a2 = 0, n2 = 0;
      for (std::size_t k = 0; k < dim * dim; ++k) {
        auto plus = proj.matrix(), minus = proj.matrix();
        plus[k] += h;
        minus[k] -= h;
        const double fd = (loss_and_grad(enc, Projection(dim, plus, 0), cfg).loss -
                           loss_and_grad(enc, Projection(dim, minus, 0), cfg).loss) /
                          (2 * h);
        diff2 += std::pow(fd - lg.grad[k], 2);
        a2 += lg.grad[k] * lg.grad[k];
        n2 += fd * fd;
      }
      const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
      EXPECT_LE(rel, 1e-3) << "dim " << dim << " batch " << t;
    }
  }
  EXPECT_EQ(batches, 20);
}

TEST(Train, ZeroEpochsReturnsInitial) {
  std::mt19937_64 rng(1);
  auto pairs = random_pairs(rng, 10);
  TrainConfig cfg;
  cfg.epochs = 0;
  auto init = Projection::initial(16, 3);
  auto r = train(pairs, cfg, dims(16), init);
  EXPECT_EQ(r.projection, init);
  EXPECT_TRUE(r.epoch_losses.empty());
}

TEST(Train, DeterministicForFixedSeedAndInputOrder) {
  std::mt19937_64 rng(2);
  auto pairs = random_pairs(rng, 40);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  auto a = train(pairs, cfg, dims(16));
  auto b = train(pairs, cfg, dims(16));
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.projection, b.projection);
  auto reversed = pairs;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(train(reversed, cfg, dims(16)).projection, a.projection);
}

TEST(Train, EmptyInputAndBadConfig) {
  std::vector<clicks::TrainingPair> none;
  EXPECT_THROW(train(none, TrainConfig{}, dims(16)), EmptyInputError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  std::mt19937_64 rng(1);
  auto pairs = random_pairs(rng, 3);
  EXPECT_THROW(train(pairs, bad, dims(16)), ConfigError);
  TrainConfig tiny_batch;
  tiny_batch.batch_size = 1;
  EXPECT_THROW(tiny_batch.validate(), ConfigError);
  EXPECT_THROW(dims(4).validate(), ConfigError);
}

TEST(Train, DivergenceIsReportedWithEpochAndBatch) {
  std::mt19937_64 rng(3);
  auto pairs = random_pairs(rng, 8);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  try {
    train(pairs, cfg, dims(8));
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(Train, LossFallsOnThreeTopicSynthCorpus) {
  eval::SynthConfig sc;
  sc.topics = 3;
  sc.docs_per_topic = 10;
  sc.queries_per_topic = 15;
  sc.rng_seed = 5;
  auto corpus = eval::synth_clicks(sc);
  std::map<std::string, Document> docs;
  for (const auto& d : corpus.documents) docs.emplace(d.doc_id, d);
  auto rel = clicks::compute_relevance(corpus.train_rows, docs);
  TrainConfig cfg;
  cfg.epochs = 20;
  auto r = train(rel.pairs, cfg, dims(64));
  ASSERT_EQ(r.epoch_losses.size(), 20u);
  EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
}
