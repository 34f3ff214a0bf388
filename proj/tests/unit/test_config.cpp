#include <gtest/gtest.h>

#include <filesystem>

#include "ragforge/config.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/text.hpp"
#include "test_util.hpp"

using namespace ragforge;
using namespace ragforge::config;

namespace {

std::string shipped_config() { return std::string(RAGFORGE_FIXTURES) + "/../../config/ragforge.toml"; }

std::string error_of(std::string_view toml) {
  try {
    parse_config(toml, "/base");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ShippedFileMatchesDefaults) {
  auto c = load_config(shipped_config());
  EXPECT_EQ(c.features.dim, 256u);
  EXPECT_EQ(c.pipeline.k, 8u);
  EXPECT_EQ(c.pipeline.context_budget, 5u);
  EXPECT_DOUBLE_EQ(c.pipeline.min_score, 0.15);
  EXPECT_DOUBLE_EQ(c.pipeline.dedup.levenshtein_norm_threshold, 0.2);
  EXPECT_DOUBLE_EQ(c.pipeline.dedup.question_sim_threshold, 0.92);
  EXPECT_DOUBLE_EQ(c.pipeline.dedup.answer_sim_threshold, 0.85);
  EXPECT_EQ(c.finetune.min_answer_tokens, 90u);
  EXPECT_DOUBLE_EQ(c.finetune.tau_sim, 0.6);
  EXPECT_DOUBLE_EQ(c.finetune.tau_dissim, 0.2);
  EXPECT_DOUBLE_EQ(c.synth.eval_fraction, 0.07);
  EXPECT_EQ(c.eval_k, 10u);
  EXPECT_EQ(c.llm.provider, "scripted");
  const auto dir = std::filesystem::path(shipped_config()).parent_path();
  EXPECT_EQ(std::filesystem::weakly_canonical(c.paths.catalog), std::filesystem::weakly_canonical(dir / "catalog.json"));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, EmptyTextGivesDefaults) {
  auto c = parse_config("");
  EXPECT_EQ(c.pipeline.k, 8u);
  EXPECT_EQ(c.train.epochs, embed::TrainConfig{}.epochs);
}

TEST(Config, RelativePathsResolveAgainstBase) {
  auto c = parse_config("[paths]\nindex = \"data/i.rfix\"\nclicks = \"/abs/c.jsonl\"\n", "/srv/conf");
  EXPECT_EQ(c.paths.index, "/srv/conf/data/i.rfix");
  EXPECT_EQ(c.paths.clicks, "/abs/c.jsonl");
}

TEST(Config, UnknownKeysAndSectionsNamed) {
  EXPECT_NE(error_of("[train]\nepochz = 3\n").find("train.epochz"), std::string::npos);
  EXPECT_NE(error_of("[nonsense]\na = 1\n").find("nonsense"), std::string::npos);
}

TEST(Config, TypeErrorsNamed) {
  EXPECT_NE(error_of("[train]\nepochs = \"ten\"\n").find("train.epochs"), std::string::npos);
  EXPECT_NE(error_of("[retrieval]\nintent_enabled = 1\n").find("retrieval.intent_enabled"), std::string::npos);
  EXPECT_FALSE(error_of("[features]\npooling = \"median\"\n").empty());
  EXPECT_FALSE(error_of("this is not toml = = =").empty());
}

TEST(Config, ValidationRejectsBadValues) {
  EXPECT_FALSE(error_of("[dedup]\nanswer_sim_threshold = 1.5\n").empty());
  EXPECT_FALSE(error_of("[finetune]\ntau_sim = 0.1\ntau_dissim = 0.5\n").empty());
  EXPECT_FALSE(error_of("[llm]\nprovider = \"carrier-pigeon\"\n").empty());
  EXPECT_FALSE(error_of("[features]\ndim = 0\n").empty());
}

TEST(Config, IntegersAcceptedForReals) {
  auto c = parse_config("[retrieval]\nmin_score = 0\n");
  EXPECT_DOUBLE_EQ(c.pipeline.min_score, 0.0);
}

TEST(Config, OverrideSeed) {
  auto c = parse_config("");
  c.override_seed(99);
  EXPECT_EQ(c.train.rng_seed, 99u);
  EXPECT_EQ(c.finetune.rng_seed, 99u);
  EXPECT_EQ(c.synth.rng_seed, 99u);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/definitely/not/here.toml"), IoError); }
