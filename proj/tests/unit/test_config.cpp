#include <gtest/gtest.h>

#include <filesystem>

#include "analognas/config.hpp"
#include "analognas/errors.hpp"

using namespace analognas;

TEST(Config, PresetsValidate) {
  EXPECT_NO_THROW(RunConfig::desk().validate());
  EXPECT_NO_THROW(RunConfig::paper().validate());
  EXPECT_EQ(RunConfig::preset("desk"), RunConfig::desk());
  EXPECT_EQ(RunConfig::preset("paper"), RunConfig::paper());
  EXPECT_THROW(RunConfig::preset("laptop"), std::exception);
  EXPECT_NE(config_digest(RunConfig::desk()), config_digest(RunConfig::paper()));
}

TEST(Config, JsonRoundTrip) {
  for (const auto& cfg : {RunConfig::desk(), RunConfig::paper()}) {
    EXPECT_EQ(run_config_from_json(to_json(cfg)), cfg);
  }
  auto cfg = RunConfig::desk();
  cfg.seed = 99;
  cfg.scope.kind = ScopeKind::list;
  cfg.scope.archs = {1, 2, 3};
  const auto path = std::filesystem::temp_directory_path() / "analognas_cfg_test.json";
  save_run_config(cfg, path);
  EXPECT_EQ(load_run_config(path), cfg);
  std::filesystem::remove(path);
  EXPECT_THROW(load_run_config(path), FileNotFoundError);
}

TEST(Config, MissingKeysKeepDefaultsUnknownKeysFail) {
  EXPECT_EQ(run_config_from_json("{}"), RunConfig::desk());
  EXPECT_EQ(run_config_from_json("{\"seed\": 4}").seed, 4u);
  EXPECT_THROW(run_config_from_json("{\"sed\": 4}"), ParseError);
  EXPECT_THROW(run_config_from_json("{\"seed\": "), ParseError);
}

TEST(Config, DigestIgnoresScopeAndOutput) {
  auto a = RunConfig::desk(), b = RunConfig::desk();
  b.scope.kind = ScopeKind::full;
  b.output = "other.jsonl";
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 1;
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
  // Reference FNV-1a 64 vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(digest_hex(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(Config, ScopeResolution) {
  ScopeConfig s;
  s.kind = ScopeKind::list;
  s.archs = {30, 5, 30};
  const auto list = resolve_scope(s);
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(space::decode(list[0]), 5u);

  s.kind = ScopeKind::sample;
  s.sample_count = 40;
  s.sample_seed = 3;
  const auto sample = resolve_scope(s);
  EXPECT_EQ(sample.size(), 40u);
  EXPECT_EQ(sample, resolve_scope(s));
  for (std::size_t i = 1; i < sample.size(); ++i) EXPECT_LT(space::decode(sample[i - 1]), space::decode(sample[i]));

  s.kind = ScopeKind::subspace;
  EXPECT_EQ(resolve_scope(s).size(), 125u);
  s.kind = ScopeKind::full;
  EXPECT_EQ(resolve_scope(s).size(), 15625u);
}

TEST(Config, InvalidValuesRejected) {
  auto cfg = RunConfig::desk();
  cfg.pipeline.train.epochs = -1;
  EXPECT_THROW(cfg.validate(), std::exception);
}
