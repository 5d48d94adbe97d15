#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mmt/config.hpp"
#include "mmt/error.hpp"

using namespace mmt;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MMT_SOURCE_DIR) / "configs";

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string config_error(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Dotted key paths of a config document or of a schema's properties.
void collect_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    out.push_back(key);
    if (it.value().is_object()) collect_keys(it.value(), key, out);
  }
}

void collect_schema_keys(const json& s, const std::string& prefix, std::vector<std::string>& out) {
  if (!s.contains("properties")) return;
  for (auto it = s["properties"].begin(); it != s["properties"].end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    out.push_back(key);
    collect_schema_keys(it.value(), key, out);
  }
}

}  // namespace

TEST(RunConfig, DefaultsRoundTrip) {
  const RunConfig def;
  EXPECT_EQ(parse_run_config(json(def)), def);
  EXPECT_EQ(parse_run_config(json::object()), def);
}

TEST(RunConfig, UnknownKeysAreNamed) {
  const std::string msg = config_error({{"bogus", 1}, {"train", {{"foo", 2}}}});
  EXPECT_NE(msg.find("bogus"), std::string::npos);
  EXPECT_NE(msg.find("train.foo"), std::string::npos);
  EXPECT_EQ(unknown_config_keys({{"model", {{"heads", {{{"name", "v"}, {"classes", 4}, {"x", 1}}}}}}}),
            std::vector<std::string>{"model.heads[].x"});
}

TEST(RunConfig, WrongTypesAndValuesAreConfigErrors) {
  EXPECT_FALSE(config_error({{"train", {{"epochs", "six"}}}}).empty());
  EXPECT_FALSE(config_error({{"missing", {{"p", 1.5}}}}).empty());
  EXPECT_FALSE(config_error({{"eval", {{"r_test", {0.5, 0.25}}}}}).empty());
  EXPECT_FALSE(config_error({{"model", {{"fusion_layer", 9}}}}).empty());
  EXPECT_FALSE(config_error({{"synth", {{"classes_head_a", 5}}}}).empty());
  EXPECT_FALSE(config_error({{"seeds", json::array()}}).empty());
  EXPECT_FALSE(config_error({{"tokenizer", {{"audio_patch", {5, 8}}}}}).empty());
}

TEST(RunConfig, PolicyIsMirroredIntoTraining) {
  const RunConfig c = parse_run_config({{"missing", {{"p", 0.6}, {"designated", "both"}}}, {"seeds", {4, 5}}});
  const TrainConfig t = c.train_for_seed(5);
  EXPECT_DOUBLE_EQ(t.policy.p, 0.6);
  EXPECT_EQ(t.policy.designated, MissingDesignation::Both);
  EXPECT_EQ(t.seed, 5u);
}

TEST(RunConfig, FileErrors) {
  EXPECT_THROW(load_run_config("/nonexistent/run.json"), FileError);
  const fs::path p = fs::temp_directory_path() / "mmt_test_config_bad.json";
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_run_config(p), ConfigError);
  fs::remove(p);
}

TEST(Presets, MatchShippedConfigFiles) {
  for (const auto& name : preset_names()) {
    const fs::path file = kConfigs / (name + ".json");
    ASSERT_TRUE(fs::exists(file)) << file;
    EXPECT_EQ(load_run_config(file), preset(name)) << name;
  }
  try {
    preset("kinetics");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ego4d-ar-like"), std::string::npos);
  }
}

TEST(Presets, Characteristics) {
  const auto sounds = preset("epic-sounds-like");
  EXPECT_EQ(sounds.model.heads.size(), 1u);
  EXPECT_EQ(sounds.eval.modality, Modality::Audio);
  EXPECT_GT(sounds.synth.snr_a_for_code_a, sounds.synth.snr_v_for_code_a);
  const auto ego = preset("ego4d-ar-like");
  EXPECT_DOUBLE_EQ(ego.synth.natural_missing_rate, 0.29);
  EXPECT_TRUE(ego.train.class_weighted);
  EXPECT_DOUBLE_EQ(ego.eval.r_test.front(), 0.29);
}

TEST(Schema, ListsExactlyTheAcceptedKeys) {
  const json schema = read_json(kConfigs / "schema.json");
  std::vector<std::string> from_schema, from_config;
  collect_schema_keys(schema, "", from_schema);
  collect_keys(json(RunConfig{}), "", from_config);
  std::sort(from_schema.begin(), from_schema.end());
  std::sort(from_config.begin(), from_config.end());
  EXPECT_EQ(from_schema, from_config);
  // The parser's own key table accepts every schema key.
  for (const auto& name : preset_names()) EXPECT_TRUE(unknown_config_keys(read_json(kConfigs / (name + ".json"))).empty());
}
