#pragma once

// JSON (de)serialization of every configuration type, and the strict run
// configuration consumed by the CLI. Rates and probabilities are fractions in
// JSON; the CLI and the metrics CSV use percent.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmt/mae.hpp"
#include "mmt/mbt.hpp"
#include "mmt/missing.hpp"
#include "mmt/synthdata.hpp"
#include "mmt/tokenizer.hpp"
#include "mmt/train.hpp"

namespace mmt {

using nlohmann::json;

void to_json(json& j, const TokenizerConfig& c);
void from_json(const json& j, TokenizerConfig& c);
void to_json(json& j, const HeadSpec& c);
void from_json(const json& j, HeadSpec& c);
void to_json(json& j, const ModelConfig& c);
void from_json(const json& j, ModelConfig& c);
void to_json(json& j, const SynthConfig& c);
void from_json(const json& j, SynthConfig& c);
void to_json(json& j, const TrainMissingPolicy& c);
void from_json(const json& j, TrainMissingPolicy& c);
void to_json(json& j, const TrainConfig& c);  // without the policy
void from_json(const json& j, TrainConfig& c);
void to_json(json& j, const MaeConfig& c);
void from_json(const json& j, MaeConfig& c);

struct EvalConfig {
  std::vector<double> r_test{0.0, 0.25, 0.5, 0.75, 1.0};
  Modality modality = Modality::Video;  // the modality removed at test time
  std::vector<SubstitutionMethod> methods{SubstitutionMethod::Mmt, SubstitutionMethod::Zeros,
                                          SubstitutionMethod::Skip};
  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};
void to_json(json& j, const EvalConfig& c);
void from_json(const json& j, EvalConfig& c);

struct RunConfig {
  std::string name = "run";
  TokenizerConfig tokenizer;
  ModelConfig model;
  SynthConfig synth;
  TrainMissingPolicy missing;
  TrainConfig train;  // train.policy mirrors `missing`
  MaeConfig mae;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds{1};
  std::string out = "runs/default";

  void validate() const;
  // Training settings for one seed.
  TrainConfig train_for_seed(std::uint64_t seed) const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

// Keys of `j` not in the run-config schema, as dotted paths.
std::vector<std::string> unknown_config_keys(const json& j);

// Parses and validates; unknown keys, wrong types and invalid values all
// raise ConfigError naming the offending keys.
RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& c, const std::filesystem::path& path);

// Built-in presets: "epic-kitchens-like", "epic-sounds-like", "ego4d-ar-like".
std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

}  // namespace mmt
