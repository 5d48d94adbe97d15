#include "mmt/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "mmt/error.hpp"

namespace mmt {

namespace {

// Reads `key` into `out` when present; absent keys keep their defaults.
template <typename T>
void opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be a JSON object");
}

// Allowed keys per object path; "" is the top level.
const std::map<std::string, std::set<std::string>>& schema_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"name", "tokenizer", "model", "synth", "missing", "train", "mae", "eval", "seeds", "out"}},
      {"tokenizer",
       {"audio_bins", "audio_frames_per_second", "audio_seconds", "audio_patch", "video_frames", "video_hw",
        "video_patch", "embed_dim"}},
      {"model",
       {"depth", "attention_heads", "fusion_layer", "bottleneck_count", "fusion_mode", "heads", "mlp_ratio",
        "attention_dropout", "layer_norm_eps"}},
      {"model.heads[]", {"name", "classes"}},
      {"synth",
       {"classes_head_a", "classes_head_b", "n_train", "n_test", "snr_a_for_code_a", "snr_a_for_code_b",
        "snr_v_for_code_a", "snr_v_for_code_b", "noise_std", "natural_missing_rate", "natural_missing_modality",
        "seed"}},
      {"missing", {"mode", "p", "designated"}},
      {"train",
       {"kind", "incomplete", "r_train", "r_train_audio", "r_train_video", "epochs", "batch_size", "learning_rate",
        "weight_decay", "warmup_epochs", "grad_clip", "class_weighted", "seed"}},
      {"mae",
       {"mask_ratio_audio", "mask_ratio_video", "decoder_depth", "decoder_heads", "decoder_dim", "epochs",
        "batch_size", "learning_rate", "weight_decay", "warmup_epochs", "seed"}},
      {"eval", {"r_test", "modality", "methods"}},
  };
  return keys;
}

void check_object_keys(const json& j, const std::string& path) {
  require_object(j, path.empty() ? "config" : path);
  std::vector<std::string> bad;
  const auto& allowed = schema_keys().at(path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.contains(it.key())) bad.push_back(path.empty() ? it.key() : path + "." + it.key());
  }
  if (!bad.empty()) {
    std::string list;
    for (const auto& k : bad) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }
}

}  // namespace

// ---- tokenizer / model --------------------------------------------------------

void to_json(json& j, const TokenizerConfig& c) {
  j = {{"audio_bins", c.audio_bins},   {"audio_frames_per_second", c.audio_frames_per_second},
       {"audio_seconds", c.audio_seconds}, {"audio_patch", c.audio_patch},
       {"video_frames", c.video_frames}, {"video_hw", c.video_hw},
       {"video_patch", c.video_patch},   {"embed_dim", c.embed_dim}};
}

void from_json(const json& j, TokenizerConfig& c) {
  check_object_keys(j, "tokenizer");
  opt(j, "audio_bins", c.audio_bins);
  opt(j, "audio_frames_per_second", c.audio_frames_per_second);
  opt(j, "audio_seconds", c.audio_seconds);
  opt(j, "audio_patch", c.audio_patch);
  opt(j, "video_frames", c.video_frames);
  opt(j, "video_hw", c.video_hw);
  opt(j, "video_patch", c.video_patch);
  opt(j, "embed_dim", c.embed_dim);
}

void to_json(json& j, const HeadSpec& c) { j = {{"name", c.name}, {"classes", c.classes}}; }

void from_json(const json& j, HeadSpec& c) {
  check_object_keys(j, "model.heads[]");
  c.name = j.at("name").get<std::string>();
  c.classes = j.at("classes").get<std::size_t>();
}

void to_json(json& j, const ModelConfig& c) {
  j = {{"depth", c.depth},
       {"attention_heads", c.attention_heads},
       {"fusion_layer", c.fusion_layer},
       {"bottleneck_count", c.bottleneck_count},
       {"fusion_mode", fusion_mode_name(c.fusion_mode)},
       {"heads", c.heads},
       {"mlp_ratio", c.mlp_ratio},
       {"attention_dropout", c.attention_dropout},
       {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const json& j, ModelConfig& c) {
  check_object_keys(j, "model");
  opt(j, "depth", c.depth);
  opt(j, "attention_heads", c.attention_heads);
  opt(j, "fusion_layer", c.fusion_layer);
  opt(j, "bottleneck_count", c.bottleneck_count);
  if (j.contains("fusion_mode")) c.fusion_mode = parse_fusion_mode(j.at("fusion_mode").get<std::string>());
  opt(j, "heads", c.heads);
  opt(j, "mlp_ratio", c.mlp_ratio);
  opt(j, "attention_dropout", c.attention_dropout);
  opt(j, "layer_norm_eps", c.layer_norm_eps);
}

// ---- data / training --------------------------------------------------------------

void to_json(json& j, const SynthConfig& c) {
  j = {{"classes_head_a", c.classes_head_a},
       {"classes_head_b", c.classes_head_b},
       {"n_train", c.n_train},
       {"n_test", c.n_test},
       {"snr_a_for_code_a", c.snr_a_for_code_a},
       {"snr_a_for_code_b", c.snr_a_for_code_b},
       {"snr_v_for_code_a", c.snr_v_for_code_a},
       {"snr_v_for_code_b", c.snr_v_for_code_b},
       {"noise_std", c.noise_std},
       {"natural_missing_rate", c.natural_missing_rate},
       {"natural_missing_modality", modality_name(c.natural_missing_modality)},
       {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
  check_object_keys(j, "synth");
  opt(j, "classes_head_a", c.classes_head_a);
  opt(j, "classes_head_b", c.classes_head_b);
  opt(j, "n_train", c.n_train);
  opt(j, "n_test", c.n_test);
  opt(j, "snr_a_for_code_a", c.snr_a_for_code_a);
  opt(j, "snr_a_for_code_b", c.snr_a_for_code_b);
  opt(j, "snr_v_for_code_a", c.snr_v_for_code_a);
  opt(j, "snr_v_for_code_b", c.snr_v_for_code_b);
  opt(j, "noise_std", c.noise_std);
  opt(j, "natural_missing_rate", c.natural_missing_rate);
  if (j.contains("natural_missing_modality")) {
    c.natural_missing_modality = parse_modality(j.at("natural_missing_modality").get<std::string>());
  }
  opt(j, "seed", c.seed);
}

void to_json(json& j, const TrainMissingPolicy& c) {
  j = {{"mode", train_mode_name(c.mode)}, {"p", c.p}, {"designated", designation_name(c.designated)}};
}

void from_json(const json& j, TrainMissingPolicy& c) {
  check_object_keys(j, "missing");
  if (j.contains("mode")) c.mode = parse_train_mode(j.at("mode").get<std::string>());
  opt(j, "p", c.p);
  if (j.contains("designated")) c.designated = parse_designation(j.at("designated").get<std::string>());
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"kind", model_kind_name(c.kind)},
       {"incomplete", incomplete_handling_name(c.incomplete)},
       {"r_train", c.r_train},
       {"r_train_audio", c.r_train_audio},
       {"r_train_video", c.r_train_video},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"weight_decay", c.weight_decay},
       {"warmup_epochs", c.warmup_epochs},
       {"grad_clip", c.grad_clip},
       {"class_weighted", c.class_weighted},
       {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  check_object_keys(j, "train");
  if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
  if (j.contains("incomplete")) c.incomplete = parse_incomplete_handling(j.at("incomplete").get<std::string>());
  opt(j, "r_train", c.r_train);
  opt(j, "r_train_audio", c.r_train_audio);
  opt(j, "r_train_video", c.r_train_video);
  opt(j, "epochs", c.epochs);
  opt(j, "batch_size", c.batch_size);
  opt(j, "learning_rate", c.learning_rate);
  opt(j, "weight_decay", c.weight_decay);
  opt(j, "warmup_epochs", c.warmup_epochs);
  opt(j, "grad_clip", c.grad_clip);
  opt(j, "class_weighted", c.class_weighted);
  opt(j, "seed", c.seed);
}

void to_json(json& j, const MaeConfig& c) {
  j = {{"mask_ratio_audio", c.mask_ratio_audio},
       {"mask_ratio_video", c.mask_ratio_video},
       {"decoder_depth", c.decoder_depth},
       {"decoder_heads", c.decoder_heads},
       {"decoder_dim", c.decoder_dim},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"weight_decay", c.weight_decay},
       {"warmup_epochs", c.warmup_epochs},
       {"seed", c.seed}};
}

void from_json(const json& j, MaeConfig& c) {
  check_object_keys(j, "mae");
  opt(j, "mask_ratio_audio", c.mask_ratio_audio);
  opt(j, "mask_ratio_video", c.mask_ratio_video);
  opt(j, "decoder_depth", c.decoder_depth);
  opt(j, "decoder_heads", c.decoder_heads);
  opt(j, "decoder_dim", c.decoder_dim);
  opt(j, "epochs", c.epochs);
  opt(j, "batch_size", c.batch_size);
  opt(j, "learning_rate", c.learning_rate);
  opt(j, "weight_decay", c.weight_decay);
  opt(j, "warmup_epochs", c.warmup_epochs);
  opt(j, "seed", c.seed);
}

void to_json(json& j, const EvalConfig& c) {
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.emplace_back(method_name(m));
  j = {{"r_test", c.r_test}, {"modality", modality_name(c.modality)}, {"methods", methods}};
}

void from_json(const json& j, EvalConfig& c) {
  check_object_keys(j, "eval");
  opt(j, "r_test", c.r_test);
  if (j.contains("modality")) c.modality = parse_modality(j.at("modality").get<std::string>());
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
  }
}

// ---- run config ------------------------------------------------------------------

void RunConfig::validate() const {
  model.validate(tokenizer);
  synth.validate();
  missing.validate();
  train_for_seed(seeds.empty() ? 1 : seeds.front()).validate();
  mae.validate(tokenizer);
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (eval.r_test.empty()) throw ConfigError("eval.r_test must not be empty");
  if (!std::is_sorted(eval.r_test.begin(), eval.r_test.end())) throw ConfigError("eval.r_test must be ascending");
  for (double r : eval.r_test) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("eval.r_test values must lie in [0, 1]");
  }
  if (eval.methods.empty()) throw ConfigError("eval.methods must not be empty");
  if (model.heads.front().classes != synth.classes_head_a ||
      (model.heads.size() == 2 && model.heads[1].classes != synth.classes_head_b)) {
    throw ConfigError("model.heads class counts must match synth.classes_head_a / classes_head_b");
  }
  if (out.empty()) throw ConfigError("out must not be empty");
}

TrainConfig RunConfig::train_for_seed(std::uint64_t seed) const {
  TrainConfig t = train;
  t.policy = missing;
  t.seed = seed;
  return t;
}

void to_json(json& j, const RunConfig& c) {
  j = {{"name", c.name},   {"tokenizer", c.tokenizer}, {"model", c.model}, {"synth", c.synth},
       {"missing", c.missing}, {"train", c.train},     {"mae", c.mae},     {"eval", c.eval},
       {"seeds", c.seeds}, {"out", c.out}};
}

void from_json(const json& j, RunConfig& c) {
  check_object_keys(j, "");
  opt(j, "name", c.name);
  opt(j, "tokenizer", c.tokenizer);
  opt(j, "model", c.model);
  opt(j, "synth", c.synth);
  opt(j, "missing", c.missing);
  opt(j, "train", c.train);
  opt(j, "mae", c.mae);
  opt(j, "eval", c.eval);
  opt(j, "seeds", c.seeds);
  opt(j, "out", c.out);
  c.train.policy = c.missing;
}

std::vector<std::string> unknown_config_keys(const json& j) {
  std::vector<std::string> bad;
  if (!j.is_object()) return bad;
  const auto& keys = schema_keys();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.at("").contains(it.key())) {
      bad.push_back(it.key());
      continue;
    }
    const auto sect = keys.find(it.key());
    if (sect == keys.end() || !it.value().is_object()) continue;
    for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
      if (!sect->second.contains(jt.key())) bad.push_back(it.key() + "." + jt.key());
    }
    if (it.key() == "model" && it.value().contains("heads") && it.value()["heads"].is_array()) {
      const auto& hk = keys.at("model.heads[]");
      for (const auto& h : it.value()["heads"]) {
        if (!h.is_object()) continue;
        for (auto ht = h.begin(); ht != h.end(); ++ht) {
          if (!hk.contains(ht.key())) bad.push_back("model.heads[]." + ht.key());
        }
      }
    }
  }
  return bad;
}

RunConfig parse_run_config(const json& j) {
  // Report every unknown key at once before attempting conversion.
  if (const auto bad = unknown_config_keys(j); !bad.empty()) {
    std::string list;
    for (const auto& k : bad) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a wrong type or missing value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << json(c).dump(2) << '\n';
}

// ---- presets -----------------------------------------------------------------------

std::vector<std::string> preset_names() { return {"epic-kitchens-like", "epic-sounds-like", "ego4d-ar-like"}; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  c.seeds = {1, 2, 3};
  c.out = "runs/" + name;
  if (name == "epic-kitchens-like") {
    // Video dominant, verb + noun heads, video assumed missing at test.
    c.missing = {TrainMissingMode::RandomReplace, 0.25, MissingDesignation::Video};
  } else if (name == "epic-sounds-like") {
    // Audio dominant, one head, audio assumed missing at test.
    std::swap(c.synth.snr_a_for_code_a, c.synth.snr_v_for_code_a);
    std::swap(c.synth.snr_a_for_code_b, c.synth.snr_v_for_code_b);
    c.model.heads = {{"sound", c.synth.classes_head_a}};
    c.missing = {TrainMissingMode::RandomReplace, 0.60, MissingDesignation::Audio};
    c.eval.modality = Modality::Audio;
  } else if (name == "ego4d-ar-like") {
    // 29% of clips naturally lack audio; class-weighted verb head.
    c.synth.natural_missing_rate = 0.29;
    c.synth.natural_missing_modality = Modality::Audio;
    c.model.heads = {{"verb", c.synth.classes_head_a}};
    c.missing = {TrainMissingMode::RandomReplace, 0.25, MissingDesignation::Audio};
    c.train.r_train = 0.29;
    c.train.class_weighted = true;
    c.eval.modality = Modality::Audio;
    c.eval.r_test = {0.29, 0.5, 0.75, 1.0};
  } else {
    std::string list;
    for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (available: " + list + ")");
  }
  c.train.policy = c.missing;
  c.validate();
  return c;
}

}  // namespace mmt
