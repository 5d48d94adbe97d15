#include "mmt/tokenizer.hpp"

#include <cmath>
#include <numeric>

#include "mmt/error.hpp"

namespace mmt {

const char* modality_name(Modality m) { return m == Modality::Audio ? "audio" : "video"; }

Modality parse_modality(const std::string& s) {
  if (s == "audio") return Modality::Audio;
  if (s == "video") return Modality::Video;
  throw ConfigError("unknown modality '" + s + "' (expected audio or video)");
}

namespace {

void require_divisible(std::size_t extent, std::size_t patch, const std::string& axis) {
  if (patch == 0) throw ConfigError("patch size along " + axis + " must be positive");
  if (extent == 0 || extent % patch != 0) {
    throw ConfigError(axis + " extent " + std::to_string(extent) + " is not divisible by patch size " +
                      std::to_string(patch));
  }
}

}  // namespace

std::size_t TokenizerConfig::audio_frames() const {
  const double frames = static_cast<double>(audio_frames_per_second) * audio_seconds;
  const double rounded = std::round(frames);
  if (audio_seconds <= 0.0 || std::abs(frames - rounded) > 1e-9 * std::max(1.0, frames)) {
    throw ConfigError("audio frames (fps * seconds = " + std::to_string(frames) + ") must be a positive integer");
  }
  return static_cast<std::size_t>(rounded);
}

void TokenizerConfig::validate() const {
  require_divisible(audio_bins, audio_patch[0], "audio frequency");
  require_divisible(audio_frames(), audio_patch[1], "audio time");
  require_divisible(video_frames, video_patch[2], "video time");
  require_divisible(video_hw[0], video_patch[0], "video height");
  require_divisible(video_hw[1], video_patch[1], "video width");
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
}

Shape TokenizerConfig::raw_shape(Modality m) const {
  if (m == Modality::Audio) return {audio_bins, audio_frames()};
  return {video_frames, video_hw[0], video_hw[1]};
}

std::size_t TokenizerConfig::patch_volume(Modality m) const {
  if (m == Modality::Audio) return audio_patch[0] * audio_patch[1];
  return video_patch[0] * video_patch[1] * video_patch[2];
}

std::size_t TokenizerConfig::token_count(Modality m) const {
  return m == Modality::Audio ? audio_token_count(*this) : video_token_count(*this);
}

std::size_t audio_token_count(const TokenizerConfig& cfg) {
  const std::size_t frames = cfg.audio_frames();
  require_divisible(cfg.audio_bins, cfg.audio_patch[0], "audio frequency");
  require_divisible(frames, cfg.audio_patch[1], "audio time");
  return (cfg.audio_bins * frames) / (cfg.audio_patch[0] * cfg.audio_patch[1]);
}

std::size_t video_token_count(const TokenizerConfig& cfg) {
  require_divisible(cfg.video_frames, cfg.video_patch[2], "video time");
  require_divisible(cfg.video_hw[0], cfg.video_patch[0], "video height");
  require_divisible(cfg.video_hw[1], cfg.video_patch[1], "video width");
  return (cfg.video_frames * cfg.video_hw[0] * cfg.video_hw[1]) /
         (cfg.video_patch[0] * cfg.video_patch[1] * cfg.video_patch[2]);
}

namespace {

// Visits (patch_row, patch_col, raw_flat_index) for every element. The same
// walk drives both directions so patchify/unpatchify are exact inverses.
template <typename F>
void walk_patches(Modality m, const TokenizerConfig& cfg, F&& f) {
  if (m == Modality::Audio) {
    const std::size_t frames = cfg.audio_frames();
    const auto [ph, pw] = cfg.audio_patch;
    const std::size_t gh = cfg.audio_bins / ph, gw = frames / pw;
    for (std::size_t by = 0; by < gh; ++by)
      for (std::size_t bx = 0; bx < gw; ++bx)
        for (std::size_t y = 0; y < ph; ++y)
          for (std::size_t x = 0; x < pw; ++x)
            f(by * gw + bx, y * pw + x, (by * ph + y) * frames + bx * pw + x);
    return;
  }
  const auto [ph, pw, pt] = cfg.video_patch;
  const std::size_t H = cfg.video_hw[0], W = cfg.video_hw[1];
  const std::size_t gt = cfg.video_frames / pt, gh = H / ph, gw = W / pw;
  for (std::size_t bt = 0; bt < gt; ++bt)
    for (std::size_t by = 0; by < gh; ++by)
      for (std::size_t bx = 0; bx < gw; ++bx)
        for (std::size_t t = 0; t < pt; ++t)
          for (std::size_t y = 0; y < ph; ++y)
            for (std::size_t x = 0; x < pw; ++x)
              f((bt * gh + by) * gw + bx, (t * ph + y) * pw + x,
                ((bt * pt + t) * H + by * ph + y) * W + bx * pw + x);
}

}  // namespace

Tensor patchify(const Tensor& raw, Modality m, const TokenizerConfig& cfg) {
  cfg.validate();
  if (raw.shape() != cfg.raw_shape(m)) {
    throw DimensionError(std::string(modality_name(m)) + " input has shape " + shape_str(raw.shape()) +
                         ", expected " + shape_str(cfg.raw_shape(m)));
  }
  Tensor out({cfg.token_count(m), cfg.patch_volume(m)});
  const std::size_t vol = cfg.patch_volume(m);
  walk_patches(m, cfg, [&](std::size_t p, std::size_t k, std::size_t src) { out[p * vol + k] = raw[src]; });
  return out;
}

Tensor unpatchify(const Tensor& patches, Modality m, const TokenizerConfig& cfg) {
  cfg.validate();
  const Shape expected{cfg.token_count(m), cfg.patch_volume(m)};
  if (patches.shape() != expected) {
    throw DimensionError("patch matrix has shape " + shape_str(patches.shape()) + ", expected " +
                         shape_str(expected));
  }
  Tensor out(cfg.raw_shape(m));
  const std::size_t vol = cfg.patch_volume(m);
  walk_patches(m, cfg, [&](std::size_t p, std::size_t k, std::size_t dst) { out[dst] = patches[p * vol + k]; });
  return out;
}

std::string patch_weight_name(Modality m) { return std::string(modality_name(m)) + ".patch.w"; }
std::string patch_bias_name(Modality m) { return std::string(modality_name(m)) + ".patch.b"; }
std::string position_table_name(Modality m) { return std::string(modality_name(m)) + ".pos"; }

void add_tokenizer_parameters(ParameterSet& params, const TokenizerConfig& cfg, SplitMix64& rng) {
  cfg.validate();
  for (Modality m : kModalities) {
    params.add(patch_weight_name(m), xavier_uniform(cfg.patch_volume(m), cfg.embed_dim, rng));
    params.add(patch_bias_name(m), Tensor({1, cfg.embed_dim}), false);
    params.add(position_table_name(m), normal_init({cfg.token_count(m), cfg.embed_dim}, 0.02, rng), false);
  }
}

TokenSequence embed(ad::Tape& tape, const ParameterSet& params, const Tensor& raw, Modality m,
                    const TokenizerConfig& cfg) {
  const ad::Var patches = tape.constant(patchify(raw, m, cfg));
  const ad::Var w = tape.parameter(params, params.index(patch_weight_name(m)));
  const ad::Var b = tape.parameter(params, params.index(patch_bias_name(m)));
  const ad::Var pos = tape.parameter(params, params.index(position_table_name(m)));
  if (pos.rows() != cfg.token_count(m)) {
    throw DimensionError(std::string(modality_name(m)) + " positional table has " + std::to_string(pos.rows()) +
                         " rows, expected " + std::to_string(cfg.token_count(m)));
  }
  TokenSequence seq;
  seq.tokens = ad::add(ad::add_row(ad::matmul(patches, w), b), pos);
  seq.positions.resize(cfg.token_count(m));
  std::iota(seq.positions.begin(), seq.positions.end(), std::size_t{0});
  seq.modality = m;
  return seq;
}

}  // namespace mmt
