#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mmt/autodiff.hpp"
#include "mmt/params.hpp"
#include "mmt/rng.hpp"
#include "mmt/tensor.hpp"

namespace mmt {

enum class Modality { Audio, Video };

inline constexpr std::array<Modality, 2> kModalities{Modality::Audio, Modality::Video};

const char* modality_name(Modality m);
Modality parse_modality(const std::string& s);
inline Modality other(Modality m) { return m == Modality::Audio ? Modality::Video : Modality::Audio; }

// Patch geometry of both modalities. Defaults are the desk-scale geometry:
// audio 16 bins x 64 frames with 8x8 patches (16 tokens), video 4 frames of
// 32x32 with 8x8x2 tubes (32 tokens).
struct TokenizerConfig {
  std::size_t audio_bins = 16;
  std::size_t audio_frames_per_second = 64;
  double audio_seconds = 1.0;
  std::array<std::size_t, 2> audio_patch{8, 8};  // (bins, frames)
  std::size_t video_frames = 4;
  std::array<std::size_t, 2> video_hw{32, 32};
  std::array<std::size_t, 3> video_patch{8, 8, 2};  // (h, w, t)
  std::size_t embed_dim = 32;

  std::size_t audio_frames() const;  // fps * t, required integral
  void validate() const;
  Shape raw_shape(Modality m) const;
  std::size_t patch_volume(Modality m) const;
  std::size_t token_count(Modality m) const;

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

std::size_t audio_token_count(const TokenizerConfig& cfg);
std::size_t video_token_count(const TokenizerConfig& cfg);

// Non-overlapping patch extraction. Rows are patches in grid order
// (frequency-major for audio; time, then height, then width for video);
// columns are the flattened patch contents in the same nesting.
Tensor patchify(const Tensor& raw, Modality m, const TokenizerConfig& cfg);
Tensor unpatchify(const Tensor& patches, Modality m, const TokenizerConfig& cfg);

struct TokenSequence {
  ad::Var tokens;                    // (n_tokens, embed_dim)
  std::vector<std::size_t> positions;  // positional index of every row
  Modality modality = Modality::Audio;
  bool present = true;               // false: not fed to the model (skip)
  bool substituted = false;          // tokens came from MMT, not raw data

  std::size_t size() const noexcept { return positions.size(); }
};

// Parameter names used by the tokenizer for modality m.
std::string patch_weight_name(Modality m);
std::string patch_bias_name(Modality m);
std::string position_table_name(Modality m);

void add_tokenizer_parameters(ParameterSet& params, const TokenizerConfig& cfg, SplitMix64& rng);

// Patch-flatten, linear projection, learned positional embedding.
TokenSequence embed(ad::Tape& tape, const ParameterSet& params, const Tensor& raw, Modality m,
                    const TokenizerConfig& cfg);
inline TokenSequence embed_audio(ad::Tape& tape, const ParameterSet& params, const Tensor& raw,
                                 const TokenizerConfig& cfg) {
  return embed(tape, params, raw, Modality::Audio, cfg);
}
inline TokenSequence embed_video(ad::Tape& tape, const ParameterSet& params, const Tensor& raw,
                                 const TokenizerConfig& cfg) {
  return embed(tape, params, raw, Modality::Video, cfg);
}

}  // namespace mmt
