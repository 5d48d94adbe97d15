#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mmt/autodiff.hpp"
#include "mmt/mbt.hpp"
#include "mmt/params.hpp"
#include "mmt/rng.hpp"
#include "mmt/synthdata.hpp"
#include "mmt/tokenizer.hpp"

namespace mmt {

// Masked-autoencoder pretraining. Defaults are desk scale; the full-scale
// decoder is depth 4, 16 heads, width 512.
struct MaeConfig {
  double mask_ratio_audio = 0.7;
  double mask_ratio_video = 0.9;
  std::size_t decoder_depth = 2;
  std::size_t decoder_heads = 4;
  std::size_t decoder_dim = 16;
  std::size_t epochs = 4;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.05;
  std::size_t warmup_epochs = 1;
  std::uint64_t seed = 1;

  double mask_ratio(Modality m) const { return m == Modality::Audio ? mask_ratio_audio : mask_ratio_video; }
  void validate(const TokenizerConfig& tok) const;
  friend bool operator==(const MaeConfig&, const MaeConfig&) = default;
};

struct MaskSplit {
  std::vector<std::size_t> visible;  // ascending
  std::vector<std::size_t> masked;   // ascending
};

// floor(ratio * n) indices chosen uniformly without replacement. Throws
// ConfigError when either side would be empty.
MaskSplit mask_indices(std::size_t n, double ratio, SplitMix64& rng);

struct MaskedSequence {
  TokenSequence visible;  // rows of the input at the visible positions
  std::vector<std::size_t> masked;
};
MaskedSequence mask_tokens(const TokenSequence& seq, double ratio, SplitMix64& rng);

// Per-modality decoder parameters, "decoder.<m>.*". The mask token of each
// decoder ("decoder.<m>.mask_token") is a separate parameter from the MMT.
ParameterSet make_decoder(const TokenizerConfig& tok, const MaeConfig& cfg, std::uint64_t seed);
std::string mask_token_name(Modality m);

struct MaeForward {
  ad::Var loss;        // sum over modalities of the masked-only MSE
  ad::Var pred_audio;  // (n_audio, patch_volume_audio)
  ad::Var pred_video;
  Tensor target_audio;  // raw patches, unnormalized
  Tensor target_video;
  MaskSplit mask_audio;
  MaskSplit mask_video;
};

// Visible tokens through the bottleneck encoder, mask tokens appended at the
// masked positions, per-modality decoders reconstruct raw patches.
MaeForward mae_forward(ad::Tape& tape, const MbtModel& encoder, const ParameterSet& decoder,
                       const MaeConfig& cfg, const Tensor& raw_audio, const Tensor& raw_video, SplitMix64& rng);

// Same with explicit masks (tests).
MaeForward mae_forward(ad::Tape& tape, const MbtModel& encoder, const ParameterSet& decoder,
                       const MaeConfig& cfg, const Tensor& raw_audio, const Tensor& raw_video,
                       const MaskSplit& mask_audio, const MaskSplit& mask_video);

struct PretrainResult {
  MbtModel encoder;
  ParameterSet decoder;
  std::vector<double> epoch_loss;
};

// Pretrains on the modal-complete training samples.
PretrainResult pretrain(const std::vector<SyntheticSample>& train, const TokenizerConfig& tok,
                        const ModelConfig& model_cfg, const MaeConfig& cfg, std::ostream* log = nullptr);

// Encoder weights copied from `pretrained`; heads and MMTs freshly drawn
// from `seed`. Throws CheckpointError unless the encoder architectures match.
MbtModel transfer_encoder(const MbtModel& pretrained, const ModelConfig& target, std::uint64_t seed);

}  // namespace mmt
