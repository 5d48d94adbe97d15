#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmt/autodiff.hpp"
#include "mmt/params.hpp"
#include "mmt/rng.hpp"
#include "mmt/tokenizer.hpp"

namespace mmt {

enum class FusionMode { Bottleneck, FullSelfAttention };

const char* fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);

struct HeadSpec {
  std::string name;
  std::size_t classes = 2;
  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct ModelConfig {
  std::size_t depth = 4;
  std::size_t attention_heads = 4;
  // First layer with cross-modal exchange. 0 fuses at every layer, depth
  // disables fusion entirely.
  std::size_t fusion_layer = 2;
  std::size_t bottleneck_count = 4;
  FusionMode fusion_mode = FusionMode::Bottleneck;
  std::vector<HeadSpec> heads{{"verb", 4}, {"noun", 3}};
  std::size_t mlp_ratio = 4;
  double attention_dropout = 0.0;  // applied to the attention output when training
  double layer_norm_eps = 1e-6;

  void validate(const TokenizerConfig& tok) const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One logits row (1 x classes) per configured head, in ModelConfig::heads order.
using HeadLogits = std::vector<ad::Var>;

struct ForwardContext {
  bool training = false;
  SplitMix64* rng = nullptr;  // required when training with dropout
};

// Per-modality encoder output after the final norm; row 0 is the CLS token.
// A modality that was skipped has no value.
struct EncodedStreams {
  std::optional<ad::Var> audio;
  std::optional<ad::Var> video;
  std::optional<ad::Var>& operator[](Modality m) { return m == Modality::Audio ? audio : video; }
  const std::optional<ad::Var>& operator[](Modality m) const { return m == Modality::Audio ? audio : video; }
};

std::string mmt_parameter_name(Modality m);

// Parameter indices of one pre-norm encoder block.
struct BlockIndex {
  std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};
inline constexpr const char* kBottleneckName = "bottleneck";

// Multimodal Bottleneck Transformer: unshared per-modality pre-norm encoder
// stacks, B learned bottleneck tokens mediating all cross-modal exchange from
// fusion_layer onward, per-modality CLS readout with logits averaged across
// modalities. The parameter set also carries the tokenizer projections and
// the missing-modality tokens so a single checkpoint holds everything.
class MbtModel {
 public:
  MbtModel(TokenizerConfig tok, ModelConfig cfg, std::uint64_t seed);
  // Adopts an existing parameter set; names and shapes must match the config.
  MbtModel(TokenizerConfig tok, ModelConfig cfg, ParameterSet params);

  const TokenizerConfig& tokenizer() const noexcept { return tok_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  TokenSequence embed(ad::Tape& tape, const Tensor& raw, Modality m) const;

  // Either sequence may be null (skipped modality); at least one is required.
  // Dispatches on fusion_mode.
  EncodedStreams encode(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                        const ForwardContext& ctx = {}) const;
  // Bottleneck encoding of token subsets (MAE visible tokens); rows must
  // match the sequence's positions.
  EncodedStreams encode_visible(ad::Tape& tape, const TokenSequence& audio, const TokenSequence& video,
                                const ForwardContext& ctx = {}) const;
  HeadLogits readout(ad::Tape& tape, const EncodedStreams& streams) const;

  // Full two-modality forward in the configured fusion mode.
  HeadLogits forward(ad::Tape& tape, const TokenSequence& audio, const TokenSequence& video,
                     const ForwardContext& ctx = {}) const;
  // Forward with possibly-skipped modalities (null = skipped).
  HeadLogits forward_present(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                             const ForwardContext& ctx = {}) const;
  HeadLogits forward_full_sa(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                             const ForwardContext& ctx = {}) const;
  // One modality's own stack end to end, no bottleneck tokens.
  HeadLogits unimodal_forward(ad::Tape& tape, const TokenSequence& tokens, const ForwardContext& ctx = {}) const;

  // Closed-form scalar parameter count for (tok, cfg).
  static std::size_t expected_parameter_count(const TokenizerConfig& tok, const ModelConfig& cfg);

 private:
  struct StackIndex {
    std::vector<BlockIndex> layers;  // indexed by absolute layer number; unused entries stay default
    std::vector<bool> has_layer;
  };

  void build_index();
  ad::Var block(ad::Tape& tape, const BlockIndex& li, ad::Var x, const ForwardContext& ctx) const;
  ad::Var with_cls(ad::Tape& tape, Modality m, const TokenSequence& seq) const;
  EncodedStreams encode_bottleneck(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                   const ForwardContext& ctx) const;
  EncodedStreams encode_full_sa(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                const ForwardContext& ctx) const;
  void check_sequence(const TokenSequence& seq, bool allow_partial = false) const;

  TokenizerConfig tok_;
  ModelConfig cfg_;
  ParameterSet params_;
  StackIndex audio_stack_, video_stack_, fused_stack_;
};

// Adds the encoder-block parameters "<prefix>.layer<l>.*" for one layer.
void add_block_parameters(ParameterSet& params, const std::string& prefix, std::size_t layer, std::size_t dim,
                          std::size_t hidden, SplitMix64& rng);

// Pre-norm encoder block over an explicit parameter prefix; shared with the
// MAE decoder.
ad::Var encoder_block(ad::Tape& tape, const ParameterSet& params, const std::string& prefix, std::size_t layer,
                      ad::Var x, std::size_t heads, double eps, const ForwardContext& ctx = {},
                      double attention_dropout = 0.0);

}  // namespace mmt
