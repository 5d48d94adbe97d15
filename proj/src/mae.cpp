#include "mmt/mae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "mmt/error.hpp"
#include "mmt/optim.hpp"

namespace mmt {

void MaeConfig::validate(const TokenizerConfig& tok) const {
  for (Modality m : kModalities) {
    const double r = mask_ratio(m);
    if (!(r > 0.0 && r < 1.0)) {
      throw ConfigError(std::string("mae.mask_ratio_") + modality_name(m) + " must lie in (0, 1)");
    }
    const std::size_t n = tok.token_count(m);
    const auto k = static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
    if (k == 0 || k == n) {
      throw ConfigError(std::string("mae.mask_ratio_") + modality_name(m) + " leaves no " +
                        (k == 0 ? "masked" : "visible") + " tokens out of " + std::to_string(n));
    }
  }
  if (decoder_depth == 0 || decoder_dim == 0) throw ConfigError("mae decoder depth and width must be positive");
  if (decoder_heads == 0 || decoder_dim % decoder_heads != 0) {
    throw ConfigError("mae.decoder_dim " + std::to_string(decoder_dim) + " is not divisible by " +
                      std::to_string(decoder_heads) + " heads");
  }
  if (epochs == 0 || batch_size == 0) throw ConfigError("mae epochs and batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("mae.learning_rate must be positive");
}

MaskSplit mask_indices(std::size_t n, double ratio, SplitMix64& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("mask ratio must lie in (0, 1)");
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  if (k == 0 || k >= n) {
    throw ConfigError("mask ratio " + std::to_string(ratio) + " leaves an empty side for " + std::to_string(n) +
                      " tokens");
  }
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  fisher_yates(ids, rng);
  MaskSplit s;
  s.masked.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  s.visible.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
  std::sort(s.masked.begin(), s.masked.end());
  std::sort(s.visible.begin(), s.visible.end());
  return s;
}

MaskedSequence mask_tokens(const TokenSequence& seq, double ratio, SplitMix64& rng) {
  const MaskSplit split = mask_indices(seq.size(), ratio, rng);
  MaskedSequence out;
  out.visible = seq;
  out.visible.tokens = ad::gather_rows(seq.tokens, split.visible);
  out.visible.positions.clear();
  for (std::size_t i : split.visible) out.visible.positions.push_back(seq.positions[i]);
  out.masked = split.masked;
  return out;
}

std::string mask_token_name(Modality m) { return std::string("decoder.") + modality_name(m) + ".mask_token"; }

namespace {

std::string decoder_prefix(Modality m) { return std::string("decoder.") + modality_name(m); }

}  // namespace

ParameterSet make_decoder(const TokenizerConfig& tok, const MaeConfig& cfg, std::uint64_t seed) {
  cfg.validate(tok);
  SplitMix64 rng = SplitMix64::stream(seed, "decoder-init");
  ParameterSet p;
  const std::size_t d = tok.embed_dim, dd = cfg.decoder_dim;
  for (Modality m : kModalities) {
    const std::string pre = decoder_prefix(m);
    p.add(pre + ".embed.w", xavier_uniform(d, dd, rng));
    p.add(pre + ".embed.b", Tensor({1, dd}), false);
    p.add(mask_token_name(m), normal_init({1, dd}, 0.02, rng), false);
    p.add(pre + ".pos", normal_init({tok.token_count(m), dd}, 0.02, rng), false);
    for (std::size_t l = 0; l < cfg.decoder_depth; ++l) add_block_parameters(p, pre, l, dd, 4 * dd, rng);
    p.add(pre + ".norm.g", Tensor({1, dd}, 1.0), false);
    p.add(pre + ".norm.b", Tensor({1, dd}), false);
    p.add(pre + ".pred.w", xavier_uniform(dd, tok.patch_volume(m), rng));
    p.add(pre + ".pred.b", Tensor({1, tok.patch_volume(m)}), false);
  }
  return p;
}

namespace {

// Decoder for one modality: encoded visible rows (without CLS) to patch
// predictions for every position.
ad::Var decode(ad::Tape& tape, const ParameterSet& dec, const MaeConfig& cfg, Modality m, ad::Var visible,
               const MaskSplit& split, double eps) {
  const std::string pre = decoder_prefix(m);
  auto P = [&](const std::string& name) { return tape.parameter(dec, dec.index(name)); };
  const ad::Var y = ad::add_row(ad::matmul(visible, P(pre + ".embed.w")), P(pre + ".embed.b"));
  const ad::Var parts[] = {y, ad::repeat_rows(P(mask_token_name(m)), split.masked.size())};
  // Row j of the concatenation holds position order[j]; invert to restore
  // positional order.
  std::vector<std::size_t> order(split.visible);
  order.insert(order.end(), split.masked.begin(), split.masked.end());
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) inverse[order[j]] = j;
  ad::Var x = ad::add(ad::gather_rows(ad::concat_rows(parts), inverse), P(pre + ".pos"));
  for (std::size_t l = 0; l < cfg.decoder_depth; ++l) x = encoder_block(tape, dec, pre, l, x, cfg.decoder_heads, eps);
  x = ad::layer_norm(x, P(pre + ".norm.g"), P(pre + ".norm.b"), eps);
  return ad::add_row(ad::matmul(x, P(pre + ".pred.w")), P(pre + ".pred.b"));
}

}  // namespace

MaeForward mae_forward(ad::Tape& tape, const MbtModel& encoder, const ParameterSet& decoder, const MaeConfig& cfg,
                       const Tensor& raw_audio, const Tensor& raw_video, const MaskSplit& mask_audio,
                       const MaskSplit& mask_video) {
  const TokenizerConfig& tok = encoder.tokenizer();
  MaeForward out;
  out.mask_audio = mask_audio;
  out.mask_video = mask_video;
  TokenSequence vis[2];
  for (Modality m : kModalities) {
    const MaskSplit& split = m == Modality::Audio ? mask_audio : mask_video;
    if (split.visible.size() + split.masked.size() != tok.token_count(m)) {
      throw DimensionError(std::string(modality_name(m)) + " mask does not cover every token");
    }
    const TokenSequence full = encoder.embed(tape, m == Modality::Audio ? raw_audio : raw_video, m);
    TokenSequence& v = vis[m == Modality::Audio ? 0 : 1];
    v = full;
    v.tokens = ad::gather_rows(full.tokens, split.visible);
    v.positions = split.visible;
  }
  const EncodedStreams enc = encoder.encode_visible(tape, vis[0], vis[1]);
  const double eps = encoder.config().layer_norm_eps;
  std::vector<ad::Var> losses;
  for (Modality m : kModalities) {
    const bool audio = m == Modality::Audio;
    const MaskSplit& split = audio ? mask_audio : mask_video;
    const ad::Var encoded = *enc[m];
    const ad::Var pred = decode(tape, decoder, cfg, m, ad::slice_rows(encoded, 1, encoded.rows()), split, eps);
    Tensor target = patchify(audio ? raw_audio : raw_video, m, tok);
    losses.push_back(ad::masked_mse(pred, target, split.masked));
    (audio ? out.pred_audio : out.pred_video) = pred;
    (audio ? out.target_audio : out.target_video) = std::move(target);
  }
  out.loss = ad::add(losses[0], losses[1]);
  return out;
}

MaeForward mae_forward(ad::Tape& tape, const MbtModel& encoder, const ParameterSet& decoder, const MaeConfig& cfg,
                       const Tensor& raw_audio, const Tensor& raw_video, SplitMix64& rng) {
  const TokenizerConfig& tok = encoder.tokenizer();
  const MaskSplit ma = mask_indices(tok.token_count(Modality::Audio), cfg.mask_ratio_audio, rng);
  const MaskSplit mv = mask_indices(tok.token_count(Modality::Video), cfg.mask_ratio_video, rng);
  return mae_forward(tape, encoder, decoder, cfg, raw_audio, raw_video, ma, mv);
}

PretrainResult pretrain(const std::vector<SyntheticSample>& train, const TokenizerConfig& tok,
                        const ModelConfig& model_cfg, const MaeConfig& cfg, std::ostream* log) {
  cfg.validate(tok);
  if (model_cfg.fusion_mode != FusionMode::Bottleneck) throw ConfigError("MAE pretraining needs bottleneck fusion");
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].audio_present && train[i].video_present) ids.push_back(i);
  }
  if (ids.empty()) throw DataError("MAE pretraining needs modal-complete samples");

  PretrainResult r{MbtModel(tok, model_cfg, cfg.seed), make_decoder(tok, cfg, cfg.seed), {}};
  const std::size_t steps_per_epoch = (ids.size() + cfg.batch_size - 1) / cfg.batch_size;
  AdamWConfig oc;
  oc.learning_rate = cfg.learning_rate;
  oc.weight_decay = cfg.weight_decay;
  oc.warmup_steps = std::min(cfg.warmup_epochs, cfg.epochs - 1) * steps_per_epoch;
  oc.total_steps = cfg.epochs * steps_per_epoch + 1;
  AdamW enc_opt(r.encoder.params(), oc), dec_opt(r.decoder, oc);
  Gradients enc_grads(r.encoder.params()), dec_grads(r.decoder);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = ids;
    SplitMix64 shuffle_rng = SplitMix64::child(cfg.seed, "mae-order", epoch);
    fisher_yates(order, shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      enc_grads.zero();
      dec_grads.zero();
      for (std::size_t j = start; j < end; ++j) {
        const SyntheticSample& s = train[order[j]];
        SplitMix64 mask_rng = SplitMix64::child(cfg.seed, "mae-mask", epoch * train.size() + order[j]);
        ad::Tape tape;
        const MaeForward f = mae_forward(tape, r.encoder, r.decoder, cfg, s.raw_audio, s.raw_video, mask_rng);
        tape.backward(f.loss);
        tape.accumulate_gradients(r.encoder.params(), enc_grads);
        tape.accumulate_gradients(r.decoder, dec_grads);
        total += f.loss.value().item();
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      enc_grads.scale(inv);
      dec_grads.scale(inv);
      enc_opt.step(r.encoder.params(), enc_grads);
      dec_opt.step(r.decoder, dec_grads);
    }
    r.epoch_loss.push_back(total / static_cast<double>(order.size()));
    if (log) *log << "mae epoch " << epoch + 1 << " loss " << r.epoch_loss.back() << '\n';
  }
  return r;
}

MbtModel transfer_encoder(const MbtModel& pretrained, const ModelConfig& target, std::uint64_t seed) {
  const ModelConfig& src = pretrained.config();
  if (src.depth != target.depth || src.attention_heads != target.attention_heads ||
      src.fusion_layer != target.fusion_layer || src.bottleneck_count != target.bottleneck_count ||
      src.fusion_mode != target.fusion_mode || src.mlp_ratio != target.mlp_ratio) {
    throw CheckpointError("pretrained encoder architecture does not match the fine-tuning model");
  }
  MbtModel fresh(pretrained.tokenizer(), target, seed);
  auto fresh_only = [](const std::string& name) {
    return name.starts_with("mmt.") || name.find(".head.") != std::string::npos;
  };
  for (std::size_t i = 0; i < fresh.params().size(); ++i) {
    Parameter& p = fresh.params()[i];
    if (fresh_only(p.name)) continue;
    const auto j = pretrained.params().find(p.name);
    if (!j || pretrained.params()[*j].value.shape() != p.value.shape()) {
      throw CheckpointError("pretrained encoder lacks a compatible '" + p.name + "'");
    }
    p.value = pretrained.params()[*j].value;
  }
  return fresh;
}

}  // namespace mmt
