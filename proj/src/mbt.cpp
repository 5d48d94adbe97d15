#include "mmt/mbt.hpp"

#include "mmt/error.hpp"

namespace mmt {

const char* fusion_mode_name(FusionMode m) {
  return m == FusionMode::Bottleneck ? "bottleneck" : "full_self_attention";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "bottleneck") return FusionMode::Bottleneck;
  if (s == "full_self_attention") return FusionMode::FullSelfAttention;
  throw ConfigError("unknown fusion_mode '" + s + "' (expected bottleneck or full_self_attention)");
}

std::string mmt_parameter_name(Modality m) { return std::string("mmt.") + modality_name(m); }

void ModelConfig::validate(const TokenizerConfig& tok) const {
  tok.validate();
  if (depth == 0) throw ConfigError("model.depth must be positive");
  if (fusion_layer > depth) {
    throw ConfigError("model.fusion_layer " + std::to_string(fusion_layer) + " exceeds depth " +
                      std::to_string(depth));
  }
  if (fusion_mode == FusionMode::Bottleneck && bottleneck_count == 0) {
    throw ConfigError("model.bottleneck_count must be at least 1 in bottleneck mode");
  }
  if (attention_heads == 0 || tok.embed_dim % attention_heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(tok.embed_dim) + " is not divisible by " +
                      std::to_string(attention_heads) + " attention heads");
  }
  if (heads.empty() || heads.size() > 2) throw ConfigError("model.heads must list one or two heads");
  for (const auto& h : heads) {
    if (h.classes < 2) throw ConfigError("head '" + h.name + "' needs at least 2 classes");
  }
  if (heads.size() == 2 && heads[0].name == heads[1].name) throw ConfigError("head names must be distinct");
  if (mlp_ratio == 0) throw ConfigError("model.mlp_ratio must be positive");
  if (attention_dropout < 0.0 || attention_dropout >= 1.0) throw ConfigError("attention_dropout must lie in [0, 1)");
}

namespace {

std::string layer_prefix(const std::string& prefix, std::size_t layer) {
  return prefix + ".layer" + std::to_string(layer);
}

}  // namespace

void add_block_parameters(ParameterSet& params, const std::string& prefix, std::size_t layer, std::size_t dim,
                          std::size_t hidden, SplitMix64& rng) {
  const std::string p = layer_prefix(prefix, layer);
  params.add(p + ".ln1.g", Tensor({1, dim}, 1.0), false);
  params.add(p + ".ln1.b", Tensor({1, dim}), false);
  for (const char* n : {"q", "k", "v", "o"}) {
    params.add(p + ".attn.w" + n, xavier_uniform(dim, dim, rng));
    params.add(p + ".attn.b" + n, Tensor({1, dim}), false);
  }
  params.add(p + ".ln2.g", Tensor({1, dim}, 1.0), false);
  params.add(p + ".ln2.b", Tensor({1, dim}), false);
  params.add(p + ".mlp.w1", xavier_uniform(dim, hidden, rng));
  params.add(p + ".mlp.b1", Tensor({1, hidden}), false);
  params.add(p + ".mlp.w2", xavier_uniform(hidden, dim, rng));
  params.add(p + ".mlp.b2", Tensor({1, dim}), false);
}

namespace {

BlockIndex block_refs(const ParameterSet& params, const std::string& prefix, std::size_t layer) {
  const std::string p = layer_prefix(prefix, layer);
  return {params.index(p + ".ln1.g"),   params.index(p + ".ln1.b"),   params.index(p + ".attn.wq"),
          params.index(p + ".attn.bq"), params.index(p + ".attn.wk"), params.index(p + ".attn.bk"),
          params.index(p + ".attn.wv"), params.index(p + ".attn.bv"), params.index(p + ".attn.wo"),
          params.index(p + ".attn.bo"), params.index(p + ".ln2.g"),   params.index(p + ".ln2.b"),
          params.index(p + ".mlp.w1"),  params.index(p + ".mlp.b1"),  params.index(p + ".mlp.w2"),
          params.index(p + ".mlp.b2")};
}

// x + MHA(LN(x)), then + MLP(LN(.)).
ad::Var run_block(ad::Tape& tape, const ParameterSet& params, const BlockIndex& r, ad::Var x, std::size_t heads,
                  double eps, const ForwardContext& ctx, double attention_dropout) {
  auto P = [&](std::size_t i) { return tape.parameter(params, i); };
  const ad::Var h = ad::layer_norm(x, P(r.ln1_g), P(r.ln1_b), eps);
  const ad::Var q = ad::add_row(ad::matmul(h, P(r.wq)), P(r.bq));
  const ad::Var k = ad::add_row(ad::matmul(h, P(r.wk)), P(r.bk));
  const ad::Var v = ad::add_row(ad::matmul(h, P(r.wv)), P(r.bv));
  ad::Var a = ad::multi_head_attention(q, k, v, heads, P(r.wo), P(r.bo));
  if (ctx.training && attention_dropout > 0.0) {
    if (!ctx.rng) throw ConfigError("attention dropout requires a training RNG");
    a = ad::dropout(a, attention_dropout, *ctx.rng);
  }
  x = ad::add(x, a);
  const ad::Var h2 = ad::layer_norm(x, P(r.ln2_g), P(r.ln2_b), eps);
  const ad::Var m = ad::add_row(ad::matmul(ad::gelu(ad::add_row(ad::matmul(h2, P(r.w1)), P(r.b1))), P(r.w2)), P(r.b2));
  return ad::add(x, m);
}

}  // namespace

ad::Var encoder_block(ad::Tape& tape, const ParameterSet& params, const std::string& prefix, std::size_t layer,
                      ad::Var x, std::size_t heads, double eps, const ForwardContext& ctx, double attention_dropout) {
  return run_block(tape, params, block_refs(params, prefix, layer), x, heads, eps, ctx, attention_dropout);
}

// ---- construction -----------------------------------------------------------

MbtModel::MbtModel(TokenizerConfig tok, ModelConfig cfg, std::uint64_t seed)
    : tok_(std::move(tok)), cfg_(std::move(cfg)) {
  cfg_.validate(tok_);
  SplitMix64 rng = SplitMix64::stream(seed, "init");
  const std::size_t d = tok_.embed_dim;
  const std::size_t hidden = d * cfg_.mlp_ratio;
  add_tokenizer_parameters(params_, tok_, rng);
  for (Modality m : kModalities) {
    const std::string name = modality_name(m);
    params_.add(name + ".cls", normal_init({1, d}, 0.02, rng), false);
    const std::size_t own_layers = cfg_.fusion_mode == FusionMode::Bottleneck ? cfg_.depth : cfg_.fusion_layer;
    for (std::size_t l = 0; l < own_layers; ++l) add_block_parameters(params_, name, l, d, hidden, rng);
    params_.add(name + ".norm.g", Tensor({1, d}, 1.0), false);
    params_.add(name + ".norm.b", Tensor({1, d}), false);
    for (const auto& h : cfg_.heads) {
      params_.add(name + ".head." + h.name + ".w", xavier_uniform(d, h.classes, rng));
      params_.add(name + ".head." + h.name + ".b", Tensor({1, h.classes}), false);
    }
  }
  if (cfg_.fusion_mode == FusionMode::Bottleneck) {
    params_.add(kBottleneckName, normal_init({cfg_.bottleneck_count, d}, 0.02, rng), false);
  } else {
    for (std::size_t l = cfg_.fusion_layer; l < cfg_.depth; ++l) add_block_parameters(params_, "fused", l, d, hidden, rng);
  }
  for (Modality m : kModalities) params_.add(mmt_parameter_name(m), normal_init({1, d}, 0.02, rng), false);
  build_index();
}

MbtModel::MbtModel(TokenizerConfig tok, ModelConfig cfg, ParameterSet params)
    : tok_(std::move(tok)), cfg_(std::move(cfg)) {
  cfg_.validate(tok_);
  const MbtModel reference(tok_, cfg_, 0);
  if (params.size() != reference.params_.size()) {
    throw CheckpointError("parameter count " + std::to_string(params.size()) + " does not match the model (" +
                          std::to_string(reference.params_.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& want = reference.params_[i];
    const auto& got = params[i];
    if (got.name != want.name || got.value.shape() != want.value.shape()) {
      throw CheckpointError("parameter '" + got.name + "' " + shape_str(got.value.shape()) +
                            " does not match expected '" + want.name + "' " + shape_str(want.value.shape()));
    }
  }
  params_ = std::move(params);
  build_index();
}

void MbtModel::build_index() {
  auto fill = [&](StackIndex& s, const std::string& prefix) {
    s.layers.assign(cfg_.depth, {});
    s.has_layer.assign(cfg_.depth, false);
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
      if (!params_.contains(layer_prefix(prefix, l) + ".ln1.g")) continue;
      s.layers[l] = block_refs(params_, prefix, l);
      s.has_layer[l] = true;
    }
  };
  fill(audio_stack_, "audio");
  fill(video_stack_, "video");
  fill(fused_stack_, "fused");
}

std::size_t MbtModel::expected_parameter_count(const TokenizerConfig& tok, const ModelConfig& cfg) {
  const std::size_t d = tok.embed_dim;
  const std::size_t hidden = d * cfg.mlp_ratio;
  const std::size_t per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * hidden + hidden) + (hidden * d + d);
  std::size_t head_params = 0;
  for (const auto& h : cfg.heads) head_params += d * h.classes + h.classes;
  std::size_t total = 0;
  for (Modality m : kModalities) {
    total += tok.patch_volume(m) * d + d + tok.token_count(m) * d;  // tokenizer
    total += d;                                                      // cls
    total += 2 * d + head_params;                                    // final norm + heads
    total += d;                                                      // mmt
  }
  if (cfg.fusion_mode == FusionMode::Bottleneck) {
    total += 2 * cfg.depth * per_layer + cfg.bottleneck_count * d;
  } else {
    total += 2 * cfg.fusion_layer * per_layer + (cfg.depth - cfg.fusion_layer) * per_layer;
  }
  return total;
}

// ---- forward ------------------------------------------------------------------

TokenSequence MbtModel::embed(ad::Tape& tape, const Tensor& raw, Modality m) const {
  return mmt::embed(tape, params_, raw, m, tok_);
}

void MbtModel::check_sequence(const TokenSequence& seq, bool allow_partial) const {
  const std::size_t want = tok_.token_count(seq.modality);
  const std::size_t rows = seq.tokens.rows();
  const bool rows_ok = allow_partial ? rows >= 1 && rows <= want && rows == seq.positions.size() : rows == want;
  if (!rows_ok || seq.tokens.cols() != tok_.embed_dim) {
    throw DimensionError(std::string(modality_name(seq.modality)) + " tokens have shape " +
                         shape_str(seq.tokens.value().shape()) + ", expected (" + std::to_string(want) + "x" +
                         std::to_string(tok_.embed_dim) + ")");
  }
}

ad::Var MbtModel::block(ad::Tape& tape, const BlockIndex& li, ad::Var x, const ForwardContext& ctx) const {
  return run_block(tape, params_, li, x, cfg_.attention_heads, cfg_.layer_norm_eps, ctx, cfg_.attention_dropout);
}

ad::Var MbtModel::with_cls(ad::Tape& tape, Modality m, const TokenSequence& seq) const {
  const ad::Var cls = tape.parameter(params_, params_.index(std::string(modality_name(m)) + ".cls"));
  const ad::Var parts[] = {cls, seq.tokens};
  return ad::concat_rows(parts);
}

EncodedStreams MbtModel::encode(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                const ForwardContext& ctx) const {
  if (!audio && !video) throw InvalidInputError("forward needs at least one present modality");
  if (audio) check_sequence(*audio);
  if (video) check_sequence(*video);
  if (cfg_.fusion_mode == FusionMode::FullSelfAttention) return encode_full_sa(tape, audio, video, ctx);
  return encode_bottleneck(tape, audio, video, ctx);
}

EncodedStreams MbtModel::encode_bottleneck(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                           const ForwardContext& ctx) const {
  struct Stream {
    Modality m;
    const StackIndex* stack;
    ad::Var x;
  };
  std::vector<Stream> streams;
  if (audio) streams.push_back({Modality::Audio, &audio_stack_, with_cls(tape, Modality::Audio, *audio)});
  if (video) streams.push_back({Modality::Video, &video_stack_, with_cls(tape, Modality::Video, *video)});

  std::optional<ad::Var> z;
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    if (l < cfg_.fusion_layer) {
      for (auto& s : streams) s.x = block(tape, s.stack->layers[l], s.x, ctx);
      continue;
    }
    if (!z) z = tape.parameter(params_, params_.index(kBottleneckName));
    std::vector<ad::Var> z_hats;
    for (auto& s : streams) {
      const std::size_t n = s.x.rows();
      const ad::Var parts[] = {s.x, *z};
      const ad::Var y = block(tape, s.stack->layers[l], ad::concat_rows(parts), ctx);
      s.x = ad::slice_rows(y, 0, n);
      z_hats.push_back(ad::slice_rows(y, n, y.rows()));
    }
    z = ad::mean_of(z_hats);
  }

  EncodedStreams out;
  for (auto& s : streams) {
    const std::string name = modality_name(s.m);
    out[s.m] = ad::layer_norm(s.x, tape.parameter(params_, params_.index(name + ".norm.g")),
                              tape.parameter(params_, params_.index(name + ".norm.b")), cfg_.layer_norm_eps);
  }
  return out;
}

EncodedStreams MbtModel::encode_full_sa(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                        const ForwardContext& ctx) const {
  std::vector<std::pair<Modality, ad::Var>> streams;
  if (audio) streams.emplace_back(Modality::Audio, with_cls(tape, Modality::Audio, *audio));
  if (video) streams.emplace_back(Modality::Video, with_cls(tape, Modality::Video, *video));
  for (std::size_t l = 0; l < cfg_.fusion_layer; ++l) {
    for (auto& [m, x] : streams) x = block(tape, (m == Modality::Audio ? audio_stack_ : video_stack_).layers[l], x, ctx);
  }
  if (cfg_.fusion_layer < cfg_.depth) {
    std::vector<ad::Var> parts;
    std::vector<std::size_t> lengths;
    for (auto& [m, x] : streams) {
      parts.push_back(x);
      lengths.push_back(x.rows());
    }
    ad::Var joint = ad::concat_rows(parts);
    for (std::size_t l = cfg_.fusion_layer; l < cfg_.depth; ++l) joint = block(tape, fused_stack_.layers[l], joint, ctx);
    std::size_t off = 0;
    for (std::size_t i = 0; i < streams.size(); ++i) {
      streams[i].second = ad::slice_rows(joint, off, off + lengths[i]);
      off += lengths[i];
    }
  }
  EncodedStreams out;
  for (auto& [m, x] : streams) {
    const std::string name = modality_name(m);
    out[m] = ad::layer_norm(x, tape.parameter(params_, params_.index(name + ".norm.g")),
                            tape.parameter(params_, params_.index(name + ".norm.b")), cfg_.layer_norm_eps);
  }
  return out;
}

EncodedStreams MbtModel::encode_visible(ad::Tape& tape, const TokenSequence& audio, const TokenSequence& video,
                                        const ForwardContext& ctx) const {
  if (cfg_.fusion_mode != FusionMode::Bottleneck) throw ConfigError("masked encoding requires bottleneck fusion");
  check_sequence(audio, true);
  check_sequence(video, true);
  return encode_bottleneck(tape, &audio, &video, ctx);
}

HeadLogits MbtModel::readout(ad::Tape& tape, const EncodedStreams& streams) const {
  HeadLogits logits;
  for (const auto& h : cfg_.heads) {
    std::vector<ad::Var> per_modality;
    for (Modality m : kModalities) {
      if (!streams[m]) continue;
      const std::string p = std::string(modality_name(m)) + ".head." + h.name;
      const ad::Var cls = ad::slice_rows(*streams[m], 0, 1);
      per_modality.push_back(ad::add_row(ad::matmul(cls, tape.parameter(params_, params_.index(p + ".w"))),
                                         tape.parameter(params_, params_.index(p + ".b"))));
    }
    logits.push_back(ad::mean_of(per_modality));
  }
  return logits;
}

HeadLogits MbtModel::forward(ad::Tape& tape, const TokenSequence& audio, const TokenSequence& video,
                             const ForwardContext& ctx) const {
  return readout(tape, encode(tape, &audio, &video, ctx));
}

HeadLogits MbtModel::forward_present(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                     const ForwardContext& ctx) const {
  return readout(tape, encode(tape, audio, video, ctx));
}

HeadLogits MbtModel::forward_full_sa(ad::Tape& tape, const TokenSequence* audio, const TokenSequence* video,
                                     const ForwardContext& ctx) const {
  if (cfg_.fusion_mode != FusionMode::FullSelfAttention) {
    throw ConfigError("forward_full_sa requires fusion_mode = full_self_attention");
  }
  return readout(tape, encode(tape, audio, video, ctx));
}

HeadLogits MbtModel::unimodal_forward(ad::Tape& tape, const TokenSequence& tokens, const ForwardContext& ctx) const {
  check_sequence(tokens);
  const Modality m = tokens.modality;
  const StackIndex& stack = m == Modality::Audio ? audio_stack_ : video_stack_;
  ad::Var x = with_cls(tape, m, tokens);
  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    if (!stack.has_layer[l]) throw ConfigError("unimodal forward needs an unshared stack of full depth");
    x = block(tape, stack.layers[l], x, ctx);
  }
  const std::string name = modality_name(m);
  EncodedStreams s;
  s[m] = ad::layer_norm(x, tape.parameter(params_, params_.index(name + ".norm.g")),
                        tape.parameter(params_, params_.index(name + ".norm.b")), cfg_.layer_norm_eps);
  return readout(tape, s);
}

}  // namespace mmt
