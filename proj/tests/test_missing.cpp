#include <gtest/gtest.h>

#include "mmt/error.hpp"
#include "mmt/missing.hpp"

using namespace mmt;

namespace {

TokenizerConfig small_tok() {
  TokenizerConfig t;
  t.audio_bins = 8;
  t.audio_frames_per_second = 16;
  t.audio_patch = {8, 8};
  t.video_frames = 2;
  t.video_hw = {8, 8};
  t.video_patch = {4, 8, 2};
  t.embed_dim = 8;
  return t;
}

ModelConfig small_model() {
  ModelConfig m;
  m.depth = 2;
  m.attention_heads = 2;
  m.fusion_layer = 1;
  m.bottleneck_count = 2;
  m.mlp_ratio = 2;
  return m;
}

Tensor random_raw(const Shape& shape, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t(shape);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

std::vector<Tensor> run(const MbtModel& model, const Tensor& a, const Tensor& v, const InputPlan& plan) {
  ad::Tape tape;
  std::vector<Tensor> out;
  for (const auto& l : forward_with_plan(tape, model, a, v, plan)) out.push_back(tape.value(l));
  return out;
}

TrainMissingPolicy policy(double p, MissingDesignation d = MissingDesignation::Video) {
  TrainMissingPolicy pol;
  pol.p = p;
  pol.designated = d;
  pol.mode = p == 0.0 ? TrainMissingMode::LearnFromIncompleteOnly : TrainMissingMode::RandomReplace;
  return pol;
}

constexpr InputPlan kComplete{};
constexpr InputPlan kNoVideo{Source::Raw, Source::Missing};

}  // namespace

TEST(Replace, TokensAreMmtPlusPosition) {
  const MbtModel model(small_tok(), small_model(), 1);
  ad::Tape tape;
  const auto seq = replace_with_mmt(tape, model, Modality::Video);
  const Tensor& tok = tape.value(seq.tokens);
  const Tensor& mmt = model.params().value(mmt_parameter_name(Modality::Video));
  const Tensor& pos = model.params().value(position_table_name(Modality::Video));
  ASSERT_EQ(tok.shape(), pos.shape());
  for (std::size_t r = 0; r < tok.rows(); ++r)
    for (std::size_t c = 0; c < tok.cols(); ++c) EXPECT_EQ(tok.at(r, c), mmt[c] + pos.at(r, c));
  EXPECT_TRUE(seq.substituted);
  EXPECT_EQ(seq.size(), pos.rows());
}

TEST(Replace, OutputIgnoresMissingContent) {
  const TokenizerConfig tok = small_tok();
  const MbtModel model(tok, small_model(), 2);
  const Tensor a = random_raw(tok.raw_shape(Modality::Audio), 1);
  const InputPlan plan{Source::Raw, Source::Mmt};
  const auto x = run(model, a, random_raw(tok.raw_shape(Modality::Video), 2), plan);
  const auto y = run(model, a, random_raw(tok.raw_shape(Modality::Video), 3), plan);
  for (std::size_t h = 0; h < x.size(); ++h) EXPECT_EQ(x[h], y[h]);
}

TEST(Substitute, ResolvesOnlyMissingAndIsIdempotent) {
  for (auto method : {SubstitutionMethod::Mmt, SubstitutionMethod::Zeros, SubstitutionMethod::Skip}) {
    EXPECT_EQ(substitute(kComplete, method), kComplete);
    const InputPlan once = substitute(kNoVideo, method);
    EXPECT_EQ(once.audio, Source::Raw);
    EXPECT_NE(once.video, Source::Missing);
    EXPECT_EQ(substitute(once, method), once);
  }
  EXPECT_THROW(substitute_skip(plan_from_presence(false, false)), InvalidInputError);
  EXPECT_EQ(substitute_zeros(plan_from_presence(false, false)), (InputPlan{Source::Zeros, Source::Zeros}));
}

TEST(Substitute, SkipEqualsSingleModalityForward) {
  const TokenizerConfig tok = small_tok();
  const MbtModel model(tok, small_model(), 3);
  const Tensor a = random_raw(tok.raw_shape(Modality::Audio), 4);
  const auto skipped = run(model, a, random_raw(tok.raw_shape(Modality::Video), 5), substitute_skip(kNoVideo));
  ad::Tape tape;
  const auto seq = model.embed(tape, a, Modality::Audio);
  const auto direct = model.forward_present(tape, &seq, nullptr);
  for (std::size_t h = 0; h < skipped.size(); ++h) EXPECT_EQ(skipped[h], tape.value(direct[h]));
}

TEST(Substitute, ZerosEqualsZeroRawInput) {
  const TokenizerConfig tok = small_tok();
  const MbtModel model(tok, small_model(), 3);
  const Tensor a = random_raw(tok.raw_shape(Modality::Audio), 4);
  const auto z = run(model, a, random_raw(tok.raw_shape(Modality::Video), 5), substitute_zeros(kNoVideo));
  const auto raw = run(model, a, Tensor(tok.raw_shape(Modality::Video)), kComplete);
  for (std::size_t h = 0; h < z.size(); ++h) EXPECT_EQ(z[h], raw[h]);
}

TEST(Substitute, UnresolvedMissingIsRejected) {
  const TokenizerConfig tok = small_tok();
  const MbtModel model(tok, small_model(), 3);
  ad::Tape tape;
  EXPECT_THROW(forward_with_plan(tape, model, Tensor(tok.raw_shape(Modality::Audio)),
                                 Tensor(tok.raw_shape(Modality::Video)), kNoVideo),
               InvalidInputError);
}

TEST(RandomReplace, RateWithinBinomialInterval) {
  // 10000 draws at p = 0.25: 3 sigma is +-0.0130.
  SplitMix64 rng(2024);
  const auto pol = policy(0.25);
  std::size_t replaced = 0;
  for (int i = 0; i < 10000; ++i) replaced += random_replace(kComplete, pol, rng.uniform()).video == Source::Mmt;
  const double rate = replaced / 10000.0;
  EXPECT_GE(rate, 0.2367);
  EXPECT_LE(rate, 0.2633);
}

TEST(RandomReplace, DrawThresholds) {
  const auto pol = policy(0.4);
  EXPECT_EQ(random_replace(kComplete, pol, 0.39), (InputPlan{Source::Raw, Source::Mmt}));
  EXPECT_EQ(random_replace(kComplete, pol, 0.4), kComplete);
  const auto dual = policy(0.4, MissingDesignation::Both);
  EXPECT_EQ(random_replace(kComplete, dual, 0.1), (InputPlan{Source::Mmt, Source::Raw}));
  EXPECT_EQ(random_replace(kComplete, dual, 0.3), (InputPlan{Source::Raw, Source::Mmt}));
  EXPECT_EQ(random_replace(kComplete, dual, 0.5), kComplete);
  EXPECT_EQ(random_replace(kComplete, policy(1.0), 0.999), (InputPlan{Source::Raw, Source::Mmt}));
}

TEST(RandomReplace, IncompleteSamplesUseMmtAndAreNotReplacedFurther) {
  const auto pol = policy(0.9, MissingDesignation::Both);
  EXPECT_EQ(random_replace(kNoVideo, pol, 0.0), (InputPlan{Source::Raw, Source::Mmt}));
  EXPECT_EQ(random_replace(kNoVideo, policy(0.0), 0.0), (InputPlan{Source::Raw, Source::Mmt}));
  EXPECT_THROW(random_replace(plan_from_presence(false, true), policy(0.5), 0.9), InvalidInputError);
}

TEST(RandomReplace, PolicyValidation) {
  TrainMissingPolicy bad;
  bad.p = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.p = 0.0;
  bad.mode = TrainMissingMode::RandomReplace;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.p = 0.3;
  bad.mode = TrainMissingMode::LearnFromIncompleteOnly;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Gradient, MmtReceivesGradientOnlyWhenUsed) {
  const TokenizerConfig tok = small_tok();
  const MbtModel model(tok, small_model(), 6);
  const Tensor a = random_raw(tok.raw_shape(Modality::Audio), 7);
  const Tensor v = random_raw(tok.raw_shape(Modality::Video), 8);
  auto sample = [&](InputPlan plan) { return PlannedSample{&a, &v, {1, 2}, plan}; };
  const PlannedSample complete[] = {sample(kComplete), sample(kComplete)};
  EXPECT_TRUE(mmt_gradient_mask_check(model, complete));
  const PlannedSample one_video[] = {sample(kComplete), sample({Source::Raw, Source::Mmt})};
  EXPECT_TRUE(mmt_gradient_mask_check(model, one_video));
  const PlannedSample dual[] = {sample({Source::Mmt, Source::Raw}), sample({Source::Raw, Source::Mmt})};
  EXPECT_TRUE(mmt_gradient_mask_check(model, dual));
  const PlannedSample zeros[] = {sample({Source::Zeros, Source::Skip})};
  EXPECT_TRUE(mmt_gradient_mask_check(model, zeros));
}

TEST(Names, RoundTrip) {
  for (auto m : {SubstitutionMethod::Mmt, SubstitutionMethod::Zeros, SubstitutionMethod::Skip})
    EXPECT_EQ(parse_method(method_name(m)), m);
  for (auto d : {MissingDesignation::Audio, MissingDesignation::Video, MissingDesignation::Both})
    EXPECT_EQ(parse_designation(designation_name(d)), d);
  EXPECT_THROW(parse_method("mean"), ConfigError);
  EXPECT_TRUE(designates(MissingDesignation::Both, Modality::Audio));
  EXPECT_FALSE(designates(MissingDesignation::Video, Modality::Audio));
}
