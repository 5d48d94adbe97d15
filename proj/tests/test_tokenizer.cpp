#include <gtest/gtest.h>

#include "mmt/error.hpp"
#include "mmt/tokenizer.hpp"

using namespace mmt;

namespace {

TokenizerConfig full_scale() {
  TokenizerConfig c;
  c.audio_bins = 128;
  c.audio_frames_per_second = 100;
  c.audio_seconds = 8.0;
  c.audio_patch = {16, 16};
  c.video_frames = 16;
  c.video_hw = {224, 224};
  c.video_patch = {16, 16, 2};
  return c;
}

// Raw tensor whose every element holds its own flat index.
Tensor coordinates(const Shape& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  return t;
}

}  // namespace

TEST(TokenCount, FullScaleGeometry) {
  const auto c = full_scale();
  EXPECT_EQ(audio_token_count(c), 400u);
  EXPECT_EQ(video_token_count(c), 1568u);
}

TEST(TokenCount, DeskScaleDefaults) {
  const TokenizerConfig c;
  EXPECT_EQ(audio_token_count(c), 16u);
  EXPECT_EQ(video_token_count(c), 32u);
}

TEST(TokenCount, SmallGeometries) {
  TokenizerConfig c;
  c.audio_bins = 8;
  c.audio_frames_per_second = 8;
  c.audio_patch = {8, 8};
  EXPECT_EQ(audio_token_count(c), 1u);
  c.video_frames = 4;
  c.video_hw = {8, 8};
  c.video_patch = {8, 8, 2};
  EXPECT_EQ(video_token_count(c), 2u);
  c.video_hw = {16, 16};
  EXPECT_EQ(video_token_count(c), 8u);
}

TEST(TokenCount, IndivisibleExtentsAreConfigErrors) {
  TokenizerConfig c;
  c.audio_patch = {5, 8};
  EXPECT_THROW(audio_token_count(c), ConfigError);
  c = TokenizerConfig{};
  c.video_patch = {8, 8, 3};
  EXPECT_THROW(video_token_count(c), ConfigError);
  c = TokenizerConfig{};
  c.audio_seconds = 0.333;
  EXPECT_THROW(c.audio_frames(), ConfigError);
}

TEST(Patchify, AudioMatchesCoordinateOracle) {
  TokenizerConfig c;
  c.audio_bins = 32;
  c.audio_frames_per_second = 32;
  c.audio_patch = {8, 4};
  const Tensor p = patchify(coordinates(c.raw_shape(Modality::Audio)), Modality::Audio, c);
  ASSERT_EQ(p.rows(), 32u);
  ASSERT_EQ(p.cols(), 32u);
  for (std::size_t f = 0; f < 32; ++f)
    for (std::size_t t = 0; t < 32; ++t) {
      const std::size_t patch = (f / 8) * (32 / 4) + t / 4;
      const std::size_t offset = (f % 8) * 4 + t % 4;
      EXPECT_EQ(p.at(patch, offset), static_cast<double>(f * 32 + t));
    }
}

TEST(Patchify, VideoMatchesCoordinateOracle) {
  TokenizerConfig c;
  c.video_frames = 4;
  c.video_hw = {16, 16};
  c.video_patch = {8, 4, 2};
  const Tensor p = patchify(coordinates(c.raw_shape(Modality::Video)), Modality::Video, c);
  ASSERT_EQ(p.rows(), 2u * 2u * 4u);
  ASSERT_EQ(p.cols(), 64u);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        const std::size_t patch = ((t / 2) * 2 + y / 8) * 4 + x / 4;
        const std::size_t offset = ((t % 2) * 8 + y % 8) * 4 + x % 4;
        EXPECT_EQ(p.at(patch, offset), static_cast<double>((t * 16 + y) * 16 + x));
      }
}

TEST(Patchify, RoundTripIsExact) {
  const TokenizerConfig c;
  SplitMix64 rng(3);
  for (Modality m : kModalities) {
    Tensor raw(c.raw_shape(m));
    for (double& v : raw.values()) v = rng.normal();
    EXPECT_EQ(unpatchify(patchify(raw, m, c), m, c), raw) << modality_name(m);
  }
}

TEST(Patchify, WrongShapeIsDimensionError) {
  const TokenizerConfig c;
  EXPECT_THROW(patchify(Tensor({16, 63}), Modality::Audio, c), DimensionError);
  EXPECT_THROW(unpatchify(Tensor({31, 128}), Modality::Video, c), DimensionError);
}

TEST(Embed, ZeroInputGivesBiasPlusPosition) {
  const TokenizerConfig c;
  ParameterSet ps;
  SplitMix64 rng(5);
  add_tokenizer_parameters(ps, c, rng);
  for (double& v : ps.value(patch_bias_name(Modality::Video)).values()) v = rng.normal();
  ad::Tape tape;
  const auto seq = embed_video(tape, ps, Tensor(c.raw_shape(Modality::Video)), c);
  const Tensor& out = tape.value(seq.tokens);
  const Tensor& pos = ps.value(position_table_name(Modality::Video));
  const Tensor& bias = ps.value(patch_bias_name(Modality::Video));
  ASSERT_EQ(out.rows(), 32u);
  ASSERT_EQ(out.cols(), c.embed_dim);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < out.cols(); ++j) EXPECT_DOUBLE_EQ(out.at(r, j), bias[j] + pos.at(r, j));
  EXPECT_EQ(seq.positions.size(), 32u);
  EXPECT_EQ(seq.positions.back(), 31u);
  EXPECT_EQ(seq.modality, Modality::Video);
}

TEST(Embed, ProjectionIsLinearInThePatch) {
  const TokenizerConfig c;
  ParameterSet ps;
  SplitMix64 rng(6);
  add_tokenizer_parameters(ps, c, rng);
  Tensor raw(c.raw_shape(Modality::Audio));
  raw.at(0, 0) = 2.0;  // first element of the first patch
  ad::Tape tape;
  const Tensor& out = tape.value(embed_audio(tape, ps, raw, c).tokens);
  const Tensor& w = ps.value(patch_weight_name(Modality::Audio));
  const Tensor& pos = ps.value(position_table_name(Modality::Audio));
  for (std::size_t j = 0; j < c.embed_dim; ++j) {
    EXPECT_DOUBLE_EQ(out.at(0, j), 2.0 * w.at(0, j) + pos.at(0, j));
    EXPECT_DOUBLE_EQ(out.at(1, j), pos.at(1, j));
  }
}

TEST(Embed, ParameterNamesAndShapes) {
  const TokenizerConfig c;
  ParameterSet ps;
  SplitMix64 rng(1);
  add_tokenizer_parameters(ps, c, rng);
  EXPECT_EQ(ps.value("audio.patch.w").shape(), (Shape{64, 32}));
  EXPECT_EQ(ps.value("video.patch.w").shape(), (Shape{128, 32}));
  EXPECT_EQ(ps.value("audio.pos").shape(), (Shape{16, 32}));
  EXPECT_EQ(ps.value("video.pos").shape(), (Shape{32, 32}));
}
