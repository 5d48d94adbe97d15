#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mmt/error.hpp"
#include "mmt/optim.hpp"

using namespace mmt;

namespace {

ParameterSet one(double w, bool decay = true) {
  ParameterSet ps;
  ps.add("w", Tensor::matrix(1, 1, {w}), decay);
  return ps;
}

}  // namespace

TEST(AdamW, FirstStepMovesByLearningRate) {
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  cfg.warmup_steps = 1;
  cfg.total_steps = 10;
  ParameterSet ps = one(1.0);
  AdamW opt(ps, cfg);
  Gradients g(ps);
  g[0][0] = 1.0;
  opt.step(ps, g);
  EXPECT_NEAR(ps[0].value[0], 0.9, 1e-8);
  EXPECT_NEAR(opt.first_moments()[0][0], 0.1, 1e-15);
  EXPECT_NEAR(opt.second_moments()[0][0], 0.001, 1e-15);
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoOp) {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.total_steps = 5;
  ParameterSet ps = one(0.37);
  AdamW opt(ps, cfg);
  Gradients g(ps);
  for (int i = 0; i < 4; ++i) opt.step(ps, g);
  EXPECT_EQ(ps[0].value[0], 0.37);
}

TEST(AdamW, DecayIsDecoupledAndSkipsExemptParameters) {
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  cfg.warmup_steps = 1;
  cfg.total_steps = 10;
  ParameterSet ps;
  ps.add("w", Tensor::matrix(1, 1, {2.0}), true);
  ps.add("b", Tensor::matrix(1, 1, {2.0}), false);
  AdamW opt(ps, cfg);
  Gradients g(ps);
  opt.step(ps, g);
  EXPECT_DOUBLE_EQ(ps[0].value[0], 2.0 * (1.0 - 0.1 * 0.5));
  EXPECT_EQ(ps[1].value[0], 2.0);
}

TEST(AdamW, MatchesReferenceLoop) {
  AdamWConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.weight_decay = 0.05;
  cfg.warmup_steps = 4;
  cfg.total_steps = 20;
  ParameterSet ps;
  ps.add("w", Tensor::matrix(1, 3, {0.5, -1.0, 2.0}));
  AdamW opt(ps, cfg);
  Gradients g(ps);
  double w[3] = {0.5, -1.0, 2.0}, m[3] = {}, v[3] = {};
  SplitMix64 rng(9);
  for (std::size_t t = 1; t < cfg.total_steps; ++t) {
    for (std::size_t j = 0; j < 3; ++j) g[0][j] = rng.normal();
    opt.step(ps, g);
    const double lr = t <= cfg.warmup_steps
                          ? cfg.learning_rate * t / cfg.warmup_steps
                          : cfg.learning_rate * 0.5 *
                                (1 + std::cos(std::numbers::pi * (t - 4.0) / 16.0));
    for (std::size_t j = 0; j < 3; ++j) {
      m[j] = 0.9 * m[j] + 0.1 * g[0][j];
      v[j] = 0.999 * v[j] + 0.001 * g[0][j] * g[0][j];
      const double mh = m[j] / (1 - std::pow(0.9, t)), vh = v[j] / (1 - std::pow(0.999, t));
      w[j] -= lr * (mh / (std::sqrt(vh) + 1e-8) + 0.05 * w[j]);
      EXPECT_NEAR(ps[0].value[j], w[j], 1e-13) << "step " << t;
    }
  }
}

TEST(Schedule, WarmupThenCosineToZero) {
  AdamWConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.warmup_steps = 10;
  cfg.total_steps = 110;
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(cfg, 5), 0.5);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(cfg, 10), 1.0);
  EXPECT_NEAR(scheduled_learning_rate(cfg, 60), 0.5, 1e-15);
  EXPECT_EQ(scheduled_learning_rate(cfg, 110), 0.0);
  double prev = 2.0;
  for (std::size_t s = 10; s <= 110; ++s) {
    const double lr = scheduled_learning_rate(cfg, s);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, 0.0);
    prev = lr;
  }
}

TEST(Schedule, RejectsBadConfigs) {
  AdamWConfig cfg;
  cfg.total_steps = 0;
  EXPECT_THROW(scheduled_learning_rate(cfg, 1), ConfigError);
  cfg.total_steps = 3;
  cfg.warmup_steps = 4;
  ParameterSet ps = one(1.0);
  EXPECT_THROW(AdamW(ps, cfg), ConfigError);
}

TEST(Gradients, NormAndScale) {
  ParameterSet ps;
  ps.add("a", Tensor::matrix(1, 2, {0, 0}));
  ps.add("b", Tensor::matrix(1, 1, {0}));
  Gradients g(ps);
  g[0][0] = 3.0;
  g[1][0] = 4.0;
  EXPECT_DOUBLE_EQ(g.global_norm(), 5.0);
  g.scale(0.2);
  EXPECT_DOUBLE_EQ(g.global_norm(), 1.0);
  g.zero();
  EXPECT_EQ(g.global_norm(), 0.0);
}
