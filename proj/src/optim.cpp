#include "mmt/optim.hpp"

#include <cmath>
#include <numbers>

#include "mmt/error.hpp"

namespace mmt {

double scheduled_learning_rate(const AdamWConfig& cfg, std::size_t step) {
  if (cfg.total_steps == 0) throw ConfigError("total_steps must be positive");
  if (step >= cfg.total_steps) return 0.0;
  if (step <= cfg.warmup_steps && cfg.warmup_steps > 0) {
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double progress = static_cast<double>(step - cfg.warmup_steps) / span;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ParameterSet& params, AdamWConfig cfg) : cfg_(cfg) {
  if (cfg_.warmup_steps > cfg_.total_steps) throw ConfigError("warmup_steps exceeds total_steps");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void AdamW::step(ParameterSet& params, const Gradients& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("optimizer state does not match the parameter set");
  }
  ++step_;
  const double lr = scheduled_learning_rate(cfg_, step_);
  last_lr_ = lr;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].value;
    const Tensor& g = grads[i];
    if (g.size() != w.size()) throw DimensionError("gradient shape mismatch for '" + params[i].name + "'");
    const double decay = params[i].decay ? cfg_.weight_decay : 0.0;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + decay * w[j]);
    }
  }
}

}  // namespace mmt
