#pragma once

#include <cstddef>
#include <vector>

#include "mmt/params.hpp"

namespace mmt {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.05;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
};

// Linear warmup to the base rate, then half-cycle cosine decay reaching 0 at
// step == total_steps. `step` is 1-based (the step about to be applied).
double scheduled_learning_rate(const AdamWConfig& cfg, std::size_t step);

class AdamW {
 public:
  AdamW(const ParameterSet& params, AdamWConfig cfg);

  // Applies one update and advances the step counter.
  void step(ParameterSet& params, const Gradients& grads);

  std::size_t steps_taken() const noexcept { return step_; }
  double last_learning_rate() const noexcept { return last_lr_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  AdamWConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t step_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace mmt
