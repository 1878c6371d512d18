#pragma once

#include <span>
#include <vector>

#include "xreid/tensor.hpp"

namespace xreid {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  long step_count = 0;  // t in the bias correction, incremented per step
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState init(std::span<Tensor* const> params);
};

// One bias-corrected update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
// Throws NumericError on a non-finite gradient.
void adam_step(std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

// Piecewise-constant schedule with linear warmup: ramps from
// warmup_start_factor * base_lr to base_lr over warmup_steps, then
// multiplies by decay_factor at each milestone.
struct LrSchedule {
  double base_lr = 3e-4;
  double decay_factor = 0.1;
  std::vector<long> milestones{10000, 20000};
  long warmup_steps = 1000;
  double warmup_start_factor = 0.1;

  double at(long step) const;
};

}  // namespace xreid
