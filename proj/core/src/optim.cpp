#include "xreid/optim.hpp"

#include <cmath>
#include <string>

#include "xreid/errors.hpp"

namespace xreid {

AdamState AdamState::init(std::span<Tensor* const> params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor* p : params) {
    s.m.emplace_back(p->rows, p->cols);
    s.v.emplace_back(p->rows, p->cols);
  }
  return s;
}

void adam_step(std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ValidationError("adam_step: parameter/gradient/moment count mismatch");
  }
  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i])) {
      throw ValidationError("adam_step: shape mismatch at parameter " +
                            std::to_string(i));
    }
    for (int j = 0; j < p.size(); ++j) {
      double gj = g.data[j];
      if (!std::isfinite(gj)) {
        throw NumericError("adam_step: non-finite gradient at parameter " +
                           std::to_string(i) + ", element " + std::to_string(j));
      }
      double& mj = state.m[i].data[j];
      double& vj = state.v[i].data[j];
      mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * gj;
      vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * gj * gj;
      double m_hat = mj / bc1;
      double v_hat = vj / bc2;
      p.data[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

double LrSchedule::at(long step) const {
  if (step < 0) throw ValidationError("lr_schedule: negative step");
  double lr = base_lr;
  for (long milestone : milestones) {
    if (step >= milestone) lr *= decay_factor;
  }
  if (warmup_steps > 0 && step < warmup_steps) {
    double frac = static_cast<double>(step) / static_cast<double>(warmup_steps);
    lr *= warmup_start_factor + (1.0 - warmup_start_factor) * frac;
  }
  return lr;
}

}  // namespace xreid
