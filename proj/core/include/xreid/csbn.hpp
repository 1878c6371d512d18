#pragma once

#include <optional>
#include <span>
#include <vector>

#include "xreid/autodiff.hpp"

namespace xreid {

enum class CsbnMode { train, eval };

// scale_only is the default: a per-channel trainable scale with the shift
// removed, so the normalized space cannot drift off the origin. full keeps
// the shift (ablation), none has no trainable parameters (ablation).
enum class CsbnVariant { scale_only, full, none };

struct CsbnState {
  CsbnVariant variant = CsbnVariant::scale_only;
  std::vector<double> gamma;         // per-channel scale, init 1
  std::vector<double> shift;         // used by the full variant only, init 0
  std::vector<double> running_mean;  // moving averages of batch statistics
  std::vector<double> running_var;   // population (1/N) variance
  double momentum = 0.1;
  double epsilon = 1e-5;
  CsbnMode mode = CsbnMode::train;
  long batches_seen = 0;

  CsbnState() = default;
  CsbnState(int channels, CsbnVariant v = CsbnVariant::scale_only,
            double momentum = 0.1, double epsilon = 1e-5);

  int channels() const { return static_cast<int>(running_mean.size()); }
};

// Trainable-parameter nodes for a train-mode forward. gamma must be present
// unless the variant is none; shift only for the full variant.
struct CsbnVars {
  std::optional<ad::Var> gamma;
  std::optional<ad::Var> shift;
};

// Train-mode forward over a whole batch: per channel k,
//   out = gamma_k * (v_k - mean_k) / sqrt(var_k + eps)
// with batch statistics (population variance), running statistics updated as
// running <- (1 - momentum) * running + momentum * batch_stat. Gradients
// propagate through the batch mean and variance. Requires batch size >= 2.
std::vector<ad::Var> csbn_forward_train(ad::Tape& tape,
                                        std::span<const ad::Var> batch,
                                        CsbnState& state,
                                        const CsbnVars& params);

// Same forward on plain vectors (builds a throwaway tape internally).
std::vector<std::vector<double>> csbn_forward_train(
    std::span<const std::vector<double>> batch, CsbnState& state);

// Eval-mode forward of a single vector against frozen running statistics.
// Errors if the state has never seen a training batch.
std::vector<double> csbn_forward_eval(const CsbnState& state,
                                      std::span<const double> v);

}  // namespace xreid
