#include "xreid/csbn.hpp"

#include <cmath>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace

CsbnState::CsbnState(int channels, CsbnVariant v, double momentum, double epsilon)
    : variant(v),
      gamma(channels, 1.0),
      shift(channels, 0.0),
      running_mean(channels, 0.0),
      running_var(channels, 0.0),
      momentum(momentum),
      epsilon(epsilon) {
  require(channels >= 1, "CsbnState: need >= 1 channel");
  require(momentum > 0.0 && momentum < 1.0, "CsbnState: momentum in (0,1)");
  require(epsilon > 0.0, "CsbnState: epsilon must be positive");
}

std::vector<ad::Var> csbn_forward_train(ad::Tape& tape,
                                        std::span<const ad::Var> batch,
                                        CsbnState& state,
                                        const CsbnVars& params) {
  require(state.mode == CsbnMode::train, "csbn: train forward in eval mode");
  int m = static_cast<int>(batch.size());
  require(m >= 2, "csbn: batch variance undefined for batch size < 2");
  int k = state.channels();
  for (const ad::Var& v : batch) {
    require(v.value().cols == 1 && v.value().rows == k,
            "csbn: channel count mismatch");
  }
  bool with_gamma = state.variant != CsbnVariant::none;
  bool with_shift = state.variant == CsbnVariant::full;
  require(with_gamma == params.gamma.has_value(), "csbn: gamma node mismatch");
  require(with_shift == params.shift.has_value(), "csbn: shift node mismatch");

  // Batch statistics per channel (population variance).
  std::vector<double> mean(k, 0.0), var(k, 0.0);
  for (const ad::Var& v : batch) {
    for (int c = 0; c < k; ++c) mean[c] += v.value().data[c];
  }
  for (int c = 0; c < k; ++c) mean[c] /= m;
  for (const ad::Var& v : batch) {
    for (int c = 0; c < k; ++c) {
      double d = v.value().data[c] - mean[c];
      var[c] += d * d;
    }
  }
  for (int c = 0; c < k; ++c) var[c] /= m;

  for (int c = 0; c < k; ++c) {
    state.running_mean[c] =
        (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
    state.running_var[c] =
        (1.0 - state.momentum) * state.running_var[c] + state.momentum * var[c];
  }
  state.batches_seen += 1;

  std::vector<double> inv_std(k);
  for (int c = 0; c < k; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);

  const double* gamma_v =
      with_gamma ? params.gamma->value().data.data() : nullptr;
  const double* shift_v =
      with_shift ? params.shift->value().data.data() : nullptr;

  // x_hat rows are per-sample; kept for the backward step.
  std::vector<std::vector<double>> x_hat(m, std::vector<double>(k));
  std::vector<ad::Var> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    Tensor o(k, 1);
    for (int c = 0; c < k; ++c) {
      double xh = (batch[i].value().data[c] - mean[c]) * inv_std[c];
      x_hat[i][c] = xh;
      double y = with_gamma ? gamma_v[c] * xh : xh;
      if (with_shift) y += shift_v[c];
      o.data[c] = y;
    }
    out.push_back(tape.make_node(std::move(o)));
  }

  std::vector<ad::Var> inputs(batch.begin(), batch.end());
  std::vector<ad::Var> outputs = out;
  CsbnVars captured = params;
  tape.record([&tape, inputs = std::move(inputs), outputs = std::move(outputs),
               x_hat = std::move(x_hat), inv_std = std::move(inv_std), m, k,
               with_gamma, with_shift, captured] {
    const Tensor* gamma_val =
        with_gamma ? &tape.value(*captured.gamma) : nullptr;
    // Per channel: dL/dx_i = (gamma/s) (g_i - mean_j g_j - xhat_i mean_j g_j xhat_j)
    for (int c = 0; c < k; ++c) {
      double g_mean = 0.0, gx_mean = 0.0;
      for (int i = 0; i < m; ++i) {
        double g = tape.grad(outputs[i]).data[c];
        g_mean += g;
        gx_mean += g * x_hat[i][c];
      }
      g_mean /= m;
      gx_mean /= m;
      double gscale = with_gamma ? gamma_val->data[c] : 1.0;
      for (int i = 0; i < m; ++i) {
        double g = tape.grad(outputs[i]).data[c];
        tape.grad(inputs[i]).data[c] +=
            gscale * inv_std[c] * (g - g_mean - x_hat[i][c] * gx_mean);
      }
      if (with_gamma) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
          acc += tape.grad(outputs[i]).data[c] * x_hat[i][c];
        }
        tape.grad(*captured.gamma).data[c] += acc;
      }
      if (with_shift) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += tape.grad(outputs[i]).data[c];
        tape.grad(*captured.shift).data[c] += acc;
      }
    }
  });
  return out;
}

std::vector<std::vector<double>> csbn_forward_train(
    std::span<const std::vector<double>> batch, CsbnState& state) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(batch.size());
  for (const auto& v : batch) vars.push_back(tape.leaf(Tensor::column(v)));
  CsbnVars params;
  if (state.variant != CsbnVariant::none) {
    params.gamma = tape.leaf(Tensor::column(state.gamma));
  }
  if (state.variant == CsbnVariant::full) {
    params.shift = tape.leaf(Tensor::column(state.shift));
  }
  std::vector<ad::Var> out = csbn_forward_train(tape, vars, state, params);
  std::vector<std::vector<double>> result;
  result.reserve(out.size());
  for (const ad::Var& v : out) result.push_back(v.value().data);
  return result;
}

std::vector<double> csbn_forward_eval(const CsbnState& state,
                                      std::span<const double> v) {
  require(state.mode == CsbnMode::eval, "csbn: eval forward in train mode");
  if (state.batches_seen == 0) {
    throw ValidationError("csbn: eval forward on a never-trained state");
  }
  int k = state.channels();
  require(static_cast<int>(v.size()) == k, "csbn: channel count mismatch");
  std::vector<double> out(k);
  bool with_gamma = state.variant != CsbnVariant::none;
  bool with_shift = state.variant == CsbnVariant::full;
  for (int c = 0; c < k; ++c) {
    double y = (v[c] - state.running_mean[c]) /
               std::sqrt(state.running_var[c] + state.epsilon);
    if (with_gamma) y *= state.gamma[c];
    if (with_shift) y += state.shift[c];
    out[c] = y;
  }
  return out;
}

}  // namespace xreid
