#pragma once

#include <functional>
#include <span>
#include <vector>

#include "xreid/tensor.hpp"

namespace xreid::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;
  double scalar() const { return value().scalar_value(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records values and backward steps of one computation in creation order.
// Creation order is a topological order, so replaying the recorded steps in
// reverse visits every op exactly once with its output gradients complete.
// A tape is confined to a single thread; independent tapes may run
// concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Tracked input/parameter node.
  Var leaf(Tensor value);

  // Op-construction API (also used by the batch-norm op).
  Var make_node(Tensor value);
  void record(std::function<void()> backward_step);

  const Tensor& value(Var v) const { return values_[v.id_]; }
  Tensor& grad(Var v) { return grads_[v.id_]; }
  const Tensor& grad(Var v) const { return grads_[v.id_]; }

  // Zeroes all gradients, seeds d(loss)/d(loss) = 1 and replays the tape.
  // `loss` must be a scalar node of this tape.
  void backward(Var loss);

  int node_count() const { return static_cast<int>(values_.size()); }

 private:
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<std::function<void()>> steps_;
};

// ---- forward ops -----------------------------------------------------

Var add(Var a, Var b);           // elementwise, same shape
Var sub(Var a, Var b);
Var scale(Var a, double c);      // elementwise a * c
Var add_const(Var a, double c);  // elementwise a + c
Var mul(Var a, Var b);           // scalar * scalar
Var div(Var a, Var b);           // scalar / scalar
Var matvec(Var w, Var x);        // (m x n)(n x 1) -> (m x 1)
Var affine(Var w, Var b, Var x); // w x + b
Var relu(Var x);                 // elementwise max(x, 0); subgradient 0 at 0
Var dot(Var a, Var b);           // column vectors -> scalar
Var norm2(Var x);                // |x|; subgradient 0 at the origin
Var exp(Var x);                  // elementwise
Var log(Var x);                  // elementwise; throws on non-positive input
Var softplus(Var x);             // log(1 + e^x), large-argument safe
Var div_vs(Var x, Var s);        // vector / scalar broadcast
Var sum(std::span<const Var> xs);  // scalars -> scalar

// max(x, 0) written as in the losses' clamping function.
inline Var clamp_min0(Var x) { return relu(x); }

// Cross entropy of softmax(logits) against a label-smoothed one-hot target:
// -sum_i q_i log p_i with q_i = (1 - smoothing) * [i == target] + smoothing/C.
// Fused for numerical stability; gradient is p - q.
Var softmax_cross_entropy(Var logits, int target, double smoothing);

// ---- gradient verification -------------------------------------------

// Max over coordinates of |analytic_i - numeric_i| / max(1, |numeric_i|),
// where numeric_i is the central difference of f with per-coordinate step
// h_i = step_scale * max(1, |theta_i|). Throws NumericError if f evaluates
// non-finite at any probe point.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> theta,
                  std::span<const double> analytic,
                  double step_scale = 1e-6);

}  // namespace xreid::ad
