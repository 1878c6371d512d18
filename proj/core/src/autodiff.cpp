#include "xreid/autodiff.hpp"

#include <cmath>
#include <string>

#include "xreid/errors.hpp"

namespace xreid::ad {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ValidationError(msg);
}

void require_finite(const Tensor& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite result");
    }
  }
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(*this); }
const Tensor& Var::grad() const { return tape_->grad(*this); }

Var Tape::leaf(Tensor value) { return make_node(std::move(value)); }

Var Tape::make_node(Tensor value) {
  Tensor g(value.rows, value.cols);
  values_.push_back(std::move(value));
  grads_.push_back(std::move(g));
  return Var(this, static_cast<int>(values_.size()) - 1);
}

void Tape::record(std::function<void()> backward_step) {
  steps_.push_back(std::move(backward_step));
}

void Tape::backward(Var loss) {
  require(loss.tape_ == this, "backward: node belongs to a different tape");
  require(value(loss).is_scalar(), "backward: loss must be scalar");
  for (Tensor& g : grads_) {
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
  grads_[loss.id_].data[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    (*it)();
  }
}

namespace {

Tape* same_tape(Var a, Var b, const char* op) {
  require(a.valid() && b.valid() && a.tape() == b.tape(),
          "op on unrelated tapes");
  (void)op;
  return a.tape();
}

}  // namespace

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b, "add");
  require(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  Var o = t->make_node(std::move(out));
  t->record([t, a, b, o] {
    const Tensor& go = t->grad(o);
    Tensor& ga = t->grad(a);
    Tensor& gb = t->grad(b);
    for (int i = 0; i < go.size(); ++i) {
      ga.data[i] += go.data[i];
      gb.data[i] += go.data[i];
    }
  });
  return o;
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b, "sub");
  require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
  Var o = t->make_node(std::move(out));
  t->record([t, a, b, o] {
    const Tensor& go = t->grad(o);
    Tensor& ga = t->grad(a);
    Tensor& gb = t->grad(b);
    for (int i = 0; i < go.size(); ++i) {
      ga.data[i] += go.data[i];
      gb.data[i] -= go.data[i];
    }
  });
  return o;
}

Var scale(Var a, double c) {
  Tape* t = a.tape();
  Tensor out = a.value();
  for (double& v : out.data) v *= c;
  Var o = t->make_node(std::move(out));
  t->record([t, a, o, c] {
    const Tensor& go = t->grad(o);
    Tensor& ga = t->grad(a);
    for (int i = 0; i < go.size(); ++i) ga.data[i] += c * go.data[i];
  });
  return o;
}

Var add_const(Var a, double c) {
  Tape* t = a.tape();
  Tensor out = a.value();
  for (double& v : out.data) v += c;
  Var o = t->make_node(std::move(out));
  t->record([t, a, o] {
    const Tensor& go = t->grad(o);
    Tensor& ga = t->grad(a);
    for (int i = 0; i < go.size(); ++i) ga.data[i] += go.data[i];
  });
  return o;
}

Var mul(Var a, Var b) {
  Tape* t = same_tape(a, b, "mul");
  require(a.value().is_scalar() && b.value().is_scalar(),
          "mul: scalar operands required");
  double av = a.value().data[0], bv = b.value().data[0];
  Var o = t->make_node(Tensor::scalar(av * bv));
  t->record([t, a, b, o, av, bv] {
    double go = t->grad(o).data[0];
    t->grad(a).data[0] += go * bv;
    t->grad(b).data[0] += go * av;
  });
  return o;
}

Var div(Var a, Var b) {
  Tape* t = same_tape(a, b, "div");
  require(a.value().is_scalar() && b.value().is_scalar(),
          "div: scalar operands required");
  double av = a.value().data[0], bv = b.value().data[0];
  Tensor out = Tensor::scalar(av / bv);
  require_finite(out, "div");
  Var o = t->make_node(std::move(out));
  t->record([t, a, b, o, av, bv] {
    double go = t->grad(o).data[0];
    t->grad(a).data[0] += go / bv;
    t->grad(b).data[0] -= go * av / (bv * bv);
  });
  return o;
}

Var matvec(Var w, Var x) {
  Tape* t = same_tape(w, x, "matvec");
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  require(xv.cols == 1 && wv.cols == xv.rows, "matvec: shape mismatch");
  Tensor out(wv.rows, 1);
  for (int r = 0; r < wv.rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < wv.cols; ++c) acc += wv.at(r, c) * xv.data[c];
    out.data[r] = acc;
  }
  Var o = t->make_node(std::move(out));
  t->record([t, w, x, o] {
    const Tensor& go = t->grad(o);
    const Tensor& wv = t->value(w);
    const Tensor& xv = t->value(x);
    Tensor& gw = t->grad(w);
    Tensor& gx = t->grad(x);
    for (int r = 0; r < wv.rows; ++r) {
      double g = go.data[r];
      for (int c = 0; c < wv.cols; ++c) {
        gw.at(r, c) += g * xv.data[c];
        gx.data[c] += g * wv.at(r, c);
      }
    }
  });
  return o;
}

Var affine(Var w, Var b, Var x) { return add(matvec(w, x), b); }

Var relu(Var x) {
  Tape* t = x.tape();
  Tensor out = x.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  Var o = t->make_node(std::move(out));
  t->record([t, x, o] {
    const Tensor& go = t->grad(o);
    const Tensor& xv = t->value(x);
    Tensor& gx = t->grad(x);
    for (int i = 0; i < go.size(); ++i) {
      if (xv.data[i] > 0.0) gx.data[i] += go.data[i];
    }
  });
  return o;
}

Var dot(Var a, Var b) {
  Tape* t = same_tape(a, b, "dot");
  require(a.value().cols == 1 && a.value().same_shape(b.value()),
          "dot: column vectors of equal length required");
  double acc = 0.0;
  for (int i = 0; i < a.value().size(); ++i) {
    acc += a.value().data[i] * b.value().data[i];
  }
  Var o = t->make_node(Tensor::scalar(acc));
  t->record([t, a, b, o] {
    double go = t->grad(o).data[0];
    const Tensor& av = t->value(a);
    const Tensor& bv = t->value(b);
    Tensor& ga = t->grad(a);
    Tensor& gb = t->grad(b);
    for (int i = 0; i < av.size(); ++i) {
      ga.data[i] += go * bv.data[i];
      gb.data[i] += go * av.data[i];
    }
  });
  return o;
}

Var norm2(Var x) {
  Tape* t = x.tape();
  require(x.value().cols == 1, "norm2: column vector required");
  double acc = 0.0;
  for (double v : x.value().data) acc += v * v;
  double n = std::sqrt(acc);
  Var o = t->make_node(Tensor::scalar(n));
  t->record([t, x, o, n] {
    if (n == 0.0) return;  // subgradient 0 at the origin
    double go = t->grad(o).data[0];
    const Tensor& xv = t->value(x);
    Tensor& gx = t->grad(x);
    for (int i = 0; i < xv.size(); ++i) gx.data[i] += go * xv.data[i] / n;
  });
  return o;
}

Var exp(Var x) {
  Tape* t = x.tape();
  Tensor out = x.value();
  for (double& v : out.data) v = std::exp(v);
  require_finite(out, "exp");
  Var o = t->make_node(std::move(out));
  t->record([t, x, o] {
    const Tensor& go = t->grad(o);
    const Tensor& ov = t->value(o);
    Tensor& gx = t->grad(x);
    for (int i = 0; i < go.size(); ++i) gx.data[i] += go.data[i] * ov.data[i];
  });
  return o;
}

Var log(Var x) {
  Tape* t = x.tape();
  Tensor out = x.value();
  for (double& v : out.data) {
    if (v <= 0.0) throw NumericError("log: non-positive input");
    v = std::log(v);
  }
  Var o = t->make_node(std::move(out));
  t->record([t, x, o] {
    const Tensor& go = t->grad(o);
    const Tensor& xv = t->value(x);
    Tensor& gx = t->grad(x);
    for (int i = 0; i < go.size(); ++i) gx.data[i] += go.data[i] / xv.data[i];
  });
  return o;
}

Var softplus(Var x) {
  Tape* t = x.tape();
  Tensor out = x.value();
  for (double& v : out.data) {
    // log(1 + e^v): for large v the direct form overflows, but
    // log(1 + e^v) = v + log(1 + e^-v) -> v.
    v = v > 30.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  Var o = t->make_node(std::move(out));
  t->record([t, x, o] {
    const Tensor& go = t->grad(o);
    const Tensor& xv = t->value(x);
    Tensor& gx = t->grad(x);
    for (int i = 0; i < go.size(); ++i) {
      double sig = 1.0 / (1.0 + std::exp(-xv.data[i]));
      gx.data[i] += go.data[i] * sig;
    }
  });
  return o;
}

Var div_vs(Var x, Var s) {
  Tape* t = same_tape(x, s, "div_vs");
  require(x.value().cols == 1 && s.value().is_scalar(),
          "div_vs: vector / scalar required");
  double sv = s.value().data[0];
  Tensor out = x.value();
  for (double& v : out.data) v /= sv;
  require_finite(out, "div_vs");
  Var o = t->make_node(std::move(out));
  t->record([t, x, s, o, sv] {
    const Tensor& go = t->grad(o);
    const Tensor& xv = t->value(x);
    Tensor& gx = t->grad(x);
    double& gs = t->grad(s).data[0];
    for (int i = 0; i < go.size(); ++i) {
      gx.data[i] += go.data[i] / sv;
      gs -= go.data[i] * xv.data[i] / (sv * sv);
    }
  });
  return o;
}

Var sum(std::span<const Var> xs) {
  require(!xs.empty(), "sum: empty operand list");
  Tape* t = xs.front().tape();
  double acc = 0.0;
  for (Var v : xs) {
    require(v.tape() == t && v.value().is_scalar(), "sum: scalar nodes of one tape required");
    acc += v.value().data[0];
  }
  Var o = t->make_node(Tensor::scalar(acc));
  std::vector<Var> parents(xs.begin(), xs.end());
  t->record([t, parents = std::move(parents), o] {
    double go = t->grad(o).data[0];
    for (Var p : parents) t->grad(p).data[0] += go;
  });
  return o;
}

Var softmax_cross_entropy(Var logits, int target, double smoothing) {
  Tape* t = logits.tape();
  const Tensor& lv = logits.value();
  require(lv.cols == 1 && lv.rows >= 2, "softmax_cross_entropy: need >= 2 classes");
  require(target >= 0 && target < lv.rows, "softmax_cross_entropy: label out of range");
  require(smoothing >= 0.0 && smoothing < 1.0, "softmax_cross_entropy: smoothing in [0,1)");
  require_finite(lv, "softmax_cross_entropy");

  int c = lv.rows;
  double max_logit = lv.data[0];
  for (double v : lv.data) max_logit = std::max(max_logit, v);
  double denom = 0.0;
  for (double v : lv.data) denom += std::exp(v - max_logit);
  double log_denom = std::log(denom) + max_logit;

  // q_i = (1 - smoothing) [i == target] + smoothing / C;
  // loss = sum_i q_i (log_denom - logit_i).
  std::vector<double> prob(c);
  double loss = 0.0;
  for (int i = 0; i < c; ++i) {
    double q = (i == target ? 1.0 - smoothing : 0.0) + smoothing / c;
    loss += q * (log_denom - lv.data[i]);
    prob[i] = std::exp(lv.data[i] - log_denom);
  }
  Var o = t->make_node(Tensor::scalar(loss));
  t->record([t, logits, o, target, smoothing, prob = std::move(prob)] {
    double go = t->grad(o).data[0];
    Tensor& gl = t->grad(logits);
    int c = gl.rows;
    for (int i = 0; i < c; ++i) {
      double q = (i == target ? 1.0 - smoothing : 0.0) + smoothing / c;
      gl.data[i] += go * (prob[i] - q);
    }
  });
  return o;
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> theta,
                  std::span<const double> analytic,
                  double step_scale) {
  require(theta.size() == analytic.size(), "grad_check: gradient size mismatch");
  std::vector<double> probe(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    double h = step_scale * std::max(1.0, std::abs(probe[i]));
    double saved = probe[i];
    probe[i] = saved + h;
    double fp = f(probe);
    probe[i] = saved - h;
    double fm = f(probe);
    probe[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite loss at probe point, parameter " +
                         std::to_string(i));
    }
    double numeric = (fp - fm) / (2.0 * h);
    double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace xreid::ad
