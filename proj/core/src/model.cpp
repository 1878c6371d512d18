#include "xreid/model.hpp"

#include <cmath>
#include <string>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

Tensor kaiming_normal(int rows, int cols, Rng& rng) {
  Tensor t(rows, cols);
  double std_dev = std::sqrt(2.0 / static_cast<double>(cols));
  for (double& v : t.data) v = std_dev * rng.next_normal();
  return t;
}

}  // namespace

Model Model::init(const ModelShape& shape, NormalizerKind kind, Rng& rng,
                  double csbn_momentum, double csbn_epsilon) {
  require(shape.input_dim >= 1 && shape.hidden_dim >= 1 && shape.embed_dim >= 1,
          "Model: dimensions must be >= 1");
  require(shape.num_classes >= 2, "Model: need >= 2 classes");
  Model m;
  m.shape = shape;
  m.normalizer = kind;
  m.enc_w1 = kaiming_normal(shape.hidden_dim, shape.input_dim, rng);
  m.enc_b1 = Tensor(shape.hidden_dim, 1);
  m.enc_w2 = kaiming_normal(shape.embed_dim, shape.hidden_dim, rng);
  m.enc_b2 = Tensor(shape.embed_dim, 1);
  m.cls_w = kaiming_normal(shape.num_classes, shape.embed_dim, rng);
  CsbnVariant variant = CsbnVariant::scale_only;
  if (kind == NormalizerKind::csbn_full) variant = CsbnVariant::full;
  if (kind == NormalizerKind::csbn_none) variant = CsbnVariant::none;
  m.csbn = CsbnState(shape.embed_dim, variant, csbn_momentum, csbn_epsilon);
  return m;
}

std::vector<double> Model::embed_eval(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == shape.input_dim,
          "embed_eval: input dimension mismatch, expected " +
              std::to_string(shape.input_dim) + ", got " +
              std::to_string(x.size()));
  std::vector<double> h(shape.hidden_dim, 0.0);
  for (int r = 0; r < shape.hidden_dim; ++r) {
    double acc = enc_b1.data[r];
    for (int c = 0; c < shape.input_dim; ++c) acc += enc_w1.at(r, c) * x[c];
    h[r] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<double> e(shape.embed_dim, 0.0);
  for (int r = 0; r < shape.embed_dim; ++r) {
    double acc = enc_b2.data[r];
    for (int c = 0; c < shape.hidden_dim; ++c) acc += enc_w2.at(r, c) * h[c];
    e[r] = acc;
  }
  switch (normalizer) {
    case NormalizerKind::csbn:
    case NormalizerKind::csbn_full:
    case NormalizerKind::csbn_none:
      return csbn_forward_eval(csbn, e);
    case NormalizerKind::l2norm: {
      double norm = 0.0;
      for (double v : e) norm += v * v;
      norm = std::sqrt(norm);
      if (norm == 0.0) throw NumericError("embed_eval: zero-magnitude embedding");
      for (double& v : e) v /= norm;
      return e;
    }
    case NormalizerKind::off:
      return e;
  }
  throw ValidationError("embed_eval: unknown normalizer");
}

std::vector<ad::Var> ModelVars::ordered() const {
  std::vector<ad::Var> v{w1, b1, w2, b2, cls_w};
  if (gamma) v.push_back(*gamma);
  if (shift) v.push_back(*shift);
  return v;
}

ModelVars load_params(ad::Tape& tape, const Model& model) {
  ModelVars p;
  p.w1 = tape.leaf(model.enc_w1);
  p.b1 = tape.leaf(model.enc_b1);
  p.w2 = tape.leaf(model.enc_w2);
  p.b2 = tape.leaf(model.enc_b2);
  p.cls_w = tape.leaf(model.cls_w);
  if (model.csbn.variant != CsbnVariant::none && model.uses_csbn()) {
    p.gamma = tape.leaf(Tensor::column(model.csbn.gamma));
  }
  if (model.csbn.variant == CsbnVariant::full && model.uses_csbn()) {
    p.shift = tape.leaf(Tensor::column(model.csbn.shift));
  }
  return p;
}

ad::Var encode_raw(ad::Tape& tape, const ModelVars& params,
                   std::span<const double> x) {
  ad::Var input = tape.leaf(Tensor::column({x.begin(), x.end()}));
  ad::Var hidden = ad::relu(ad::affine(params.w1, params.b1, input));
  return ad::affine(params.w2, params.b2, hidden);
}

std::vector<ad::Var> normalize_batch_train(ad::Tape& tape, Model& model,
                                           const ModelVars& params,
                                           std::span<const ad::Var> raw) {
  switch (model.normalizer) {
    case NormalizerKind::csbn:
    case NormalizerKind::csbn_full:
    case NormalizerKind::csbn_none: {
      CsbnVars vars{params.gamma, params.shift};
      return csbn_forward_train(tape, raw, model.csbn, vars);
    }
    case NormalizerKind::l2norm: {
      std::vector<ad::Var> out;
      out.reserve(raw.size());
      for (ad::Var v : raw) out.push_back(ad::div_vs(v, ad::norm2(v)));
      return out;
    }
    case NormalizerKind::off:
      return {raw.begin(), raw.end()};
  }
  throw ValidationError("normalize_batch_train: unknown normalizer");
}

NormalizerKind normalizer_from_string(const std::string& s) {
  if (s == "csbn") return NormalizerKind::csbn;
  if (s == "csbn_full") return NormalizerKind::csbn_full;
  if (s == "csbn_none") return NormalizerKind::csbn_none;
  if (s == "l2norm") return NormalizerKind::l2norm;
  if (s == "off") return NormalizerKind::off;
  throw ValidationError("unknown normalizer '" + s +
                        "' (expected csbn|csbn_full|csbn_none|l2norm|off)");
}

const char* to_string(NormalizerKind k) {
  switch (k) {
    case NormalizerKind::csbn: return "csbn";
    case NormalizerKind::csbn_full: return "csbn_full";
    case NormalizerKind::csbn_none: return "csbn_none";
    case NormalizerKind::l2norm: return "l2norm";
    case NormalizerKind::off: return "off";
  }
  return "?";
}

}  // namespace xreid
