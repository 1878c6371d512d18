#include "xreid/losses.hpp"

#include <cmath>
#include <string>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

using ad::Tape;
using ad::Var;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

// cos(a, b) = a.b / (|a||b|) on the tape. Zero-magnitude inputs are rejected
// up front so a collapsed encoder fails loudly instead of propagating NaN.
Var cos_var(Tape& tape, Var a, Var b) {
  Var na = ad::norm2(a);
  Var nb = ad::norm2(b);
  if (na.scalar() == 0.0 || nb.scalar() == 0.0) {
    throw NumericError("cosine: zero-magnitude embedding");
  }
  return ad::div(ad::dot(a, b), ad::mul(na, nb));
}

Var euclid_var(Tape& tape, Var a, Var b) {
  (void)tape;
  return ad::norm2(ad::sub(a, b));
}

Var mean_of(Tape& tape, std::span<const Var> terms) {
  return ad::scale(ad::sum(terms), 1.0 / static_cast<double>(terms.size()));
}

void check_batch(std::span<const TupleVars> batch) {
  require(!batch.empty(), "loss: empty batch");
}

}  // namespace

void TupleBatch::validate() const {
  require(!tuples.empty(), "TupleBatch: empty batch");
  std::size_t k = tuples.front().anchor_rgb.size();
  require(k >= 1, "TupleBatch: zero-channel embedding");
  for (const EmbeddingTuple& t : tuples) {
    require(t.anchor_rgb.size() == k && t.anchor_ir.size() == k &&
                t.pos_rgb.size() == k && t.pos_ir.size() == k &&
                t.neg_rgb.size() == k && t.neg_ir.size() == k,
            "TupleBatch: inconsistent channel count");
    require(t.neg_id != t.anchor_id, "TupleBatch: negative shares anchor identity");
  }
}

Var bidirectional_triplet(Tape& tape, std::span<const TupleVars> batch,
                          double margin) {
  check_batch(batch);
  require(margin >= 0.0, "bidirectional_triplet: margin must be >= 0");
  std::vector<Var> rgb_terms, ir_terms;
  for (const TupleVars& t : batch) {
    // [D(a_rgb, p_ir) - D(a_rgb, n_ir) + xi]_+
    Var d_ap = euclid_var(tape, t.anchor_rgb, t.pos_ir);
    Var d_an = euclid_var(tape, t.anchor_rgb, t.neg_ir);
    rgb_terms.push_back(ad::clamp_min0(ad::add_const(ad::sub(d_ap, d_an), margin)));
    Var e_ap = euclid_var(tape, t.anchor_ir, t.pos_rgb);
    Var e_an = euclid_var(tape, t.anchor_ir, t.neg_rgb);
    ir_terms.push_back(ad::clamp_min0(ad::add_const(ad::sub(e_ap, e_an), margin)));
  }
  return ad::add(mean_of(tape, rgb_terms), mean_of(tape, ir_terms));
}

Var cosine_triplet(Tape& tape, std::span<const TupleVars> batch, double margin) {
  check_batch(batch);
  require(margin >= 0.0, "cosine_triplet: margin must be >= 0");
  std::vector<Var> rgb_terms, ir_terms;
  for (const TupleVars& t : batch) {
    // [cos(a, n) - cos(a, p) + xi]_+ per direction
    Var c_ap = cos_var(tape, t.anchor_rgb, t.pos_ir);
    Var c_an = cos_var(tape, t.anchor_rgb, t.neg_ir);
    rgb_terms.push_back(ad::clamp_min0(ad::add_const(ad::sub(c_an, c_ap), margin)));
    Var d_ap = cos_var(tape, t.anchor_ir, t.pos_rgb);
    Var d_an = cos_var(tape, t.anchor_ir, t.neg_rgb);
    ir_terms.push_back(ad::clamp_min0(ad::add_const(ad::sub(d_an, d_ap), margin)));
  }
  return ad::add(mean_of(tape, rgb_terms), mean_of(tape, ir_terms));
}

Var at_loss(Tape& tape, std::span<const TupleVars> batch) {
  check_batch(batch);
  std::vector<Var> rgb_terms, ir_terms;
  for (const TupleVars& t : batch) {
    // [cos(a, n)]_+ - cos(a, p) + 1; the clamp drives negatives toward
    // orthogonality rather than anti-correlation.
    Var c_ap = cos_var(tape, t.anchor_rgb, t.pos_ir);
    Var c_an = ad::clamp_min0(cos_var(tape, t.anchor_rgb, t.neg_ir));
    rgb_terms.push_back(ad::add_const(ad::sub(c_an, c_ap), 1.0));
    Var d_ap = cos_var(tape, t.anchor_ir, t.pos_rgb);
    Var d_an = ad::clamp_min0(cos_var(tape, t.anchor_ir, t.neg_rgb));
    ir_terms.push_back(ad::add_const(ad::sub(d_an, d_ap), 1.0));
  }
  return ad::add(mean_of(tape, rgb_terms), mean_of(tape, ir_terms));
}

Var expat_loss(Tape& tape, std::span<const TupleVars> batch, double alpha,
               double beta, double margin) {
  check_batch(batch);
  require(alpha >= 0.0 && beta >= 0.0, "expat_loss: weights must be >= 0");
  std::vector<Var> rgb_terms, ir_terms;
  for (const TupleVars& t : batch) {
    // e^([cos(a, n)]_+ - cos(a, p) + xi) per direction
    Var c_ap = cos_var(tape, t.anchor_rgb, t.pos_ir);
    Var c_an = ad::clamp_min0(cos_var(tape, t.anchor_rgb, t.neg_ir));
    rgb_terms.push_back(ad::exp(ad::add_const(ad::sub(c_an, c_ap), margin)));
    Var d_ap = cos_var(tape, t.anchor_ir, t.pos_rgb);
    Var d_an = ad::clamp_min0(cos_var(tape, t.anchor_ir, t.neg_rgb));
    ir_terms.push_back(ad::exp(ad::add_const(ad::sub(d_an, d_ap), margin)));
  }
  return ad::add(ad::scale(mean_of(tape, rgb_terms), alpha),
                 ad::scale(mean_of(tape, ir_terms), beta));
}

Var tuplet21_loss(Tape& tape, std::span<const TupleVars> batch) {
  check_batch(batch);
  // log(1 + e^(a.n - a.p)) on raw dot products, both directions.
  std::vector<Var> terms;
  for (const TupleVars& t : batch) {
    Var r = ad::sub(ad::dot(t.anchor_rgb, t.neg_ir), ad::dot(t.anchor_rgb, t.pos_ir));
    terms.push_back(ad::softplus(r));
    Var s = ad::sub(ad::dot(t.anchor_ir, t.neg_rgb), ad::dot(t.anchor_ir, t.pos_rgb));
    terms.push_back(ad::softplus(s));
  }
  return mean_of(tape, terms);
}

Var identity_loss(Tape& tape, Var logits_rgb, Var logits_ir, int label,
                  double smoothing) {
  (void)tape;
  return ad::add(ad::softmax_cross_entropy(logits_rgb, label, smoothing),
                 ad::softmax_cross_entropy(logits_ir, label, smoothing));
}

Var ranking_loss(Tape& tape, std::span<const TupleVars> batch,
                 const LossConfig& config) {
  switch (config.variant) {
    case RankingVariant::triplet:
      return bidirectional_triplet(tape, batch, config.triplet_margin);
    case RankingVariant::cosine_triplet:
      return cosine_triplet(tape, batch, config.triplet_margin);
    case RankingVariant::at:
      return at_loss(tape, batch);
    case RankingVariant::expat:
      return expat_loss(tape, batch, config.alpha, config.beta, config.expat_margin);
    case RankingVariant::tuplet21:
      return tuplet21_loss(tape, batch);
  }
  throw ValidationError("ranking_loss: unknown variant");
}

Var identity_term(Tape& tape, std::span<const AnchorLogitsVars> logits,
                  double smoothing) {
  require(!logits.empty(), "identity_term: empty batch");
  std::vector<Var> terms;
  terms.reserve(logits.size());
  for (const AnchorLogitsVars& l : logits) {
    terms.push_back(identity_loss(tape, l.rgb, l.ir, l.label, smoothing));
  }
  return mean_of(tape, terms);
}

Var hybrid_loss(Tape& tape, std::span<const TupleVars> batch,
                std::span<const AnchorLogitsVars> logits,
                const LossConfig& config) {
  require(config.use_ranking || config.use_identity,
          "hybrid_loss: at least one component must be enabled");
  if (!config.use_identity) return ranking_loss(tape, batch, config);
  if (!config.use_ranking) return identity_term(tape, logits, config.label_smoothing);
  return ad::add(ranking_loss(tape, batch, config),
                 identity_term(tape, logits, config.label_smoothing));
}

TupleVars to_vars(Tape& tape, const EmbeddingTuple& t) {
  return TupleVars{
      tape.leaf(Tensor::column(t.anchor_rgb)), tape.leaf(Tensor::column(t.anchor_ir)),
      tape.leaf(Tensor::column(t.pos_rgb)),    tape.leaf(Tensor::column(t.pos_ir)),
      tape.leaf(Tensor::column(t.neg_rgb)),    tape.leaf(Tensor::column(t.neg_ir))};
}

namespace {

std::vector<TupleVars> load_batch(Tape& tape, const TupleBatch& batch) {
  batch.validate();
  std::vector<TupleVars> vars;
  vars.reserve(batch.tuples.size());
  for (const EmbeddingTuple& t : batch.tuples) vars.push_back(to_vars(tape, t));
  return vars;
}

}  // namespace

double bidirectional_triplet(const TupleBatch& batch, double margin) {
  Tape tape;
  return bidirectional_triplet(tape, load_batch(tape, batch), margin).scalar();
}

double cosine_triplet(const TupleBatch& batch, double margin) {
  Tape tape;
  return cosine_triplet(tape, load_batch(tape, batch), margin).scalar();
}

double at_loss(const TupleBatch& batch) {
  Tape tape;
  return at_loss(tape, load_batch(tape, batch)).scalar();
}

double expat_loss(const TupleBatch& batch, double alpha, double beta,
                  double margin) {
  Tape tape;
  return expat_loss(tape, load_batch(tape, batch), alpha, beta, margin).scalar();
}

double tuplet21_loss(const TupleBatch& batch) {
  Tape tape;
  return tuplet21_loss(tape, load_batch(tape, batch)).scalar();
}

double identity_loss(std::span<const double> logits_rgb,
                     std::span<const double> logits_ir, int label,
                     double smoothing) {
  Tape tape;
  Var lr = tape.leaf(Tensor::column({logits_rgb.begin(), logits_rgb.end()}));
  Var li = tape.leaf(Tensor::column({logits_ir.begin(), logits_ir.end()}));
  return identity_loss(tape, lr, li, label, smoothing).scalar();
}

double hybrid_loss(const TupleBatch& batch,
                   std::span<const std::vector<double>> logits_rgb,
                   std::span<const std::vector<double>> logits_ir,
                   std::span<const int> labels, const LossConfig& config) {
  Tape tape;
  std::vector<TupleVars> vars = load_batch(tape, batch);
  require(logits_rgb.size() == vars.size() && logits_ir.size() == vars.size() &&
              labels.size() == vars.size(),
          "hybrid_loss: per-tuple logits/labels required");
  std::vector<AnchorLogitsVars> logits;
  logits.reserve(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    logits.push_back({tape.leaf(Tensor::column(logits_rgb[i])),
                      tape.leaf(Tensor::column(logits_ir[i])), labels[i]});
  }
  return hybrid_loss(tape, vars, logits, config).scalar();
}

}  // namespace xreid
