#pragma once

#include <span>
#include <vector>

#include "xreid/autodiff.hpp"

namespace xreid {

// One bi-directional tuple at embedding level: a same-identity rgb/ir anchor
// pair, plus cross-modality positives and negatives for each direction.
struct EmbeddingTuple {
  std::vector<double> anchor_rgb, anchor_ir;
  std::vector<double> pos_rgb, pos_ir;
  std::vector<double> neg_rgb, neg_ir;
  int anchor_id = 0;
  int neg_id = 1;
};

struct TupleBatch {
  std::vector<EmbeddingTuple> tuples;

  // N >= 1, one shared channel count, neg_id != anchor_id.
  void validate() const;
  int size() const { return static_cast<int>(tuples.size()); }
};

enum class RankingVariant { triplet, cosine_triplet, at, expat, tuplet21 };

struct LossConfig {
  RankingVariant variant = RankingVariant::expat;
  double triplet_margin = 0.3;   // xi for triplet and cosine_triplet
  double expat_margin = 1.0;     // xi in the expAT exponent
  double alpha = 1.0;            // rgb-anchor direction weight
  double beta = 1.0;             // ir-anchor direction weight
  double label_smoothing = 0.1;
  bool use_ranking = true;       // hybrid components; disable for ablations
  bool use_identity = true;
};

// ---- graph route (differentiable, used by the trainer) ----------------

struct TupleVars {
  ad::Var anchor_rgb, anchor_ir;
  ad::Var pos_rgb, pos_ir;
  ad::Var neg_rgb, neg_ir;
};

// Classifier outputs of one anchor pair, both modalities.
struct AnchorLogitsVars {
  ad::Var rgb;
  ad::Var ir;
  int label = 0;
};

ad::Var bidirectional_triplet(ad::Tape& tape, std::span<const TupleVars> batch,
                              double margin);
ad::Var cosine_triplet(ad::Tape& tape, std::span<const TupleVars> batch,
                       double margin);
ad::Var at_loss(ad::Tape& tape, std::span<const TupleVars> batch);
ad::Var expat_loss(ad::Tape& tape, std::span<const TupleVars> batch,
                   double alpha, double beta, double margin);
ad::Var tuplet21_loss(ad::Tape& tape, std::span<const TupleVars> batch);
ad::Var identity_loss(ad::Tape& tape, ad::Var logits_rgb, ad::Var logits_ir,
                      int label, double smoothing);

// Dispatches on config.variant.
ad::Var ranking_loss(ad::Tape& tape, std::span<const TupleVars> batch,
                     const LossConfig& config);
// Identity loss averaged over the anchors of a batch.
ad::Var identity_term(ad::Tape& tape, std::span<const AnchorLogitsVars> logits,
                      double smoothing);
// Unweighted sum of the selected components.
ad::Var hybrid_loss(ad::Tape& tape, std::span<const TupleVars> batch,
                    std::span<const AnchorLogitsVars> logits,
                    const LossConfig& config);

// Loads a plain tuple onto a tape.
TupleVars to_vars(ad::Tape& tape, const EmbeddingTuple& tuple);

// ---- value route (same graph underneath) -------------------------------

double bidirectional_triplet(const TupleBatch& batch, double margin);
double cosine_triplet(const TupleBatch& batch, double margin);
double at_loss(const TupleBatch& batch);
double expat_loss(const TupleBatch& batch, double alpha, double beta,
                  double margin);
double tuplet21_loss(const TupleBatch& batch);
double identity_loss(std::span<const double> logits_rgb,
                     std::span<const double> logits_ir, int label,
                     double smoothing);
double hybrid_loss(const TupleBatch& batch,
                   std::span<const std::vector<double>> logits_rgb,
                   std::span<const std::vector<double>> logits_ir,
                   std::span<const int> labels, const LossConfig& config);

}  // namespace xreid
