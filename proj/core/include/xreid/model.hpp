#pragma once

#include <optional>
#include <span>

#include "xreid/autodiff.hpp"
#include "xreid/csbn.hpp"
#include "xreid/rng.hpp"
#include "xreid/tensor.hpp"

namespace xreid {

// How raw encoder outputs are mapped into the common feature space.
enum class NormalizerKind { csbn, csbn_full, csbn_none, l2norm, off };

struct ModelShape {
  int input_dim = 0;
  int hidden_dim = 128;
  int embed_dim = 32;
  int num_classes = 0;
};

// Single-stream encoder (affine-relu-affine, weights shared across
// modalities) plus a bias-free classifier head. No extra embedding layer
// after the encoder.
struct Model {
  ModelShape shape;
  NormalizerKind normalizer = NormalizerKind::csbn;
  Tensor enc_w1, enc_b1;  // input_dim -> hidden_dim
  Tensor enc_w2, enc_b2;  // hidden_dim -> embed_dim
  Tensor cls_w;           // num_classes x embed_dim, no bias
  CsbnState csbn;         // present for all kinds; used by the csbn family

  // Fan-in-scaled normal init for weights, zero biases, unit gamma.
  static Model init(const ModelShape& shape, NormalizerKind kind, Rng& rng,
                    double csbn_momentum = 0.1, double csbn_epsilon = 1e-5);

  // Embedding of one input in eval mode (frozen statistics). The same
  // parameters serve both modalities.
  std::vector<double> embed_eval(std::span<const double> x) const;

  bool uses_csbn() const {
    return normalizer == NormalizerKind::csbn ||
           normalizer == NormalizerKind::csbn_full ||
           normalizer == NormalizerKind::csbn_none;
  }
};

// Parameter nodes of one training-step graph, in the canonical order used
// by the optimizer: w1, b1, w2, b2, cls_w[, gamma][, shift].
struct ModelVars {
  ad::Var w1, b1, w2, b2, cls_w;
  std::optional<ad::Var> gamma, shift;

  std::vector<ad::Var> ordered() const;
};

ModelVars load_params(ad::Tape& tape, const Model& model);

// Raw (pre-normalizer) embedding of one input on the tape.
ad::Var encode_raw(ad::Tape& tape, const ModelVars& params,
                   std::span<const double> x);

// Applies the model's normalizer to a whole batch of raw embeddings;
// train-mode batch statistics for the csbn family.
std::vector<ad::Var> normalize_batch_train(ad::Tape& tape, Model& model,
                                           const ModelVars& params,
                                           std::span<const ad::Var> raw);

NormalizerKind normalizer_from_string(const std::string& s);
const char* to_string(NormalizerKind k);

}  // namespace xreid
