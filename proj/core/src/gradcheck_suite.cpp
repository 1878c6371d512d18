#include "xreid/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "xreid/losses.hpp"
#include "xreid/metric.hpp"
#include "xreid/model.hpp"
#include "xreid/rng.hpp"

namespace xreid {

namespace {

constexpr std::uint64_t kSuiteSeed = 0x9a0f3e51c2b44d7ull;

std::vector<double> random_vec(int k, Rng& rng) {
  std::vector<double> v(k);
  for (double& x : v) x = rng.next_normal();
  return v;
}

// Finite differences need a smooth neighborhood: reject batches where any
// clamp argument sits within `margin` of its kink.
bool batch_is_smooth(const TupleBatch& batch, double margin) {
  for (const EmbeddingTuple& t : batch.tuples) {
    double c_ap = cosine_similarity(t.anchor_rgb, t.pos_ir);
    double c_an = cosine_similarity(t.anchor_rgb, t.neg_ir);
    double d_ap = cosine_similarity(t.anchor_ir, t.pos_rgb);
    double d_an = cosine_similarity(t.anchor_ir, t.neg_rgb);
    if (std::abs(c_an) < margin || std::abs(d_an) < margin) return false;
    if (std::abs(c_an - c_ap + 0.3) < margin) return false;
    if (std::abs(d_an - d_ap + 0.3) < margin) return false;
    double e_ap = euclidean_distance(t.anchor_rgb, t.pos_ir);
    double e_an = euclidean_distance(t.anchor_rgb, t.neg_ir);
    double f_ap = euclidean_distance(t.anchor_ir, t.pos_rgb);
    double f_an = euclidean_distance(t.anchor_ir, t.neg_rgb);
    if (std::abs(e_ap - e_an + 0.3) < margin) return false;
    if (std::abs(f_ap - f_an + 0.3) < margin) return false;
  }
  return true;
}

TupleBatch random_batch(int n, int k, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = substream(seed, "batch", attempt);
    TupleBatch batch;
    for (int i = 0; i < n; ++i) {
      EmbeddingTuple t;
      t.anchor_rgb = random_vec(k, rng);
      t.anchor_ir = random_vec(k, rng);
      t.pos_rgb = random_vec(k, rng);
      t.pos_ir = random_vec(k, rng);
      t.neg_rgb = random_vec(k, rng);
      t.neg_ir = random_vec(k, rng);
      t.anchor_id = 0;
      t.neg_id = 1;
      batch.tuples.push_back(std::move(t));
    }
    if (batch_is_smooth(batch, 1e-3)) return batch;
  }
}

// theta <-> the 6N embedding vectors of a batch, flattened in order.
TupleBatch batch_from_theta(const TupleBatch& proto, std::span<const double> theta) {
  TupleBatch batch = proto;
  std::size_t off = 0;
  for (EmbeddingTuple& t : batch.tuples) {
    for (std::vector<double>* v : {&t.anchor_rgb, &t.anchor_ir, &t.pos_rgb,
                                   &t.pos_ir, &t.neg_rgb, &t.neg_ir}) {
      std::copy(theta.begin() + off, theta.begin() + off + v->size(), v->begin());
      off += v->size();
    }
  }
  return batch;
}

std::vector<double> theta_of_batch(const TupleBatch& batch) {
  std::vector<double> theta;
  for (const EmbeddingTuple& t : batch.tuples) {
    for (const std::vector<double>* v : {&t.anchor_rgb, &t.anchor_ir, &t.pos_rgb,
                                         &t.pos_ir, &t.neg_rgb, &t.neg_ir}) {
      theta.insert(theta.end(), v->begin(), v->end());
    }
  }
  return theta;
}

using GraphLoss =
    std::function<ad::Var(ad::Tape&, std::span<const TupleVars>)>;

// One embedding-level check: analytic gradients from the tape against
// central differences of the scalar re-evaluation.
double check_batch_loss(const TupleBatch& proto, const GraphLoss& loss_fn,
                        bool corrupt) {
  std::vector<double> theta = theta_of_batch(proto);

  ad::Tape tape;
  std::vector<TupleVars> vars;
  for (const EmbeddingTuple& t : proto.tuples) vars.push_back(to_vars(tape, t));
  ad::Var loss = loss_fn(tape, vars);
  tape.backward(loss);

  std::vector<double> analytic;
  for (const TupleVars& tv : vars) {
    for (ad::Var v : {tv.anchor_rgb, tv.anchor_ir, tv.pos_rgb, tv.pos_ir,
                      tv.neg_rgb, tv.neg_ir}) {
      const Tensor& g = v.grad();
      analytic.insert(analytic.end(), g.data.begin(), g.data.end());
    }
  }
  if (corrupt) analytic[0] += 10.0;

  auto f = [&](std::span<const double> th) {
    TupleBatch b = batch_from_theta(proto, th);
    ad::Tape t2;
    std::vector<TupleVars> v2;
    for (const EmbeddingTuple& t : b.tuples) v2.push_back(to_vars(t2, t));
    return loss_fn(t2, v2).scalar();
  };
  return ad::grad_check(f, theta, analytic);
}

// Hybrid (ranking + identity): differentiated with respect to both the
// embeddings and the classifier logits, with logits as free leaves.
double check_hybrid(const TupleBatch& proto, int classes, std::uint64_t seed) {
  Rng rng = substream(seed, "hybrid_logits");
  int n = proto.size();
  std::vector<double> theta = theta_of_batch(proto);
  std::size_t embed_len = theta.size();
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    labels.push_back(static_cast<int>(rng.next_below(classes)));
    for (int j = 0; j < 2 * classes; ++j) theta.push_back(rng.next_normal());
  }
  LossConfig cfg;  // expat + identity defaults

  auto eval = [&](std::span<const double> th, std::vector<double>* grad) {
    TupleBatch b = batch_from_theta(proto, th.subspan(0, embed_len));
    ad::Tape tape;
    std::vector<TupleVars> vars;
    for (const EmbeddingTuple& t : b.tuples) vars.push_back(to_vars(tape, t));
    std::vector<AnchorLogitsVars> logits;
    std::size_t off = embed_len;
    for (int i = 0; i < n; ++i) {
      ad::Var lr = tape.leaf(Tensor::column({th.begin() + off, th.begin() + off + classes}));
      off += classes;
      ad::Var li = tape.leaf(Tensor::column({th.begin() + off, th.begin() + off + classes}));
      off += classes;
      logits.push_back(AnchorLogitsVars{lr, li, labels[i]});
    }
    ad::Var loss = hybrid_loss(tape, vars, logits, cfg);
    if (grad) {
      tape.backward(loss);
      grad->clear();
      for (const TupleVars& tv : vars) {
        for (ad::Var v : {tv.anchor_rgb, tv.anchor_ir, tv.pos_rgb, tv.pos_ir,
                          tv.neg_rgb, tv.neg_ir}) {
          grad->insert(grad->end(), v.grad().data.begin(), v.grad().data.end());
        }
      }
      for (const AnchorLogitsVars& l : logits) {
        grad->insert(grad->end(), l.rgb.grad().data.begin(), l.rgb.grad().data.end());
        grad->insert(grad->end(), l.ir.grad().data.begin(), l.ir.grad().data.end());
      }
    }
    return loss.scalar();
  };
  std::vector<double> analytic;
  eval(theta, &analytic);
  return ad::grad_check([&](std::span<const double> th) { return eval(th, nullptr); },
                        theta, analytic);
}

double check_identity_loss(int classes, std::uint64_t seed) {
  Rng rng = substream(seed, "logits");
  std::vector<double> theta = random_vec(2 * classes, rng);
  int label = static_cast<int>(rng.next_below(classes));
  double smoothing = 0.1;

  auto eval = [&](std::span<const double> th, std::vector<double>* grad) {
    ad::Tape tape;
    ad::Var lr = tape.leaf(Tensor::column({th.begin(), th.begin() + classes}));
    ad::Var li = tape.leaf(Tensor::column({th.begin() + classes, th.end()}));
    ad::Var loss = identity_loss(tape, lr, li, label, smoothing);
    if (grad) {
      tape.backward(loss);
      grad->clear();
      grad->insert(grad->end(), lr.grad().data.begin(), lr.grad().data.end());
      grad->insert(grad->end(), li.grad().data.begin(), li.grad().data.end());
    }
    return loss.scalar();
  };
  std::vector<double> analytic;
  eval(theta, &analytic);
  return ad::grad_check([&](std::span<const double> th) { return eval(th, nullptr); },
                        theta, analytic);
}

// End-to-end: encoder + train-mode normalization + hybrid loss on a tiny
// model, differentiated with respect to every parameter.
double check_end_to_end(std::uint64_t seed) {
  const int input_dim = 8, hidden = 8, embed = 4, n_tuples = 2, classes = 4;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = substream(seed, "e2e", attempt);
    ModelShape shape{input_dim, hidden, embed, classes};
    Model proto = Model::init(shape, NormalizerKind::csbn, rng);

    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    for (int i = 0; i < n_tuples; ++i) {
      for (int j = 0; j < 6; ++j) inputs.push_back(random_vec(input_dim, rng));
      labels.push_back(static_cast<int>(rng.next_below(classes)));
    }

    LossConfig loss_cfg;  // expat + identity

    auto run = [&](const Model& m_in, std::vector<double>* grad) {
      Model m = m_in;  // batch statistics updates stay local
      ad::Tape tape;
      ModelVars params = load_params(tape, m);
      std::vector<ad::Var> raw;
      for (const auto& x : inputs) raw.push_back(encode_raw(tape, params, x));
      std::vector<ad::Var> embedded = normalize_batch_train(tape, m, params, raw);
      std::vector<TupleVars> tuple_vars;
      std::vector<AnchorLogitsVars> logits;
      for (int i = 0; i < n_tuples; ++i) {
        const ad::Var* base = &embedded[i * 6];
        tuple_vars.push_back(
            TupleVars{base[0], base[1], base[2], base[3], base[4], base[5]});
        logits.push_back(AnchorLogitsVars{ad::matvec(params.cls_w, base[0]),
                                          ad::matvec(params.cls_w, base[1]),
                                          labels[i]});
      }
      ad::Var loss = hybrid_loss(tape, tuple_vars, logits, loss_cfg);
      if (grad) {
        tape.backward(loss);
        grad->clear();
        for (ad::Var v : params.ordered()) {
          grad->insert(grad->end(), v.grad().data.begin(), v.grad().data.end());
        }
      }
      return loss.scalar();
    };

    // Screen relu and clamp kinks at the proto parameters.
    bool smooth = true;
    {
      Model m = proto;
      ad::Tape tape;
      ModelVars params = load_params(tape, m);
      std::vector<ad::Var> raw;
      for (const auto& x : inputs) raw.push_back(encode_raw(tape, params, x));
      for (const auto& x : inputs) {
        std::vector<double> h(hidden);
        for (int r = 0; r < hidden; ++r) {
          double acc = proto.enc_b1.data[r];
          for (int c = 0; c < input_dim; ++c) acc += proto.enc_w1.at(r, c) * x[c];
          if (std::abs(acc) < 1e-4) smooth = false;
        }
      }
      std::vector<ad::Var> embedded = normalize_batch_train(tape, m, params, raw);
      for (int i = 0; i < n_tuples && smooth; ++i) {
        const ad::Var* base = &embedded[i * 6];
        double c_an = cosine_similarity(base[0].value().data, base[5].value().data);
        double d_an = cosine_similarity(base[1].value().data, base[4].value().data);
        if (std::abs(c_an) < 1e-3 || std::abs(d_an) < 1e-3) smooth = false;
      }
    }
    if (!smooth) continue;

    std::vector<double> theta;
    for (const Tensor* t : {&proto.enc_w1, &proto.enc_b1, &proto.enc_w2,
                            &proto.enc_b2, &proto.cls_w}) {
      theta.insert(theta.end(), t->data.begin(), t->data.end());
    }
    theta.insert(theta.end(), proto.csbn.gamma.begin(), proto.csbn.gamma.end());

    auto model_from = [&](std::span<const double> th) {
      Model m = proto;
      std::size_t off = 0;
      for (Tensor* t : {&m.enc_w1, &m.enc_b1, &m.enc_w2, &m.enc_b2, &m.cls_w}) {
        std::copy(th.begin() + off, th.begin() + off + t->data.size(),
                  t->data.begin());
        off += t->data.size();
      }
      std::copy(th.begin() + off, th.end(), m.csbn.gamma.begin());
      return m;
    };

    std::vector<double> analytic;
    run(proto, &analytic);
    return ad::grad_check(
        [&](std::span<const double> th) { return run(model_from(th), nullptr); },
        theta, analytic);
  }
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& opts) {
  struct Entry {
    std::string name;
    GraphLoss fn;
  };
  const std::vector<Entry> losses{
      {"triplet",
       [](ad::Tape& t, std::span<const TupleVars> b) {
         return bidirectional_triplet(t, b, 0.3);
       }},
      {"cosine_triplet",
       [](ad::Tape& t, std::span<const TupleVars> b) {
         return cosine_triplet(t, b, 0.3);
       }},
      {"at", [](ad::Tape& t, std::span<const TupleVars> b) { return at_loss(t, b); }},
      {"expat",
       [](ad::Tape& t, std::span<const TupleVars> b) {
         return expat_loss(t, b, 1.0, 1.0, 1.0);
       }},
      {"tuplet21",
       [](ad::Tape& t, std::span<const TupleVars> b) { return tuplet21_loss(t, b); }}};

  std::vector<GradCheckCase> results;
  for (std::size_t li = 0; li < losses.size(); ++li) {
    GradCheckCase c;
    c.name = losses[li].name;
    for (int s = 0; s < opts.seeds; ++s) {
      TupleBatch batch = random_batch(
          opts.batch_size, opts.embed_dim,
          substream(kSuiteSeed, losses[li].name, static_cast<std::uint64_t>(s)).state());
      bool corrupt = opts.flip_sign && li == 0 && s == 0;
      c.max_rel_err =
          std::max(c.max_rel_err, check_batch_loss(batch, losses[li].fn, corrupt));
    }
    results.push_back(std::move(c));
  }

  GradCheckCase identity_case;
  identity_case.name = "identity";
  for (int s = 0; s < opts.seeds; ++s) {
    identity_case.max_rel_err = std::max(
        identity_case.max_rel_err,
        check_identity_loss(opts.classes,
                            substream(kSuiteSeed, "identity",
                                      static_cast<std::uint64_t>(s)).state()));
  }
  results.push_back(std::move(identity_case));

  GradCheckCase e2e;
  e2e.name = "end_to_end";
  for (int s = 0; s < opts.seeds; ++s) {
    e2e.max_rel_err = std::max(
        e2e.max_rel_err,
        check_end_to_end(substream(kSuiteSeed, "e2e_case",
                                   static_cast<std::uint64_t>(s)).state()));
  }
  results.push_back(std::move(e2e));
  return results;
}

}  // namespace xreid
