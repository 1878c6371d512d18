#include "xreid/trainer.hpp"

#include <cmath>
#include <string>

#include "xreid/errors.hpp"

namespace xreid {

namespace {

struct LossBreakdown {
  ad::Var total;
  double ranking = 0.0;
  double identity = 0.0;
};

LossBreakdown step_loss(ad::Tape& tape, Model& model, const ModelVars& params,
                        const Dataset& data,
                        const std::vector<TupleIndices>& batch,
                        const std::unordered_map<int, int>& class_of,
                        const LossConfig& loss_cfg) {
  // Embed all six members of every tuple; the normalizer sees the whole
  // mini-batch at once so its batch statistics cover every member.
  std::vector<ad::Var> raw;
  raw.reserve(batch.size() * 6);
  auto encode = [&](int sample_idx) {
    return encode_raw(tape, params, data.samples[sample_idx].features);
  };
  for (const TupleIndices& t : batch) {
    raw.push_back(encode(t.anchor_rgb));
    raw.push_back(encode(t.anchor_ir));
    raw.push_back(encode(t.pos_rgb));
    raw.push_back(encode(t.pos_ir));
    raw.push_back(encode(t.neg_rgb));
    raw.push_back(encode(t.neg_ir));
  }
  std::vector<ad::Var> embedded = normalize_batch_train(tape, model, params, raw);

  std::vector<TupleVars> tuple_vars;
  std::vector<AnchorLogitsVars> logits;
  tuple_vars.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ad::Var* base = &embedded[i * 6];
    tuple_vars.push_back(TupleVars{base[0], base[1], base[2], base[3], base[4], base[5]});
    if (loss_cfg.use_identity) {
      int label = class_of.at(data.samples[batch[i].anchor_rgb].id);
      logits.push_back(AnchorLogitsVars{ad::matvec(params.cls_w, base[0]),
                                        ad::matvec(params.cls_w, base[1]), label});
    }
  }

  LossBreakdown out{};
  std::optional<ad::Var> ranking, identity;
  if (loss_cfg.use_ranking) {
    ranking = ranking_loss(tape, tuple_vars, loss_cfg);
    out.ranking = ranking->scalar();
  }
  if (loss_cfg.use_identity) {
    identity = identity_term(tape, logits, loss_cfg.label_smoothing);
    out.identity = identity->scalar();
  }
  if (ranking && identity) {
    out.total = ad::add(*ranking, *identity);
  } else if (ranking) {
    out.total = *ranking;
  } else if (identity) {
    out.total = *identity;
  } else {
    throw ValidationError("train: both loss components disabled");
  }
  return out;
}

TrainResult run_loop(const Dataset& data, const TrainConfig& cfg, Model model,
                     AdamState adam, long first_step, long cursor,
                     const TrainHooks* hooks) {
  if (data.samples.empty()) throw ValidationError("train: empty dataset");
  if (cfg.batch_size < 1) throw ValidationError("train: batch size must be >= 1");
  if (cfg.steps < 0) throw ValidationError("train: negative step count");

  // Contiguous class indices for the classifier head.
  std::vector<int> ids = data.identities();
  std::unordered_map<int, int> class_of;
  for (std::size_t i = 0; i < ids.size(); ++i) class_of[ids[i]] = static_cast<int>(i);

  TupleSampler sampler(data, substream(cfg.seed, "sampler").state());
  sampler.set_cursor(cursor);

  TrainResult result;
  if (cfg.steps > first_step) {
    result.log.reserve(static_cast<std::size_t>(cfg.steps - first_step));
  }

  for (long step = first_step; step < cfg.steps; ++step) {
    double lr = cfg.lr.at(step);
    std::vector<TupleIndices> batch = sampler.next_batch(cfg.batch_size);

    ad::Tape tape;
    ModelVars params = load_params(tape, model);
    LossBreakdown loss;
    try {
      loss = step_loss(tape, model, params, data, batch, class_of, cfg.loss);
    } catch (const NumericError& e) {
      throw NumericError("train: step " + std::to_string(step) + ": " + e.what());
    }
    double total = loss.total.scalar();
    if (!std::isfinite(total)) {
      throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                         " (total=" + std::to_string(total) +
                         ", ranking=" + std::to_string(loss.ranking) +
                         ", identity=" + std::to_string(loss.identity) + ")");
    }

    tape.backward(loss.total);

    std::vector<ad::Var> param_vars = params.ordered();
    std::vector<Tensor*> param_ptrs{&model.enc_w1, &model.enc_b1, &model.enc_w2,
                                    &model.enc_b2, &model.cls_w};
    std::vector<Tensor> aux_params;  // csbn vectors live as plain vectors
    aux_params.reserve(2);
    if (params.gamma) aux_params.push_back(Tensor::column(model.csbn.gamma));
    if (params.shift) aux_params.push_back(Tensor::column(model.csbn.shift));
    for (Tensor& t : aux_params) param_ptrs.push_back(&t);

    std::vector<const Tensor*> grad_ptrs;
    grad_ptrs.reserve(param_vars.size());
    for (ad::Var v : param_vars) grad_ptrs.push_back(&tape.grad(v));

    if (adam.m.empty()) {
      adam = AdamState::init(param_ptrs);
    }
    adam_step(param_ptrs, grad_ptrs, adam, lr, cfg.adam);

    std::size_t aux = 0;
    if (params.gamma) model.csbn.gamma = aux_params[aux++].data;
    if (params.shift) model.csbn.shift = aux_params[aux++].data;

    StepLog entry{step, total, loss.ranking, loss.identity, lr};
    result.log.push_back(entry);
    if (hooks && hooks->on_log) hooks->on_log(entry);

    bool at_cadence = cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0;
    bool at_end = step + 1 == cfg.steps;
    if (hooks && hooks->on_checkpoint && (at_cadence || at_end)) {
      hooks->on_checkpoint(
          snapshot_training(model, adam, step + 1, sampler.cursor(), cfg.seed),
          step + 1);
    }
  }

  result.model = std::move(model);
  result.adam = std::move(adam);
  result.final_step = cfg.steps;
  result.sampler_cursor = sampler.cursor();
  return result;
}

}  // namespace

TrainResult train(const Dataset& train_split, const TrainConfig& cfg,
                  const TrainHooks* hooks) {
  int classes = static_cast<int>(train_split.identities().size());
  ModelShape shape{train_split.dim, cfg.hidden_dim, cfg.embed_dim, classes};
  Rng init_rng = substream(cfg.seed, "init");
  Model model = Model::init(shape, cfg.normalizer, init_rng, cfg.csbn_momentum,
                            cfg.csbn_epsilon);
  return run_loop(train_split, cfg, std::move(model), AdamState{}, 0, 0, hooks);
}

TrainResult train_resume(const Dataset& train_split, const TrainConfig& cfg,
                         const TrainingSnapshot& snapshot,
                         const TrainHooks* hooks) {
  if (snapshot.run_seed != cfg.seed) {
    throw ValidationError("train_resume: config seed differs from checkpoint seed");
  }
  if (snapshot.model.shape.input_dim != train_split.dim) {
    throw ValidationError("train_resume: dataset dimension mismatch, expected " +
                          std::to_string(snapshot.model.shape.input_dim) + ", got " +
                          std::to_string(train_split.dim));
  }
  Model model = snapshot.model;
  model.csbn.mode = CsbnMode::train;
  return run_loop(train_split, cfg, std::move(model), snapshot.adam,
                  snapshot.step, snapshot.sampler_cursor, hooks);
}

double lr_schedule(long step, const TrainConfig& cfg) { return cfg.lr.at(step); }

void BoundedLogQueue::push(const StepLog& log) {
  std::lock_guard lock(mu_);
  if (items_.size() == capacity_) {
    items_.pop_front();
    ++dropped_;
  }
  items_.push_back(log);
  cv_.notify_one();
}

void BoundedLogQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

std::optional<StepLog> BoundedLogQueue::pop() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return !items_.empty() || closed_; });
  if (items_.empty()) return std::nullopt;
  StepLog log = items_.front();
  items_.pop_front();
  return log;
}

long BoundedLogQueue::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

}  // namespace xreid
