#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>

#include "xreid/checkpoint.hpp"
#include "xreid/data.hpp"
#include "xreid/losses.hpp"
#include "xreid/model.hpp"
#include "xreid/optim.hpp"

namespace xreid {

struct TrainConfig {
  long steps = 2000;
  LrSchedule lr{3e-4, 0.1, {1000, 1500}, 100, 0.1};  // desk-scale defaults
  int batch_size = 8;
  LossConfig loss;
  NormalizerKind normalizer = NormalizerKind::csbn;
  double csbn_momentum = 0.1;
  double csbn_epsilon = 1e-5;
  int hidden_dim = 128;
  int embed_dim = 32;
  std::uint64_t seed = 1;
  long checkpoint_every = 0;  // 0: only via on_checkpoint at the end
  AdamConfig adam;
};

struct StepLog {
  long step;
  double total;
  double ranking;
  double identity;
  double lr;
};

struct TrainResult {
  Model model;
  AdamState adam;
  std::vector<StepLog> log;
  long final_step = 0;       // steps completed
  long sampler_cursor = 0;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_log;
  // Called at every checkpoint cadence and once after the final step.
  std::function<void(const Checkpoint&, long step)> on_checkpoint;
};

// Runs the training loop: sample a batch of bi-directional tuples, embed all
// six members of each tuple through the shared encoder and the normalizer
// (train mode), compute the hybrid loss (ranking over all members, identity
// over the anchors), backpropagate and apply one optimizer step.
// Aborts with NumericError naming the step and loss components if the loss
// goes non-finite.
TrainResult train(const Dataset& train_split, const TrainConfig& cfg,
                  const TrainHooks* hooks = nullptr);

// Continues a snapshotted run; with the same config this reproduces the
// uninterrupted trajectory exactly.
TrainResult train_resume(const Dataset& train_split, const TrainConfig& cfg,
                         const TrainingSnapshot& snapshot,
                         const TrainHooks* hooks = nullptr);

double lr_schedule(long step, const TrainConfig& cfg);

// Single-producer bounded channel for step logs. push never blocks: when
// the buffer is full the oldest entry is dropped and counted, so a slow
// consumer cannot stall the training loop.
class BoundedLogQueue {
 public:
  explicit BoundedLogQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(const StepLog& log);
  void close();
  // Blocks until an entry arrives or the queue is closed and drained.
  std::optional<StepLog> pop();
  long dropped() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<StepLog> items_;
  std::size_t capacity_;
  long dropped_ = 0;
  bool closed_ = false;
};

}  // namespace xreid
