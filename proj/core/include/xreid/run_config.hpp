#pragma once

#include <string>

#include "xreid/data.hpp"
#include "xreid/evaluator.hpp"
#include "xreid/trainer.hpp"

namespace xreid {

// Declarative description of one run: data source, loss, normalizer,
// optimization and evaluation settings. Serialized as a flat key-value file
// with sections. All randomness of a run flows from the single root `seed`,
// split into named sub-streams (data, sampler, init, eval).
struct RunConfig {
  enum class DataSource { synthetic, csv };

  // [data]
  DataSource source = DataSource::synthetic;
  std::string train_csv;
  std::string test_csv;
  int ids = 32;
  int test_ids = 16;
  int per_mod = 20;
  int dim = 64;
  double gap = 0.5;
  double noise = 0.1;

  // [loss]
  LossConfig loss;

  // [csbn]
  NormalizerKind normalizer = NormalizerKind::csbn;
  double csbn_momentum = 0.1;
  double csbn_epsilon = 1e-5;

  // [train]
  long steps = 2000;
  double base_lr = 3e-4;
  double decay_factor = 0.1;
  std::vector<long> decay_steps{1000, 1500};
  long warmup_steps = 100;
  int batch = 8;
  int hidden_dim = 128;
  int embed_dim = 32;
  long checkpoint_every = 0;
  std::uint64_t seed = 1;

  // [eval]
  GalleryMode eval_mode = GalleryMode::single_shot;
  int eval_trials = 10;

  // [output]
  std::string out_dir = "runs/default";

  TrainConfig train_config() const;
  SyntheticConfig synthetic_config() const;  // data sub-stream of the root seed
  std::uint64_t eval_seed() const;

  // Parses and validates; reports every problem at once, not just the first.
  static RunConfig load(const std::string& path);
  // Writes the fully-defaulted effective config; loading it back reproduces
  // the run.
  void save(const std::string& path) const;
};

const char* to_string(RankingVariant v);
RankingVariant ranking_variant_from_string(const std::string& s);

}  // namespace xreid
