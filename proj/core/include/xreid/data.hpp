#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xreid/rng.hpp"

namespace xreid {

enum class Modality { rgb, ir };
enum class Split { train, test };

struct Sample {
  int id = 0;
  Modality modality = Modality::rgb;
  int camera = 0;
  std::vector<double> features;
};

struct Dataset {
  Split split = Split::train;
  int dim = 0;
  std::vector<Sample> samples;

  std::vector<int> identities() const;  // sorted, unique
  int count(int id, Modality m) const;
};

struct SyntheticConfig {
  int train_identities = 32;
  int test_identities = 16;
  int samples_per_id_per_modality = 20;
  int dim = 64;
  double gap = 0.5;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

// Two-modality synthetic data: each identity owns a unit latent direction;
// rgb samples are an orthonormal map of the latent plus noise, ir samples go
// through a second map whose difference from the first scales with `gap`.
// Identity latents depend only on (seed, id), so disjoint id ranges built
// from one seed live in a consistent world.
Dataset generate_synthetic(int identities, int per_modality, int dim,
                           double gap, double noise, std::uint64_t seed);

// Train split with ids [0, train_identities), test split with ids
// [train_identities, train_identities + test_identities); both share the
// same modality maps.
std::pair<Dataset, Dataset> generate_synthetic_pair(const SyntheticConfig& cfg);

// CSV with header id,modality,camera,f0,...,f{D-1}; modality tokens are
// exactly "rgb" or "ir"; features as decimal text with 17 significant
// digits (exact double round trip); LF newlines.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// One bi-directional tuple, as indices into the dataset's sample list.
struct TupleIndices {
  int anchor_rgb, anchor_ir;
  int pos_ir, neg_ir;    // rgb-anchor direction draws from ir
  int pos_rgb, neg_rgb;  // ir-anchor direction draws from rgb
};

// Emits batches of bi-directional tuples. An epoch pairs every rgb sample
// of an identity with a randomly matched ir sample and walks all anchor
// pairs in shuffled order, so all training samples are traversed; positives
// and negatives are drawn uniformly per tuple (positive excludes the paired
// anchor sample of its modality, negative is any other identity).
//
// Every tuple is a pure function of (seed, global tuple index): resuming
// from a cursor reproduces the exact stream.
class TupleSampler {
 public:
  TupleSampler(const Dataset& train, std::uint64_t seed);

  std::vector<TupleIndices> next_batch(int n);
  TupleIndices tuple_at(long global_index) const;

  long cursor() const { return cursor_; }
  void set_cursor(long c) { cursor_ = c; }
  long tuples_per_epoch() const { return tuples_per_epoch_; }

 private:
  void build_epoch(long epoch) const;

  const Dataset* data_;
  std::uint64_t seed_;
  long cursor_ = 0;
  long tuples_per_epoch_ = 0;

  std::vector<int> ids_;
  std::unordered_map<int, std::vector<int>> rgb_of_, ir_of_;
  std::vector<int> all_rgb_, all_ir_;

  mutable long cached_epoch_ = -1;
  mutable std::vector<std::pair<int, int>> epoch_pairs_;  // (rgb, ir) anchors
};

const char* to_string(Modality m);

}  // namespace xreid
