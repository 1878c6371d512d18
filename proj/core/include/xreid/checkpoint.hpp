#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "xreid/model.hpp"
#include "xreid/optim.hpp"
#include "xreid/tensor.hpp"

namespace xreid {

// Versioned container of named arrays. On disk:
//   magic "XREIDCK1" (8 bytes)
//   u32 LE version
//   u32 LE entry count
//   per entry: u32 LE name length, name bytes,
//              u32 LE rows, u32 LE cols,
//              rows*cols little-endian 64-bit IEEE doubles
// Entries are written in name order, so equal contents give equal bytes.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::map<std::string, Tensor> entries;

  bool has(const std::string& name) const { return entries.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  void put(const std::string& name, Tensor t) { entries[name] = std::move(t); }

  double get_scalar(const std::string& name) const;
  void put_scalar(const std::string& name, double v) {
    entries[name] = Tensor::scalar(v);
  }
  // Raw 64-bit words (RNG state) ride in an entry bit-preserved.
  std::uint64_t get_u64(const std::string& name) const;
  void put_u64(const std::string& name, std::uint64_t v);
};

void write_checkpoint_file(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint_file(const std::string& path);

// Full training snapshot: model, optimizer moments, sampler position.
Checkpoint snapshot_training(const Model& model, const AdamState& adam,
                             long step, long sampler_cursor,
                             std::uint64_t run_seed);
struct TrainingSnapshot {
  Model model;
  AdamState adam;
  long step = 0;
  long sampler_cursor = 0;
  std::uint64_t run_seed = 0;
};
TrainingSnapshot restore_training(const Checkpoint& ckpt);

// Model-only view, enough for evaluation.
Model restore_model(const Checkpoint& ckpt);

}  // namespace xreid
