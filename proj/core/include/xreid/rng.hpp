#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace xreid {

// Deterministic splitmix64 generator with a single 64-bit word of state.
// Chosen over std::mt19937 for trivially serializable state (checkpoints
// must resume bit-identical streams) and platform-independent sequences.
class Rng {
 public:
  Rng() : state_(0x9e3779b97f4a7c15ull) {}
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_double();

  // Uniform integer in [0, n), n >= 1. Unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller (no cached spare: state stays one word).
  double next_normal();

  // In-place Fisher-Yates shuffle; deterministic across platforms.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

// Derives an independent named sub-stream from a root seed, so that the
// data generator, tuple sampler, parameter init and evaluator each consume
// their own stream regardless of call order.
Rng substream(std::uint64_t root_seed, std::string_view name);
Rng substream(std::uint64_t root_seed, std::string_view name, std::uint64_t index);

}  // namespace xreid
