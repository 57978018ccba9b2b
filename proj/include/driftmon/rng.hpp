#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace driftmon {

/// Mixes a seed with a label into a new 64-bit seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Deterministic random stream. Substreams are derived from (seed, label)
/// only, so their contents never depend on which worker draws them or when.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::uint64_t label) const { return Rng(derive_seed(seed_, label)); }
  Rng substream(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Rng seed_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace driftmon
