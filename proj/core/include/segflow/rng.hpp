#pragma once

#include <cstdint>
#include <random>

namespace segflow {

// Seeded random stream. The distribution transforms are written out here
// instead of using <random> distributions so the draw sequences are
// identical across standard libraries; reproducibility of every pipeline
// stage reduces to the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; two uniform draws per call.
  double normal();

  // Uniform integer in [0, n), rejection-sampled (n > 0).
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream derived from the construction seed and the
  // stream id. Unaffected by draws made on this object.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 gen_;
};

// splitmix64 finalizer; used for seed derivation and stateless lattice
// hashing in the scene generator.
std::uint64_t mix_u64(std::uint64_t x);

}  // namespace segflow
