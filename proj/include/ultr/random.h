#ifndef ULTR_RANDOM_H_
#define ULTR_RANDOM_H_

#include <cstdint>
#include <limits>

namespace ultr {

/// SplitMix64 generator. Cheap to seed, so every impression, swap arm or
/// training run can own an independent stream derived from a root seed.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Seed of sub-stream `stream` of `seed`; order-independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 a(seed);
  SplitMix64 b(a() ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
  return b();
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(SplitMix64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(SplitMix64& rng, double p) { return uniform01(rng) < p; }

}  // namespace ultr

#endif  // ULTR_RANDOM_H_
