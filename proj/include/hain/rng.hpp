#ifndef HAIN_RNG_HPP
#define HAIN_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hain {

/// Deterministic counter-based generator (SplitMix64). The raw 64-bit
/// stream is pure integer arithmetic, so a fixed seed yields the same
/// stream on every platform. Substreams forked by tag are independent of
/// how much of the parent stream has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random mantissa bits.
  double next_double();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; pairs are cached, draws stay ordered.
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Deterministic substream keyed on (original seed, tag); unaffected by
  /// draws already made from this generator.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// Standard Gumbel(0,1) transform of a uniform draw, with the uniform
/// clamped to [1e-12, 1-1e-12] so the result is always finite.
double gumbel_from_uniform(double u);

/// n independent Gumbel(0,1) samples.
std::vector<double> gumbel_sample(Rng& rng, std::size_t n);

}  // namespace hain

#endif  // HAIN_RNG_HPP
