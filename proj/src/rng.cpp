#include "hain/rng.hpp"

#include <cmath>

#include "hain/common.hpp"

namespace hain {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("Rng::uniform: lo > hi");
  return lo + (hi - lo) * next_double();
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = next_double();
  const double u2 = next_double();
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::next_below: n must be positive");
  // Rejection sampling removes modulo bias and stays platform-exact.
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

Rng Rng::fork(std::uint64_t tag) const {
  return Rng(mix64(seed_ ^ (kGolden * (tag + 1))));
}

double gumbel_from_uniform(double u) {
  if (u < 1e-12) u = 1e-12;
  if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
  return -std::log(-std::log(u));
}

std::vector<double> gumbel_sample(Rng& rng, std::size_t n) {
  if (n == 0) throw ContractError("gumbel_sample: n must be >= 1");
  std::vector<double> out(n);
  for (double& g : out) g = gumbel_from_uniform(rng.next_double());
  return out;
}

}  // namespace hain
