#include "screff/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace screff {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stage_seed(std::uint64_t seed, std::string_view label) {
  // FNV-1a over the label, folded into the seed through SplitMix64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = seed ^ h;
  return splitmix64(s);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t key1, std::uint64_t key2,
                     std::uint64_t key3) {
  // Fold each key into the SplitMix64 state so different tuples give
  // unrelated xoshiro256++ states even when numerically close.
  std::uint64_t st = seed;
  (void)splitmix64(st);
  st ^= splitmix64(st) + key1;
  st ^= splitmix64(st) + key2;
  st ^= splitmix64(st) + key3;
  for (auto& w : s_) w = splitmix64(st);
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double RngStream::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::exponential() { return -std::log(uniform_pos()); }

int RngStream::bernoulli(double p) { return uniform() < p ? 1 : 0; }

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::domain_error("RngStream::gamma: shape and rate must be > 0");
  if (shape < 1.0) {
    // Boost: draw Gamma(shape + 1) and apply the power correction.
    const double g = gamma(shape + 1.0, 1.0);
    return g * std::pow(uniform_pos(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    // Squeeze check first, then the full log acceptance test.
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v / rate;
  }
}

}  // namespace screff
