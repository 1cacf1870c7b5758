#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace fblin::rng {

// All randomness in an experiment flows from one master seed.  Every
// consumer derives its own stream seed from (master, stream tag, index),
// so realisations, noise channels and detection-line draws never share
// state and can be produced in any order.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index = 0) {
  return splitmix64(master ^ fnv1a64(stream) ^ splitmix64(index));
}

// mt19937_64 with hand-rolled uniform/gaussian draws so sequences are
// bit-identical across standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint32_t uniform_int(std::uint32_t n) {
    // rejection sampling keeps the draw exactly uniform
    const std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::uint32_t>(x % n);
  }

  // standard normal via Box-Muller
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fblin::rng
