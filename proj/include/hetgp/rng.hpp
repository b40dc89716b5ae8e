#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace hetgp {

// Deterministic random layer. The std:: distribution objects are
// implementation-defined, so every draw here is built directly on the raw
// mt19937_64 stream; identical seeds give identical streams on any platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the polar method; the rejection loop consumes a
  // variable number of raw draws but is fully determined by the stream.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Unbiased integer in [0, bound) by rejection on the top of the range.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x > limit);
    return x % bound;
  }

  // Fisher-Yates; identity permutation for n <= 1.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    shuffle(p);
    return p;
  }

  // Independent child stream; children with distinct ids never collide with
  // each other or with the parent in practice.
  Rng split(std::uint64_t stream_id) const {
    return Rng(mix64(seed_ ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1))));
  }

  std::uint64_t seed() const { return seed_; }

private:
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
  std::uint64_t seed_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hetgp
