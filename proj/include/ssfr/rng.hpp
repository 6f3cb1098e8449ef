#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ssfr {

// Portable random source: std::mt19937_64 (whose output sequence is fixed by the
// standard) with in-house conversions, so draws are identical across standard
// libraries. std::*_distribution is avoided for that reason.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound);

  // Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Child stream for an independent block (e.g. one generator per row block).
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace ssfr
