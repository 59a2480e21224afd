#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tsfract {

// splitmix64, used to expand a single seed into generator state and to
// derive independent sub-stream seeds (e.g. one per record or repetition).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  return splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna). Chosen over std:: distributions because
// the full output sequence, including the Gaussian and shuffle paths below,
// is identical on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // uniform in [-half_width, half_width)
  double next_symmetric(double half_width) {
    return (2.0 * next_unit() - 1.0) * half_width;
  }

  // standard normal via Box-Muller; consumes exactly two words per draw
  double next_gaussian() {
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // uniform integer in [0, bound); fixed-point multiply keeps it portable
  std::uint64_t next_below(std::uint64_t bound) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace tsfract
