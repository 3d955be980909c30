#ifndef CTC_RNG_HPP
#define CTC_RNG_HPP

#include <cstdint>
#include <limits>

namespace ctc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256**; satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  explicit Xoshiro256(std::uint64_t seed = 1) {
    for (auto& w : s_) w = splitmix64(seed);
  }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    const std::uint64_t out = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }
  // Uniform on (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Independent stream for path `path`; results do not depend on evaluation order.
inline Xoshiro256 path_stream(std::uint64_t seed, std::uint64_t path) {
  std::uint64_t st = seed ^ 0x5851f42d4c957f2dULL;
  const std::uint64_t a = splitmix64(st);
  std::uint64_t st2 = path + 0x632be59bd9b4e019ULL * (a | 1ULL);
  const std::uint64_t key = splitmix64(st2) ^ a;
  return Xoshiro256(key);
}

}  // namespace ctc

#endif
