#pragma once

// Counter-based random streams. A stream is identified by (seed, id); draw i of
// a stream is a pure function of (seed, id, i), so parallel tasks reproduce
// their draws regardless of scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsbu {

namespace detail {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Sequential view over one stream. Cheap to copy; copies replay the same draws.
class RandomGenerator {
 public:
  RandomGenerator(std::uint64_t seed, std::uint64_t id) : seed_(seed), id_(id) {}

  std::uint64_t next_u64() {
    if (cached_ == 0) {
      const std::array<std::uint32_t, 4> ctr = {
          static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
          static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)};
      const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                                static_cast<std::uint32_t>(seed_ >> 32)};
      const auto out = detail::philox4x32(ctr, key);
      buffer_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
      buffer_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
      ++block_;
      cached_ = 2;
    }
    return buffer_[2 - cached_--];
  }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    // 52 bits so that the half-step offset stays exactly representable.
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Uniform integer on {0, ..., n-1}.
  std::uint64_t uniform_index(std::uint64_t n) {
    const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int cached_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct RandomStream {
  std::uint64_t seed = 0;
  std::uint64_t id = 0;

  /// Derives an independent sub-stream, e.g. per repeat or per time step.
  RandomStream child(std::uint64_t tag) const {
    return {seed, detail::splitmix64(id ^ detail::splitmix64(tag + 0x632BE59BD9B4E019ull))};
  }

  RandomGenerator generator() const { return {seed, id}; }

  friend bool operator==(const RandomStream&, const RandomStream&) = default;
};

}  // namespace bsbu
