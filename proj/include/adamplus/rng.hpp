#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "adamplus/error.hpp"

namespace adamplus {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

// Counter-based generator: every draw is a pure function of
// (seed, stream_id, position), so a run replays bitwise on any thread and
// parallel workers stay independent by taking distinct stream ids.
// Streams use the SplitMix64 split construction: a hashed start state plus a
// per-stream odd gamma.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed),
        stream_id_(stream_id),
        state_(detail::mix64(seed + detail::mix64(stream_id + detail::kGolden))),
        gamma_(detail::mix64(detail::mix64(stream_id + 1) ^ seed) | 1ull) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // Fresh stream over the same seed; independent of this one for any
  // distinct new_stream_id.
  RngStream split(std::uint64_t new_stream_id) const { return RngStream(seed_, new_stream_id); }

  std::uint64_t next_u64() noexcept {
    state_ += gamma_;
    return detail::mix64(state_);
  }

  // Uniform double in [0, 1).
  double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps the log finite
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n) without modulo bias (Lemire's method).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) fail(Errc::InvalidArgument, "next_below: bound must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t gamma_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace adamplus
