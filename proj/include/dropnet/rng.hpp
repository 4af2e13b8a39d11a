#pragma once

#include <cstdint>
#include <cmath>

namespace dropnet::rng {

// SplitMix64 finalizer. All randomness in the library is counter-based:
// a value is a pure function of (seed, stream, draw, lane), so parallel
// sampling is order-independent and replays are exact.
constexpr std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t w) {
  return splitmix(h ^ (w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

struct Source {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  // Derived independent sub-stream.
  constexpr Source sub(std::uint64_t s) const { return {seed, absorb(stream, s)}; }
};

inline std::uint64_t value(const Source& s, std::uint64_t draw, std::uint64_t lane) {
  std::uint64_t h = splitmix(s.seed);
  h = absorb(h, s.stream);
  h = absorb(h, draw);
  h = absorb(h, lane);
  return h;
}

// Uniform in [0, 1).
inline double unit(const Source& s, std::uint64_t draw, std::uint64_t lane) {
  return static_cast<double>(value(s, draw, lane) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; uses an internal sub-stream so lanes do
// not collide with unit() lanes of the same source.
inline double normal(const Source& s, std::uint64_t draw, std::uint64_t lane) {
  const Source g = s.sub(0x6e6f726d616cULL);
  const double u1 = 1.0 - unit(g, draw, 2 * lane);      // (0, 1]
  const double u2 = unit(g, draw, 2 * lane + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Stateful convenience wrapper for code that just wants a stream of draws.
class Sequence {
 public:
  explicit Sequence(Source s) : src_(s) {}
  double unit() { return rng::unit(src_, next_++, 0); }
  double normal() { return rng::normal(src_, next_++, 0); }
  std::uint64_t u64() { return rng::value(src_, next_++, 0); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  Source src_;
  std::uint64_t next_ = 0;
};

}  // namespace dropnet::rng
