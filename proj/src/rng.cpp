#include "deepsplit/rng.hpp"

#include <cmath>
#include <numbers>

namespace deepsplit::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

struct Ctr4 {
  std::uint32_t v[4];
};

inline Ctr4 philox_round(Ctr4 c, std::uint32_t k0, std::uint32_t k1) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c.v[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c.v[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  return {{hi1 ^ c.v[1] ^ k0, lo1, hi0 ^ c.v[3] ^ k1, lo0}};
}

inline std::uint64_t join64(std::uint32_t lo, std::uint32_t hi) noexcept {
  return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
}

// 53-bit uniform in [0,1)
inline double u01(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// 53-bit uniform in (0,1], safe as a log argument
inline double u01_open_below(std::uint64_t x) noexcept {
  return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

inline std::array<double, 2> box_muller(std::uint64_t a, std::uint64_t b) noexcept {
  const double r = std::sqrt(-2.0 * std::log(u01_open_below(a)));
  const double theta = 2.0 * std::numbers::pi * u01(b);
#if defined(__GLIBC__)
  double s, c;
  ::sincos(theta, &s, &c);
  return {r * c, r * s};
#else
  return {r * std::cos(theta), r * std::sin(theta)};
#endif
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(Counter ctr, std::uint64_t key) noexcept {
  Ctr4 c{{ctr.w0, ctr.w1, ctr.w2, ctr.w3}};
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    if (round != 0) {
      k0 += kPhiloxW0;
      k1 += kPhiloxW1;
    }
    c = philox_round(c, k0, k1);
  }
  return {c.v[0], c.v[1], c.v[2], c.v[3]};
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::array<double, 2> uniform_block(const Stream& s, Counter ctr) noexcept {
  const auto w = philox4x32(ctr, s.key);
  return {u01(join64(w[0], w[1])), u01(join64(w[2], w[3]))};
}

std::array<double, 2> normal_block(const Stream& s, Counter ctr) noexcept {
  const auto w = philox4x32(ctr, s.key);
  return box_muller(join64(w[0], w[1]), join64(w[2], w[3]));
}

void fill_normals(const Stream& s, std::uint32_t elem, std::uint32_t step,
                  std::span<double> out) noexcept {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const auto pair =
        normal_block(s, Counter{static_cast<std::uint32_t>(i / 2), step, elem, 0});
    out[i] = pair[0];
    if (i + 1 < n) out[i + 1] = pair[1];
  }
}

void fill_uniforms(const Stream& s, std::uint32_t elem, std::uint32_t step,
                   std::span<double> out) noexcept {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const auto pair =
        uniform_block(s, Counter{static_cast<std::uint32_t>(i / 2), step, elem, 0});
    out[i] = pair[0];
    if (i + 1 < n) out[i + 1] = pair[1];
  }
}

double SequenceGen::next_uniform() {
  if (has_pending_ && !pending_is_normal_) {
    has_pending_ = false;
    return pending_;
  }
  const auto pair = uniform_block(stream_, next_counter());
  pending_ = pair[1];
  has_pending_ = true;
  pending_is_normal_ = false;
  return pair[0];
}

double SequenceGen::next_normal() {
  if (has_pending_ && pending_is_normal_) {
    has_pending_ = false;
    return pending_;
  }
  const auto pair = normal_block(stream_, next_counter());
  pending_ = pair[1];
  has_pending_ = true;
  pending_is_normal_ = true;
  return pair[0];
}

Counter SequenceGen::next_counter() noexcept {
  const Counter ctr{static_cast<std::uint32_t>(block_),
                    static_cast<std::uint32_t>(block_ >> 32), 0xFFFFFFFFu, 0};
  ++block_;
  return ctr;
}

}  // namespace deepsplit::rng
