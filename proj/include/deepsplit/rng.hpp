#pragma once
// Counter-based random number generation (Philox4x32-10) with hierarchical
// stream derivation. One root seed yields independent substreams keyed by
// integer tags; within a stream, draws are addressed by (element, step)
// counters, so any partition of the work across workers reproduces the
// values of a serial run.

#include <array>
#include <cstdint>
#include <span>

namespace deepsplit::rng {

struct Counter {
  std::uint32_t w0 = 0;
  std::uint32_t w1 = 0;
  std::uint32_t w2 = 0;
  std::uint32_t w3 = 0;
};

/// One Philox4x32 block with 10 rounds: 128 counter bits -> 128 output bits.
std::array<std::uint32_t, 4> philox4x32(Counter ctr, std::uint64_t key) noexcept;

/// SplitMix64 finalizer; bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Purpose tags keep substreams for different uses disjoint.
enum class Purpose : std::uint64_t {
  run = 1,        // per-experiment-run root
  init = 2,       // network parameter initialization, keyed by time step n
  paths = 3,      // path batches, keyed by (n, m)
  start = 4,      // start-point sampling
  oracle = 5,     // Monte Carlo reference solvers
  scratch = 6,    // tests and ad-hoc draws
};

struct Stream {
  std::uint64_t key = 0;

  Stream child(std::uint64_t tag) const noexcept {
    return {mix64(key + mix64(tag + 0x9E3779B97F4A7C15ULL))};
  }
  Stream child(Purpose p, std::uint64_t a = 0, std::uint64_t b = 0) const noexcept {
    return child(static_cast<std::uint64_t>(p)).child(a).child(b);
  }
  friend bool operator==(const Stream&, const Stream&) = default;
};

/// Two U[0,1) doubles (53-bit) from one Philox block.
std::array<double, 2> uniform_block(const Stream& s, Counter ctr) noexcept;

/// Two N(0,1) doubles (Box-Muller) from one Philox block.
std::array<double, 2> normal_block(const Stream& s, Counter ctr) noexcept;

/// Fills `out` with i.i.d. N(0,1), addressed by (elem, step). The value at
/// position i depends only on (stream, elem, step, i).
void fill_normals(const Stream& s, std::uint32_t elem, std::uint32_t step,
                  std::span<double> out) noexcept;

/// Same addressing for U[0,1) draws.
void fill_uniforms(const Stream& s, std::uint32_t elem, std::uint32_t step,
                   std::span<double> out) noexcept;

/// Sequential generator over a stream, for consumers that want a plain
/// draw-by-draw interface (initialization, Monte Carlo oracles).
class SequenceGen {
 public:
  explicit SequenceGen(Stream s) : stream_(s) {}

  double next_uniform();  // U[0,1)
  double next_normal();   // N(0,1)

 private:
  Counter next_counter() noexcept;

  Stream stream_;
  std::uint64_t block_ = 0;
  double pending_ = 0.0;
  bool has_pending_ = false;
  bool pending_is_normal_ = false;
};

}  // namespace deepsplit::rng
