#pragma once

// Counter-based normal variates.
//
// Every standard normal in the project is a pure function of
// (experiment seed, stream id, replicate index, draw index):
//
//   key     = {seed_lo, seed_hi}
//   counter = {block_lo, block_hi, replicate, stream},  block = draw / 2
//
// One Philox4x32-10 block yields two 52-bit uniforms u1 in (0,1], u2 in [0,1)
// and Box-Muller turns them into draws 2*block (cosine) and 2*block+1 (sine).
// The log/sin/cos used by Box-Muller are fixed polynomial evaluations shared by
// the scalar and SIMD paths, so every ISA produces bit-identical variates.

#include <array>
#include <cstdint>
#include <span>

namespace shelab {

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr int kRounds = 10;

  static constexpr Counter block(Counter c, Key k) noexcept {
    for (int r = 0; r < kRounds; ++r) {
      if (r > 0) {
        k[0] += kWeyl0;
        k[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }
    return c;
  }
};

/// Identifies one independent stream of normal variates.
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::uint32_t replicate = 0;

  friend bool operator==(const NoiseKey&, const NoiseKey&) = default;
};

/// Fills `out` with draws first, first+1, ... of the stream `key`.
/// Uses the active SIMD kernel table.
void fill_normals(const NoiseKey& key, std::uint64_t first, std::span<double> out);

/// Single draw (scalar path); equal bit-for-bit to the corresponding entry of fill_normals.
double normal_at(const NoiseKey& key, std::uint64_t index);

/// Sequential reader over a NoiseKey stream, buffering blocks of draws.
class NormalStream {
 public:
  explicit NormalStream(NoiseKey key, std::uint64_t first = 0) : key_(key), next_(first) {}

  double next();
  void fill(std::span<double> out);

  const NoiseKey& key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return next_ - (buffered_ - pos_); }

 private:
  NoiseKey key_;
  std::uint64_t next_;
  std::array<double, 256> buf_{};
  std::size_t buffered_ = 0;
  std::size_t pos_ = 0;
};

}  // namespace shelab
