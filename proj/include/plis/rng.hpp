#pragma once

#include <cmath>
#include <cstdint>

namespace plis {

// Philox 4x32-10 counter-based generator (Salmon et al. 2011 parameters).
// The seed is the key; the 128-bit counter is split into a 64-bit stream id
// (upper half) and a 64-bit block index (lower half), so distinct streams of
// the same seed can never overlap. State is two words plus a small buffer,
// which keeps per-chain reproducibility trivial: a chain is identified by
// (seed, stream) and nothing else.
class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    if (pos_ == 2) {
      fill_block();
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  // 53-bit uniform strictly inside (0,1); never 0 or 1, so logs are safe.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller with a fixed two-uniform consumption per call (the sine
  // partner is discarded) so the draw sequence is position-independent.
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  std::uint64_t seed() const {
    return static_cast<std::uint64_t>(key1_) << 32 | key0_;
  }
  std::uint64_t stream() const { return stream_; }

  // Raw one-block evaluation, exposed for the known-answer tests.
  static void block(const std::uint32_t ctr[4], const std::uint32_t key[2],
                    std::uint32_t out[4]) {
    std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
      }
      const std::uint64_t p0 = 0xD2511F53ull * c0;
      const std::uint64_t p1 = 0xCD9E8D57ull * c2;
      const std::uint32_t n0 =
          static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
      const std::uint32_t n1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n2 =
          static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
      const std::uint32_t n3 = static_cast<std::uint32_t>(p0);
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
  }

 private:
  void fill_block() {
    const std::uint32_t ctr[4] = {
        static_cast<std::uint32_t>(index_),
        static_cast<std::uint32_t>(index_ >> 32),
        static_cast<std::uint32_t>(stream_),
        static_cast<std::uint32_t>(stream_ >> 32)};
    const std::uint32_t key[2] = {key0_, key1_};
    std::uint32_t out[4];
    block(ctr, key, out);
    buf_[0] = static_cast<std::uint64_t>(out[1]) << 32 | out[0];
    buf_[1] = static_cast<std::uint64_t>(out[3]) << 32 | out[2];
    ++index_;
  }

  std::uint32_t key0_, key1_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::uint64_t buf_[2] = {0, 0};
  int pos_ = 2;
};

}  // namespace plis
