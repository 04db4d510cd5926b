#pragma once

#include <array>
#include <cstdint>

namespace shoal {

/// Named stream ids. Each consumer of randomness owns one stream so that
/// changing how one part draws numbers never shifts another part's sequence.
enum class Stream : std::uint64_t {
  Environment = 1,
  PolicySampling = 2,
  MinibatchShuffle = 3,
  WeightInit = 4,
  EvalEnvironment = 5,
  EvalPolicy = 6,
  Clustering = 7,
  SessionFish = 8,
  SessionPolicy = 9,
  SessionClustering = 10,
};

/// Counter-based generator (Philox4x32-10). The key is the seed, the upper
/// half of the counter is the stream id, the lower half counts blocks.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}
  Rng(std::uint64_t seed, Stream stream) noexcept : Rng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller (no cached second value, so state is just the counter).
  double normal() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t blocks_consumed() const noexcept { return block_; }

  friend bool operator==(const Rng&, const Rng&) = default;

  /// Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                                    std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned used_ = 4;
};

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream_id) noexcept { return Rng(seed, stream_id); }
inline Rng make_rng(std::uint64_t seed, Stream stream) noexcept { return Rng(seed, stream); }

}  // namespace shoal
