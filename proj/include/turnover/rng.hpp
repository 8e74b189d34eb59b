#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so any block can be produced without
// generating the ones before it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace turnover {

struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  bool operator==(const RngKey&) const = default;
};

/// Philox4x32 with 10 rounds.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Strong 64-bit finalizer (splitmix64).
std::uint64_t mix64(std::uint64_t x) noexcept;

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept;

/// High and low halves of the 128-bit product a * b.
struct Wide {
  std::uint64_t hi;
  std::uint64_t lo;
};
Wide wide_multiply(std::uint64_t a, std::uint64_t b) noexcept;

/// Draw n doubles in [0, 1). The counter counts 128-bit blocks: element j
/// comes from block (counter + j / 2), so block i never depends on blocks < i.
void uniform_block(const RngKey& key, std::uint64_t counter, std::span<double> out) noexcept;
std::vector<double> uniform_block(const RngKey& key, std::uint64_t counter, std::size_t n);

/// Stream tags. Mask streams keep the top bit clear; everything else sets it.
namespace streams {
inline constexpr std::uint64_t kTagged = std::uint64_t{1} << 63;
inline constexpr std::uint64_t kInit = kTagged | (std::uint64_t{1} << 48);
inline constexpr std::uint64_t kShuffle = kTagged | (std::uint64_t{2} << 48);
inline constexpr std::uint64_t kCodebook = kTagged | (std::uint64_t{3} << 48);
inline constexpr std::uint64_t kSynthetic = kTagged | (std::uint64_t{4} << 48);
inline constexpr std::uint64_t kLabelNoise = kTagged | (std::uint64_t{5} << 48);
inline constexpr std::uint64_t kRandomRemoval = kTagged | (std::uint64_t{6} << 48);
inline constexpr std::uint64_t kSplit = kTagged | (std::uint64_t{7} << 48);
inline constexpr std::uint64_t kHash = kTagged | (std::uint64_t{8} << 48);

inline constexpr std::size_t kMaxMaskedLayers = 256;
inline constexpr std::uint64_t kMaxInstanceId = (std::uint64_t{1} << 55) - 1;

/// (instance id, layer) packed into a mask stream.
std::uint64_t mask(std::uint64_t instance_id, std::size_t layer);
}  // namespace streams

/// Sequential reader over one key. Holds only a counter and a two-lane buffer.
class CounterRng {
 public:
  explicit CounterRng(RngKey key) noexcept : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : key_{seed, stream} {}

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  RngKey key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> lanes_{};
  int lane_ = 2;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace turnover
