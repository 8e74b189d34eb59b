#include "turnover/rng.hpp"

#include <cmath>
#include <numbers>

#include "turnover/error.hpp"

namespace turnover {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = std::uint64_t{a} * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::array<std::uint64_t, 2> block(const RngKey& key, std::uint64_t index) noexcept {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
       static_cast<std::uint32_t>(key.stream), static_cast<std::uint32_t>(key.stream >> 32)},
      {static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)});
  return {std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32),
          std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ (mix64(b) + 0x632BE59BD9B4E019ull + (a << 6) + (a >> 2)));
}

Wide wide_multiply(std::uint64_t a, std::uint64_t b) noexcept {
  const std::uint64_t a_lo = a & 0xFFFFFFFFu, a_hi = a >> 32;
  const std::uint64_t b_lo = b & 0xFFFFFFFFu, b_hi = b >> 32;
  const std::uint64_t ll = a_lo * b_lo;
  const std::uint64_t lh = a_lo * b_hi;
  const std::uint64_t hl = a_hi * b_lo;
  const std::uint64_t hh = a_hi * b_hi;
  const std::uint64_t mid = (ll >> 32) + (lh & 0xFFFFFFFFu) + (hl & 0xFFFFFFFFu);
  return {hh + (lh >> 32) + (hl >> 32) + (mid >> 32), (mid << 32) | (ll & 0xFFFFFFFFu)};
}

void uniform_block(const RngKey& key, std::uint64_t counter, std::span<double> out) noexcept {
  std::size_t j = 0;
  for (std::uint64_t b = counter; j < out.size(); ++b) {
    const auto lanes = block(key, b);
    out[j++] = to_unit(lanes[0]);
    if (j < out.size()) out[j++] = to_unit(lanes[1]);
  }
}

std::vector<double> uniform_block(const RngKey& key, std::uint64_t counter, std::size_t n) {
  std::vector<double> out(n);
  uniform_block(key, counter, out);
  return out;
}

namespace streams {

std::uint64_t mask(std::uint64_t instance_id, std::size_t layer) {
  if (instance_id > kMaxInstanceId) {
    throw ConfigError("instance id " + std::to_string(instance_id) + " exceeds the mask id range");
  }
  if (layer >= kMaxMaskedLayers) {
    throw ConfigError("at most " + std::to_string(kMaxMaskedLayers) + " masked layers supported");
  }
  return (instance_id << 8) | static_cast<std::uint64_t>(layer);
}

}  // namespace streams

std::uint64_t CounterRng::next_u64() noexcept {
  if (lane_ == 2) {
    lanes_ = block(key_, counter_++);
    lane_ = 0;
  }
  return lanes_[static_cast<std::size_t>(lane_++)];
}

double CounterRng::uniform() noexcept { return to_unit(next_u64()); }

double CounterRng::normal() noexcept {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection.
  Wide m = wide_multiply(next_u64(), n);
  if (m.lo < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (m.lo < threshold) m = wide_multiply(next_u64(), n);
  }
  return m.hi;
}

}  // namespace turnover
