#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace modlab {

// Philox4x32-10 counter-based generator. The stream is a pure function of
// (seed, stream id, counter), so any draw can be reproduced without
// replaying earlier ones and independent streams never share state.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "philox4x32-10";

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::string_view algorithm() const noexcept { return kAlgorithm; }

  // Independent generator keyed on the same seed.
  SeededRng substream(std::uint64_t stream) const noexcept { return SeededRng(seed_, stream); }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound), unbiased.
  std::uint64_t below(std::uint64_t bound) noexcept;
  double normal() noexcept;

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                             std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace modlab
