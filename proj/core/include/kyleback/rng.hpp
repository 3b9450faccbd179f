#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace kyleback {

// Philox4x32-10 counter-based generator. Every draw is a pure function of
// (seed, stream, path, step), so results do not depend on thread scheduling.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream) noexcept : seed_(seed), stream_(stream) {}

  // Two independent standard normals from one block (Box-Muller).
  std::pair<double, double> normal_pair(std::uint64_t path, std::uint32_t step) const noexcept;
  // Two independent uniforms on (0, 1).
  std::pair<double, double> uniform_pair(std::uint64_t path, std::uint32_t step) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint32_t stream() const noexcept { return stream_; }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t path, std::uint32_t step) const noexcept;

  std::uint64_t seed_;
  std::uint32_t stream_;
};

// Stream tags. Shocks of the forward system share one tag so that the zero
// strategy reproduces the reference simulation bit for bit.
namespace streams {
inline constexpr std::uint32_t shocks = 1;
inline constexpr std::uint32_t prior = 2;
inline constexpr std::uint32_t particles = 3;
inline constexpr std::uint32_t resampling = 4;
inline constexpr std::uint32_t law_sampling = 5;
inline constexpr std::uint32_t terminal_value = 6;
}  // namespace streams

// Derives a child seed from a master seed and a stage label (FNV-1a mix).
std::uint64_t derive_seed(std::uint64_t master, const char* stage, std::uint64_t index = 0) noexcept;

}  // namespace kyleback
