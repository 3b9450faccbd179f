#include "kyleback/rng.hpp"

#include <cmath>
#include <numbers>

#include "kyleback/errors.hpp"

namespace kyleback {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::assumption_violated: return "assumption-violated";
    case ErrorKind::out_of_domain: return "out-of-domain";
    case ErrorKind::singular_covariance: return "singular-covariance";
    case ErrorKind::improper_conditioning: return "improper-conditioning";
    case ErrorKind::degenerate_phi: return "degenerate-phi";
    case ErrorKind::insufficient_sample: return "insufficient-sample";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::compatibility_violated: return "compatibility-violated";
    case ErrorKind::blow_up: return "blow-up";
    case ErrorKind::solver_diverged: return "solver-diverged";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform on the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11)) & ((1ull << 53) - 1);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t path, std::uint32_t step) const noexcept {
  return philox4x32({step, stream_, static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)},
                    {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
}

std::pair<double, double> CounterRng::uniform_pair(std::uint64_t path, std::uint32_t step) const noexcept {
  const auto r = block(path, step);
  return {to_open_unit(r[0], r[1]), to_open_unit(r[2], r[3])};
}

std::pair<double, double> CounterRng::normal_pair(std::uint64_t path, std::uint32_t step) const noexcept {
  const auto [u1, u2] = uniform_pair(path, step);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

std::uint64_t derive_seed(std::uint64_t master, const char* stage, std::uint64_t index) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  for (int i = 0; i < 8; ++i) mix((master >> (8 * i)) & 0xff);
  for (const char* p = stage; *p != '\0'; ++p) mix(static_cast<unsigned char>(*p));
  for (int i = 0; i < 8; ++i) mix((index >> (8 * i)) & 0xff);
  return h;
}

}  // namespace kyleback
