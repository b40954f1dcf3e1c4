#pragma once

#include <cstdint>
#include <random>

#include "intradyne/types.hpp"

namespace intradyne {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-block streams
/// from one master seed so that parallel runs stay reproducible.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return Rng{derive_seed(master, stream, index)};
}

/// Circular complex Gaussian with the given variance per quadrature.
inline cplx complex_gaussian(Rng& rng, double var_per_quadrature) {
  std::normal_distribution<double> n(0.0, std::sqrt(var_per_quadrature));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

// Stream identifiers for derive_seed.
namespace streams {
inline constexpr std::uint64_t channel = 1;
inline constexpr std::uint64_t receiver = 2;
inline constexpr std::uint64_t shot_calibration = 3;
inline constexpr std::uint64_t elec_calibration = 4;
inline constexpr std::uint64_t delay = 5;
}  // namespace streams

}  // namespace intradyne
