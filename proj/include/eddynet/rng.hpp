#pragma once

#include <cstdint>

namespace eddynet {

/// SplitMix64 generator state. A plain value: copying it forks the stream.
struct RngState {
  std::uint64_t state = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

std::uint64_t next_u64(RngState& s);

/// Uniform double in [0, 1) with 53 bits of resolution.
double next_unit(RngState& s);

/// Standard normal via Box-Muller (cosine branch only).
double next_gaussian(RngState& s);

/// Independent per-index stream, so sample i can be generated without
/// touching samples 0..i-1.
RngState derive_stream(std::uint64_t seed, std::uint64_t index);

/// Helpers exposed for the closed-form checks on the unit/gaussian maps.
double unit_from_bits(std::uint64_t bits);
double box_muller(double u1, double u2);

}  // namespace eddynet
