#include "eddynet/rng.hpp"

#include <cmath>
#include <numbers>

namespace eddynet {

std::uint64_t next_u64(RngState& s) {
  s.state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s.state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double next_unit(RngState& s) { return unit_from_bits(next_u64(s)); }

double box_muller(double u1, double u2) {
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double next_gaussian(RngState& s) {
  double u1 = next_unit(s);
  while (u1 == 0.0) u1 = next_unit(s);
  const double u2 = next_unit(s);
  return box_muller(u1, u2);
}

RngState derive_stream(std::uint64_t seed, std::uint64_t index) {
  RngState raw{seed ^ (index * 0xA24BAED4963EE407ULL)};
  return RngState{next_u64(raw)};
}

}  // namespace eddynet
