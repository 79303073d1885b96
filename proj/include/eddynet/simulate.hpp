#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "eddynet/rng.hpp"

namespace eddynet {

inline constexpr int kProfileRows = 40;   // y
inline constexpr int kProfileCols = 12;   // z (depth), 0 = surface
inline constexpr int kProfileCells = kProfileRows * kProfileCols;
inline constexpr int kScanRows = 40;      // scan x
inline constexpr int kScanCols = 40;      // scan y
inline constexpr int kScanCells = kScanRows * kScanCols;
inline constexpr int kFrequencies = 3;

/// Binary crack cross-section on a 40x12 (y, depth) grid.
class CrackProfile {
 public:
  CrackProfile() { cells_.fill(0); }

  /// Validating constructor; throws Error{shape} on wrong dimensions and
  /// Error{invalid_argument} on non-binary cells.
  static CrackProfile from_cells(int rows, int cols, std::span<const std::uint8_t> cells);

  std::uint8_t at(int m, int n) const { return cells_[m * kProfileCols + n]; }
  void set(int m, int n, std::uint8_t v) { cells_[m * kProfileCols + n] = v ? 1 : 0; }
  const std::array<std::uint8_t, kProfileCells>& cells() const { return cells_; }
  int count_ones() const;

  friend bool operator==(const CrackProfile&, const CrackProfile&) = default;

 private:
  std::array<std::uint8_t, kProfileCells> cells_;
};

using Complex = std::complex<double>;

/// Complex impedance variation per (frequency k, scan-x i, scan-y j).
struct ResponseMaps {
  std::array<std::vector<Complex>, kFrequencies> values;
  std::array<double, kFrequencies> frequencies_hz{};

  ResponseMaps();
  Complex at(int k, int i, int j) const { return values[k][i * kScanCols + j]; }
  Complex& at(int k, int i, int j) { return values[k][i * kScanCols + j]; }
};

/// Surrogate forward-model constants, in depth-cell units.
struct SimConfig {
  std::array<double, kFrequencies> skin_depths_cells{6.0, 3.0, 1.5};
  double sigma_y_cells = 3.0;
  double sigma_x_cells = 3.0;
  int crack_x_begin = 10;
  int crack_x_end = 30;
  double gamma = 0.15;
  std::array<Complex, kFrequencies> calibration{Complex{1.0}, Complex{1.0}, Complex{1.0}};
  /// Nominal excitation frequencies. Metadata only; the kernel works in
  /// skin-depth units and the values are unknown, so they default to 0.
  std::array<double, kFrequencies> frequencies_hz{};

  /// Throws Error{invalid_argument} when the ordering or extent constraints fail.
  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Default constants with calibration filled in.
SimConfig default_sim_config(double gamma = 0.15);

CrackProfile generate_raw_profile(RngState& s);

/// Clipped-window 3x3 majority filter; ties (border windows only) keep the center.
CrackProfile median_filter_3x3(const CrackProfile& p);

/// Separable evaluation of the surrogate kernel.
ResponseMaps forward_operate(const CrackProfile& p, const SimConfig& cfg);

/// Unvalidated-grid entry point: rejects anything that is not 40x12.
ResponseMaps forward_operate(int rows, int cols, std::span<const std::uint8_t> cells,
                             const SimConfig& cfg);

/// Peak |raw dZ_k| of the all-ones profile at gamma = 0, C_k = 1.
std::array<double, kFrequencies> calibration_peaks(const SimConfig& cfg);

/// C_k = 1 / peak_k.
std::array<Complex, kFrequencies> calibrate(const SimConfig& cfg);

/// Shadowing attenuation exp(-gamma * #crack cells above (m, n) in the same column).
double shadow_factor(const CrackProfile& p, int m, int n, double gamma);

/// Complex per-cell term for one crack cell at (m, n), frequency k, scan (i, j),
/// excluding C_k and the minus sign. Exposed for the monotonicity checks.
Complex cell_contribution(const CrackProfile& p, int m, int n, int k, int i, int j,
                          const SimConfig& cfg);

}  // namespace eddynet
