#include "eddynet/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eddynet/error.hpp"

namespace eddynet {

CrackProfile CrackProfile::from_cells(int rows, int cols, std::span<const std::uint8_t> cells) {
  if (rows != kProfileRows || cols != kProfileCols ||
      cells.size() != static_cast<std::size_t>(kProfileCells)) {
    throw Error(ErrorCategory::shape, "crack profile must be 40x12, got " + std::to_string(rows) +
                                          "x" + std::to_string(cols));
  }
  CrackProfile p;
  for (int idx = 0; idx < kProfileCells; ++idx) {
    if (cells[idx] > 1) {
      throw Error(ErrorCategory::invalid_argument, "crack profile cells must be 0 or 1");
    }
    p.cells_[idx] = cells[idx];
  }
  return p;
}

int CrackProfile::count_ones() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

ResponseMaps::ResponseMaps() {
  for (auto& v : values) v.assign(kScanCells, Complex{0.0, 0.0});
}

void SimConfig::validate() const {
  const auto& d = skin_depths_cells;
  if (!(d[0] > d[1] && d[1] > d[2] && d[2] > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "skin depths must satisfy d1 > d2 > d3 > 0");
  }
  if (crack_x_begin < 0 || crack_x_end > kScanRows || crack_x_begin >= crack_x_end) {
    throw Error(ErrorCategory::invalid_argument, "crack x extent must lie within [0, 40)");
  }
  if (!(sigma_x_cells > 0.0) || !(sigma_y_cells > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "coupling widths must be positive");
  }
  if (!(gamma >= 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "gamma must be non-negative");
  }
}

SimConfig default_sim_config(double gamma) {
  SimConfig cfg;
  cfg.gamma = gamma;
  cfg.calibration = calibrate(cfg);
  return cfg;
}

CrackProfile generate_raw_profile(RngState& s) {
  CrackProfile p;
  for (int m = 0; m < kProfileRows; ++m) {
    for (int n = 0; n < kProfileCols; ++n) {
      p.set(m, n, static_cast<std::uint8_t>(next_u64(s) >> 63));
    }
  }
  return p;
}

CrackProfile median_filter_3x3(const CrackProfile& p) {
  CrackProfile out;
  for (int m = 0; m < kProfileRows; ++m) {
    for (int n = 0; n < kProfileCols; ++n) {
      int window = 0;
      int ones = 0;
      for (int dm = -1; dm <= 1; ++dm) {
        for (int dn = -1; dn <= 1; ++dn) {
          const int mm = m + dm;
          const int nn = n + dn;
          if (mm < 0 || mm >= kProfileRows || nn < 0 || nn >= kProfileCols) continue;
          ++window;
          ones += p.at(mm, nn);
        }
      }
      if (2 * ones > window) {
        out.set(m, n, 1);
      } else if (2 * ones < window) {
        out.set(m, n, 0);
      } else {
        out.set(m, n, p.at(m, n));
      }
    }
  }
  return out;
}

double shadow_factor(const CrackProfile& p, int m, int n, double gamma) {
  int above = 0;
  for (int up = 0; up < n; ++up) above += p.at(m, up);
  return std::exp(-gamma * above);
}

namespace {

// exp(-2(1+i) z / delta) at the cell-center depth z = n + 0.5.
Complex depth_kernel(int n, double delta) {
  const double a = 2.0 * (n + 0.5) / delta;
  return std::exp(Complex{-a, -a});
}

double lateral_kernel(int j, int m, double sigma) {
  const double d = static_cast<double>(j - m);
  return std::exp(-d * d / (2.0 * sigma * sigma));
}

double footprint(int i, const SimConfig& cfg) {
  double acc = 0.0;
  for (int u = cfg.crack_x_begin; u < cfg.crack_x_end; ++u) {
    acc += lateral_kernel(i, u, cfg.sigma_x_cells);
  }
  return acc;
}

}  // namespace

Complex cell_contribution(const CrackProfile& p, int m, int n, int k, int i, int j,
                          const SimConfig& cfg) {
  return footprint(i, cfg) * shadow_factor(p, m, n, cfg.gamma) *
         depth_kernel(n, cfg.skin_depths_cells[k]) * lateral_kernel(j, m, cfg.sigma_y_cells);
}

ResponseMaps forward_operate(const CrackProfile& p, const SimConfig& cfg) {
  cfg.validate();
  ResponseMaps out;

  std::array<double, kScanRows> ax{};
  for (int i = 0; i < kScanRows; ++i) ax[i] = footprint(i, cfg);

  std::array<double, kProfileRows * kScanCols> gy{};
  for (int m = 0; m < kProfileRows; ++m) {
    for (int j = 0; j < kScanCols; ++j) gy[m * kScanCols + j] = lateral_kernel(j, m, cfg.sigma_y_cells);
  }

  // Per-row column weights: shadow(m, n) * depth kernel, summed over crack cells.
  for (int k = 0; k < kFrequencies; ++k) {
    std::array<Complex, kProfileRows> row_weight{};
    for (int m = 0; m < kProfileRows; ++m) {
      int above = 0;
      Complex acc{0.0, 0.0};
      for (int n = 0; n < kProfileCols; ++n) {
        if (p.at(m, n)) {
          acc += std::exp(-cfg.gamma * above) * depth_kernel(n, cfg.skin_depths_cells[k]);
          ++above;
        }
      }
      row_weight[m] = acc;
    }
    std::array<Complex, kScanCols> sy{};
    for (int j = 0; j < kScanCols; ++j) {
      Complex acc{0.0, 0.0};
      for (int m = 0; m < kProfileRows; ++m) acc += row_weight[m] * gy[m * kScanCols + j];
      sy[j] = acc;
    }
    const Complex scale = -cfg.calibration[k];
    for (int i = 0; i < kScanRows; ++i) {
      for (int j = 0; j < kScanCols; ++j) out.at(k, i, j) = scale * ax[i] * sy[j];
    }
  }
  out.frequencies_hz = cfg.frequencies_hz;
  return out;
}

ResponseMaps forward_operate(int rows, int cols, std::span<const std::uint8_t> cells,
                             const SimConfig& cfg) {
  return forward_operate(CrackProfile::from_cells(rows, cols, cells), cfg);
}

std::array<double, kFrequencies> calibration_peaks(const SimConfig& cfg) {
  SimConfig raw = cfg;
  raw.gamma = 0.0;
  raw.calibration = {Complex{1.0}, Complex{1.0}, Complex{1.0}};
  CrackProfile ones;
  for (int m = 0; m < kProfileRows; ++m)
    for (int n = 0; n < kProfileCols; ++n) ones.set(m, n, 1);
  const ResponseMaps maps = forward_operate(ones, raw);
  std::array<double, kFrequencies> peaks{};
  for (int k = 0; k < kFrequencies; ++k) {
    double best = 0.0;
    for (const Complex& z : maps.values[k]) best = std::max(best, std::abs(z));
    peaks[k] = best;
  }
  return peaks;
}

std::array<Complex, kFrequencies> calibrate(const SimConfig& cfg) {
  const auto peaks = calibration_peaks(cfg);
  std::array<Complex, kFrequencies> c{};
  for (int k = 0; k < kFrequencies; ++k) c[k] = Complex{1.0 / peaks[k], 0.0};
  return c;
}

}  // namespace eddynet
