#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eddynet/simulate.hpp"

namespace eddynet {

inline constexpr int kMontageTileRows = 4;
inline constexpr int kMontageTileCols = 8;
inline constexpr int kMontageTiles = kMontageTileRows * kMontageTileCols;
inline constexpr int kMontageGap = 2;
inline constexpr std::uint8_t kMontageSeparator = 128;

struct GrayImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
};

/// 4x8 grid of 40x12 tiles (0 -> black, 1 -> white) with 2-pixel gray
/// separators. Fewer than 32 profiles are padded with blank tiles; more are rejected.
GrayImage make_montage(const std::vector<CrackProfile>& profiles);

/// Same grid of |pred - truth|: white marks a wrong pixel.
GrayImage make_error_montage(const std::vector<CrackProfile>& pred,
                             const std::vector<CrackProfile>& truth);

/// Single-profile image (40 rows x 12 columns).
GrayImage profile_image(const CrackProfile& p);

/// Binary PGM ("P5", maxval 255).
void write_pgm(const GrayImage& img, const std::string& path);
GrayImage read_pgm(const std::string& path);

}  // namespace eddynet
