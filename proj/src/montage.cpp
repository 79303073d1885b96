#include "eddynet/montage.hpp"

#include <fstream>
#include <sstream>

#include "eddynet/error.hpp"

namespace eddynet {

namespace {

GrayImage blank_grid() {
  GrayImage img;
  img.rows = kMontageTileRows * kProfileRows + (kMontageTileRows - 1) * kMontageGap;
  img.cols = kMontageTileCols * kProfileCols + (kMontageTileCols - 1) * kMontageGap;
  img.pixels.assign(static_cast<std::size_t>(img.rows) * img.cols, kMontageSeparator);
  return img;
}

void paint_tile(GrayImage& img, int tile, const CrackProfile& p) {
  const int r0 = (tile / kMontageTileCols) * (kProfileRows + kMontageGap);
  const int c0 = (tile % kMontageTileCols) * (kProfileCols + kMontageGap);
  for (int m = 0; m < kProfileRows; ++m) {
    for (int n = 0; n < kProfileCols; ++n) {
      img.pixels[static_cast<std::size_t>(r0 + m) * img.cols + c0 + n] = p.at(m, n) ? 255 : 0;
    }
  }
}

}  // namespace

GrayImage make_montage(const std::vector<CrackProfile>& profiles) {
  if (profiles.size() > static_cast<std::size_t>(kMontageTiles)) {
    throw Error(ErrorCategory::invalid_argument, "montage holds at most 32 profiles");
  }
  GrayImage img = blank_grid();
  for (int t = 0; t < kMontageTiles; ++t) {
    paint_tile(img, t, t < static_cast<int>(profiles.size()) ? profiles[t] : CrackProfile{});
  }
  return img;
}

GrayImage make_error_montage(const std::vector<CrackProfile>& pred,
                             const std::vector<CrackProfile>& truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCategory::shape, "error montage needs equally many predictions and truths");
  }
  std::vector<CrackProfile> diff(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (int m = 0; m < kProfileRows; ++m)
      for (int n = 0; n < kProfileCols; ++n) diff[i].set(m, n, pred[i].at(m, n) != truth[i].at(m, n));
  }
  return make_montage(diff);
}

GrayImage profile_image(const CrackProfile& p) {
  GrayImage img;
  img.rows = kProfileRows;
  img.cols = kProfileCols;
  img.pixels.resize(kProfileCells);
  for (int idx = 0; idx < kProfileCells; ++idx) img.pixels[idx] = p.cells()[idx] ? 255 : 0;
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot open " + path + " for writing");
  out << "P5\n" << img.cols << " " << img.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error(ErrorCategory::io, "write failure on " + path);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path + " for reading");
  std::string magic;
  int maxval = 0;
  GrayImage img;
  in >> magic >> img.cols >> img.rows >> maxval;
  if (magic != "P5") throw Error(ErrorCategory::bad_magic, "not a binary PGM: " + path);
  if (maxval != 255 || img.rows <= 0 || img.cols <= 0) {
    throw Error(ErrorCategory::invalid_argument, "unsupported PGM header in " + path);
  }
  in.get();
  img.pixels.resize(static_cast<std::size_t>(img.rows) * img.cols);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw Error(ErrorCategory::truncated, "truncated PGM payload in " + path);
  }
  return img;
}

}  // namespace eddynet
