#include "eddynet/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <omp.h>

#include "eddynet/binary_io.hpp"
#include "eddynet/error.hpp"

namespace eddynet {

namespace io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCategory::io, "read failure on " + path);
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCategory::io, "write failure on " + path);
}

}  // namespace io

Sample make_sample(std::uint64_t seed, std::uint64_t index, const SimConfig& cfg) {
  RngState s = derive_stream(seed, index);
  Sample out;
  out.profile = median_filter_3x3(generate_raw_profile(s));
  const ResponseMaps maps = forward_operate(out.profile, cfg);
  for (int k = 0; k < kFrequencies; ++k) {
    float* re = out.channels.data() + (2 * k) * kScanCells;
    float* im = out.channels.data() + (2 * k + 1) * kScanCells;
    for (int p = 0; p < kScanCells; ++p) {
      re[p] = static_cast<float>(maps.values[k][p].real());
      im[p] = static_cast<float>(maps.values[k][p].imag());
    }
  }
  return out;
}

Dataset build_dataset(std::size_t n, std::uint64_t seed, const SimConfig& cfg, int workers) {
  if (n < 1) throw Error(ErrorCategory::invalid_argument, "dataset size must be >= 1");
  cfg.validate();
  Dataset d;
  d.seed = seed;
  d.sim_config = cfg;
  d.samples.resize(n);
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::int64_t i = 0; i < count; ++i) {
    d.samples[i] = make_sample(seed, static_cast<std::uint64_t>(i), cfg);
  }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCategory::invalid_argument, "train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(d.size() * train_fraction));
  Dataset train;
  Dataset test;
  for (Dataset* part : {&train, &test}) {
    part->sim_config = d.sim_config;
    part->seed = d.seed;
    part->stats = d.stats;
  }
  train.samples.assign(d.samples.begin(), d.samples.begin() + n_train);
  test.samples.assign(d.samples.begin() + n_train, d.samples.end());
  return {std::move(train), std::move(test)};
}

ChannelStats compute_channel_stats(const Dataset& train) {
  if (train.samples.empty()) {
    throw Error(ErrorCategory::invalid_argument, "channel statistics need a non-empty set");
  }
  ChannelStats st;
  const double count = static_cast<double>(train.size()) * kScanCells;
  for (int c = 0; c < kInputChannels; ++c) {
    double sum = 0.0;
    for (const Sample& s : train.samples) {
      const float* x = s.channels.data() + c * kScanCells;
      for (int p = 0; p < kScanCells; ++p) sum += x[p];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (const Sample& s : train.samples) {
      const float* x = s.channels.data() + c * kScanCells;
      for (int p = 0; p < kScanCells; ++p) {
        const double dx = x[p] - mean;
        sq += dx * dx;
      }
    }
    st.mean[c] = mean;
    st.std[c] = std::sqrt(sq / count);
  }
  return st;
}

template <typename T>
void standardize(const std::vector<float>& channels, const ChannelStats& stats, T* out) {
  for (int c = 0; c < kInputChannels; ++c) {
    const double mean = stats.mean[c];
    const double inv = 1.0 / (stats.std[c] + kStandardizeEps);
    const float* x = channels.data() + c * kScanCells;
    T* y = out + c * kScanCells;
    for (int p = 0; p < kScanCells; ++p) y[p] = static_cast<T>((x[p] - mean) * inv);
  }
}

template void standardize<float>(const std::vector<float>&, const ChannelStats&, float*);
template void standardize<double>(const std::vector<float>&, const ChannelStats&, double*);

namespace {

constexpr char kMagic[4] = {'E', 'C', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& d) {
  io::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(d.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.size()));
  w.put<std::uint16_t>(kProfileRows);
  w.put<std::uint16_t>(kProfileCols);
  w.put<std::uint16_t>(kInputChannels);
  w.put<std::uint16_t>(kScanRows);
  w.put<std::uint16_t>(kScanCols);
  const SimConfig& c = d.sim_config;
  for (double v : c.skin_depths_cells) w.put<double>(v);
  w.put<double>(c.sigma_y_cells);
  w.put<double>(c.sigma_x_cells);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(c.crack_x_begin));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(c.crack_x_end));
  w.put<double>(c.gamma);
  for (const Complex& z : c.calibration) {
    w.put<double>(z.real());
    w.put<double>(z.imag());
  }
  w.put<std::uint8_t>(d.stats ? 1 : 0);
  if (d.stats) {
    for (double v : d.stats->mean) w.put<double>(v);
    for (double v : d.stats->std) w.put<double>(v);
  }
  for (const Sample& s : d.samples) {
    for (std::uint8_t cell : s.profile.cells()) w.put<float>(static_cast<float>(cell));
    w.put_bytes(s.channels.data(), s.channels.size() * sizeof(float));
  }
  return w.bytes();
}

Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes);
  char magic[4];
  if (bytes.size() < 4) throw Error(ErrorCategory::truncated, "truncated payload: missing header");
  r.get_bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCategory::bad_magic, "bad magic: not an ECD1 file");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCategory::version, "unsupported dataset version " + std::to_string(version));
  }
  Dataset d;
  d.seed = r.get<std::uint64_t>();
  const auto n = r.get<std::uint32_t>();
  const auto ph = r.get<std::uint16_t>();
  const auto pw = r.get<std::uint16_t>();
  const auto ch = r.get<std::uint16_t>();
  const auto rh = r.get<std::uint16_t>();
  const auto rw = r.get<std::uint16_t>();
  if (ph != kProfileRows || pw != kProfileCols || ch != kInputChannels || rh != kScanRows ||
      rw != kScanCols) {
    throw Error(ErrorCategory::shape, "dataset geometry differs from 40x12 / 6x40x40");
  }
  SimConfig& c = d.sim_config;
  for (double& v : c.skin_depths_cells) v = r.get<double>();
  c.sigma_y_cells = r.get<double>();
  c.sigma_x_cells = r.get<double>();
  c.crack_x_begin = r.get<std::uint16_t>();
  c.crack_x_end = r.get<std::uint16_t>();
  c.gamma = r.get<double>();
  for (Complex& z : c.calibration) {
    const double re = r.get<double>();
    const double im = r.get<double>();
    z = Complex{re, im};
  }
  if (r.get<std::uint8_t>() != 0) {
    ChannelStats st;
    for (double& v : st.mean) v = r.get<double>();
    for (double& v : st.std) v = r.get<double>();
    d.stats = st;
  }
  constexpr std::size_t kSampleBytes = (kProfileCells + kChannelValues) * sizeof(float);
  if (r.remaining() != static_cast<std::size_t>(n) * kSampleBytes) {
    throw Error(ErrorCategory::truncated,
                "truncated payload: expected " + std::to_string(n) + " samples");
  }
  d.samples.resize(n);
  for (Sample& s : d.samples) {
    std::array<float, kProfileCells> cells;
    r.get_bytes(cells.data(), sizeof(cells));
    for (int idx = 0; idx < kProfileCells; ++idx) {
      if (cells[idx] != 0.0f && cells[idx] != 1.0f) {
        throw Error(ErrorCategory::invalid_argument, "profile cell is not 0 or 1");
      }
      s.profile.set(idx / kProfileCols, idx % kProfileCols, cells[idx] != 0.0f);
    }
    r.get_bytes(s.channels.data(), s.channels.size() * sizeof(float));
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) { io::write_file(path, serialize_dataset(d)); }

Dataset load_dataset(const std::string& path) { return deserialize_dataset(io::read_file(path)); }

}  // namespace eddynet
