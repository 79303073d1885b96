#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eddynet/simulate.hpp"

namespace eddynet {

inline constexpr int kInputChannels = 2 * kFrequencies;
inline constexpr int kChannelValues = kInputChannels * kScanCells;

/// One (profile, responses) pair. Channels are ordered
/// [Re f1, Im f1, Re f2, Im f2, Re f3, Im f3], each 40x40 row-major.
struct Sample {
  CrackProfile profile;
  std::vector<float> channels = std::vector<float>(kChannelValues, 0.0f);

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct ChannelStats {
  std::array<double, kInputChannels> mean{};
  std::array<double, kInputChannels> std{};

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  SimConfig sim_config;
  std::uint64_t seed = 0;
  std::optional<ChannelStats> stats;

  std::size_t size() const { return samples.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr double kStandardizeEps = 1e-8;
inline constexpr double kDefaultTrainFraction = 0.8;

Sample make_sample(std::uint64_t seed, std::uint64_t index, const SimConfig& cfg);

/// Builds n samples; workers <= 0 uses the OpenMP default. The result does
/// not depend on the worker count.
Dataset build_dataset(std::size_t n, std::uint64_t seed, const SimConfig& cfg, int workers = 0);

/// Prefix split: first floor(n * train_fraction) samples train, rest test.
std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction);

/// Per-channel mean and population std over every pixel of every sample.
ChannelStats compute_channel_stats(const Dataset& train);

/// (x - mean_c) / (std_c + 1e-8), written into out (length kChannelValues).
template <typename T>
void standardize(const std::vector<float>& channels, const ChannelStats& stats, T* out);

std::vector<std::uint8_t> serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace eddynet
