#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "eddynet/binary_io.hpp"
#include "eddynet/dataset.hpp"
#include "eddynet/error.hpp"

using namespace eddynet;

namespace {

ErrorCategory category_of(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize_dataset(bytes);
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an error");
  return ErrorCategory::io;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("build_dataset is deterministic and worker-count independent") {
  const SimConfig cfg = default_sim_config();
  const auto a = serialize_dataset(build_dataset(2, 7, cfg, 1));
  const auto b = serialize_dataset(build_dataset(2, 7, cfg, 1));
  const auto c = serialize_dataset(build_dataset(2, 7, cfg, 8));
  CHECK(a == b);
  CHECK(a == c);
  const auto d = serialize_dataset(build_dataset(64, 3, cfg, 1));
  const auto e = serialize_dataset(build_dataset(64, 3, cfg, 5));
  CHECK(d == e);
}

TEST_CASE("sample i depends only on (seed, i, cfg)") {
  const SimConfig cfg = default_sim_config();
  const Dataset d = build_dataset(10, 11, cfg);
  CHECK(d.samples[7] == make_sample(11, 7, cfg));
}

TEST_CASE("channel layout is Re/Im per frequency") {
  const SimConfig cfg = default_sim_config();
  RngState s = derive_stream(5, 0);
  const CrackProfile p = median_filter_3x3(generate_raw_profile(s));
  const ResponseMaps r = forward_operate(p, cfg);
  const Sample sample = make_sample(5, 0, cfg);
  CHECK(sample.profile == p);
  for (int k = 0; k < kFrequencies; ++k) {
    for (int idx : {0, 417, 1599}) {
      CHECK(sample.channels[(2 * k) * kScanCells + idx] == static_cast<float>(r.values[k][idx].real()));
      CHECK(sample.channels[(2 * k + 1) * kScanCells + idx] == static_cast<float>(r.values[k][idx].imag()));
    }
  }
}

TEST_CASE("full-size dataset geometry") {
  Dataset d = build_dataset(20000, 1, default_sim_config());
  CHECK(d.size() == 20000);
  CHECK(d.samples.back().channels.size() == static_cast<std::size_t>(6 * 40 * 40));
  CHECK(d.samples.back().profile.cells().size() == static_cast<std::size_t>(40 * 12));
  for (Sample& s : d.samples) s.channels = {};
  const auto [train, test] = split(d, 0.8);
  CHECK(train.size() == 16000);
  CHECK(test.size() == 4000);
}

TEST_CASE("split is a prefix partition") {
  const Dataset d = build_dataset(10, 2, default_sim_config());
  const auto [train, test] = split(d, 0.8);
  REQUIRE(train.size() == 8);
  REQUIRE(test.size() == 2);
  for (std::size_t i = 0; i < 8; ++i) CHECK(train.samples[i] == d.samples[i]);
  for (std::size_t i = 0; i < 2; ++i) CHECK(test.samples[i] == d.samples[8 + i]);
  CHECK_THROWS_AS(split(d, 1.0), Error);
  CHECK_THROWS_AS(split(d, 0.0), Error);
}

TEST_CASE("channel statistics edge cases") {
  Dataset one;
  one.samples.resize(1);
  std::fill(one.samples[0].channels.begin(), one.samples[0].channels.begin() + kScanCells, 2.0f);
  const ChannelStats st = compute_channel_stats(one);
  CHECK(st.mean[0] == 2.0);
  CHECK(st.std[0] == 0.0);

  // Pixels vary within a channel, so zero std needs samples that are
  // constant per channel, not merely identical to each other.
  Dataset constant;
  constant.samples.resize(4);
  for (Sample& s : constant.samples) std::fill(s.channels.begin(), s.channels.end(), 0.25f);
  const ChannelStats cst = compute_channel_stats(constant);
  std::vector<double> out(kChannelValues);
  standardize(constant.samples[0].channels, cst, out.data());
  for (int c = 0; c < kInputChannels; ++c) CHECK(cst.std[c] == 0.0);
  for (double v : out) CHECK(v == 0.0);
  CHECK_THROWS_AS(compute_channel_stats(Dataset{}), Error);
}

TEST_CASE("standardized training channels have zero mean and unit std") {
  const Dataset d = build_dataset(40, 9, default_sim_config());
  const ChannelStats st = compute_channel_stats(d);
  std::array<double, kInputChannels> sum{}, sq{};
  std::vector<double> buf(kChannelValues);
  for (const Sample& s : d.samples) {
    standardize(s.channels, st, buf.data());
    for (int c = 0; c < kInputChannels; ++c)
      for (int p = 0; p < kScanCells; ++p) {
        sum[c] += buf[c * kScanCells + p];
        sq[c] += buf[c * kScanCells + p] * buf[c * kScanCells + p];
      }
  }
  const double n = 40.0 * kScanCells;
  for (int c = 0; c < kInputChannels; ++c) {
    REQUIRE(st.std[c] > 1e-6);
    const double mean = sum[c] / n;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(std::sqrt(sq[c] / n - mean * mean) - 1.0) <= 1e-6);
  }
}

TEST_CASE("save/load round trip") {
  Dataset d = build_dataset(3, 17, default_sim_config(0.2));
  d.stats = compute_channel_stats(d);
  const std::string path = temp_path("eddynet_roundtrip.ecd");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  CHECK(serialize_dataset(back) == serialize_dataset(d));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), Error);
}

TEST_CASE("header layout") {
  const Dataset d = build_dataset(1, 0x0102030405060708ULL, default_sim_config());
  const auto bytes = serialize_dataset(d);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ECD1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 0x08);
  CHECK(bytes[15] == 0x01);
  // 4 + 4 + 8 + 4 + 5*2 + (3+2)*8 + 2*2 + 8 + 6*8 + 1, then one sample.
  const std::size_t header = 4 + 4 + 8 + 4 + 10 + 40 + 4 + 8 + 48 + 1;
  CHECK(bytes.size() == header + (480 + 9600) * 4);
}

TEST_CASE("load errors are distinct") {
  Dataset d = build_dataset(2, 1, default_sim_config());
  auto bytes = serialize_dataset(d);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(category_of(bad_magic) == ErrorCategory::bad_magic);

  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK(category_of(bad_version) == ErrorCategory::version);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 5000);
  CHECK(category_of(truncated) == ErrorCategory::truncated);

  auto header_only = bytes;
  header_only.resize(30);
  CHECK(category_of(header_only) == ErrorCategory::truncated);
}
