#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eddynet/dataset.hpp"
#include "eddynet/model.hpp"
#include "eddynet/optim.hpp"

namespace eddynet {

/// Defaults follow the full training recipe (C=320, K=20, 30 epochs, batch 64,
/// lr 2e-4); desk_scale() shrinks width and epochs for CPU runs.
struct TrainConfig {
  Variant variant = Variant::eddynet;
  int width = kDefaultWidth;
  int attention_channels = kDefaultAttentionChannels;
  int epochs = 30;
  int batch_size = 64;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  bool standardize = true;

  static TrainConfig desk_scale();
  void validate() const;
};

inline constexpr std::size_t kDeskScaleSamples = 5000;
inline constexpr double kBinarizeThreshold = 0.5;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_raw_mae;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochRecord> history;
  std::int64_t steps = 0;
};

using LogFn = std::function<void(const std::string&)>;

/// Stream indices under the training seed.
inline constexpr std::uint64_t kInitStreamIndex = 0;
inline constexpr std::uint64_t kShuffleStreamIndex = 1;

/// Ranger training on train_set; val_set may be empty. Channel statistics come
/// from train_set.stats when present, else are computed from train_set.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const LogFn& log = {});

/// Number of optimizer steps one epoch takes (last short batch kept).
std::int64_t steps_per_epoch(std::size_t samples, int batch_size);

/// In-place Fisher-Yates over 0..n-1 driven by `s`.
void shuffle_indices(std::vector<std::size_t>& idx, RngState& s);

template <typename T>
Tensor<T> binarize(const Tensor<T>& x, double threshold = kBinarizeThreshold);

struct EvalReport {
  double raw_mae = 0.0;
  double binarized_mae = 0.0;
  std::vector<double> per_sample_raw;
  std::vector<double> per_sample_binarized;
  std::vector<CrackProfile> predictions;  // binarized
  double forward_seconds = 0.0;
};

/// Eval-mode reconstruction of every sample in test_set.
EvalReport evaluate(const ModelParams<float>& params, const Dataset& test_set,
                    std::optional<Variant> expected = std::nullopt, int batch_size = 64);

/// Continuous [0,1] reconstructions for the given indices.
std::vector<Tensor<float>> reconstruct(const ModelParams<float>& params, const Dataset& data,
                                       const std::vector<std::size_t>& indices);

std::string format_eval_report(const EvalReport& r);

struct AblationEntry {
  Variant variant = Variant::eddynet;
  EvalReport report;
  TrainResult training;
  std::string checkpoint_path;
};

/// Trains every variant on the same prefix split and evaluates it on the
/// held-out part. Writes <out_dir>/<variant>.eck and <out_dir>/ablation.txt.
std::vector<AblationEntry> run_ablations(const Dataset& data, const TrainConfig& base,
                                         const std::string& out_dir, const LogFn& log = {});

/// Two-row (raw, binarized) by four-column table.
std::string format_ablation_table(const std::vector<AblationEntry>& entries);

struct TimingEntry {
  int batch_size = 0;
  double median_seconds = 0.0;
  std::vector<double> samples;
};

double median(std::vector<double> values);

/// Median wall-clock seconds per eval-mode forward pass at each batch size,
/// after `warmup` untimed passes.
std::vector<TimingEntry> benchmark_reconstruction(const ModelParams<float>& params,
                                                  const std::vector<int>& batch_sizes, int repeats,
                                                  int warmup = 2);

std::string format_timing_table(const std::vector<TimingEntry>& entries);

/// First min(32, n) test samples: truth, prediction and error montages.
void write_montages(const std::vector<CrackProfile>& pred, const std::vector<CrackProfile>& truth,
                    const std::string& dir);

CrackProfile to_profile(const Tensor<float>& binary, std::size_t offset = 0);

}  // namespace eddynet
