#include "eddynet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "eddynet/checkpoint.hpp"
#include "eddynet/montage.hpp"

namespace eddynet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ChannelStats identity_stats() {
  ChannelStats st;
  st.mean.fill(0.0);
  st.std.fill(1.0);
  return st;
}

}  // namespace

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.width = 64;
  c.epochs = 15;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCategory::invalid_argument, "batch size must be >= 1");
  if (epochs < 1) throw Error(ErrorCategory::invalid_argument, "epochs must be >= 1");
  if (width < 1 || attention_channels < 1) {
    throw Error(ErrorCategory::invalid_argument, "channels and K must be >= 1");
  }
  if (!(lr > 0.0)) throw Error(ErrorCategory::invalid_argument, "learning rate must be positive");
}

std::int64_t steps_per_epoch(std::size_t samples, int batch_size) {
  return static_cast<std::int64_t>((samples + batch_size - 1) / batch_size);
}

void shuffle_indices(std::vector<std::size_t>& idx, RngState& s) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next_u64(s) % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                  const LogFn& log) {
  cfg.validate();
  if (train_set.samples.empty()) throw Error(ErrorCategory::invalid_argument, "empty training set");

  RngState init_stream = derive_stream(cfg.seed, kInitStreamIndex);
  RngState shuffle_stream = derive_stream(cfg.seed, kShuffleStreamIndex);

  TrainResult result;
  result.params = init_params<float>(cfg.variant, cfg.width, cfg.attention_channels, init_stream);
  if (cfg.standardize) {
    result.params.stats = train_set.stats ? *train_set.stats : compute_channel_stats(train_set);
  } else {
    result.params.stats = identity_stats();
  }
  RangerConfig rc;
  rc.lr = cfg.lr;
  OptState<float> opt = make_opt_state(result.params, rc);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Tensor<float> input, truth;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    shuffle_indices(order, shuffle_stream);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
      assemble_batch(train_set, idx, result.params.stats, input, truth);
      Gradients<float> g = model_backward(result.params, input, truth);
      if (!std::isfinite(g.loss)) {
        throw Error(ErrorCategory::non_finite, "non-finite loss at epoch " + std::to_string(epoch) +
                                                   " batch " + std::to_string(batch_no));
      }
      ranger_step(result.params, g.grads, opt);
      loss_sum += g.loss * static_cast<double>(idx.size());
      seen += idx.size();
      ++result.steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    if (!val_set.samples.empty()) rec.val_raw_mae = evaluate(result.params, val_set).raw_mae;
    rec.seconds = seconds_since(start);
    result.history.push_back(rec);
    if (log) {
      std::ostringstream os;
      os << std::string(variant_name(cfg.variant)) << " epoch " << epoch << "/" << cfg.epochs
         << " train_loss " << std::fixed << std::setprecision(4) << rec.train_loss;
      if (rec.val_raw_mae) os << " val_raw_mae " << *rec.val_raw_mae;
      os << " (" << std::setprecision(1) << rec.seconds << " s)";
      log(os.str());
    }
  }
  return result;
}

template <typename T>
Tensor<T> binarize(const Tensor<T>& x, double threshold) {
  Tensor<T> out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] >= threshold ? T(1) : T(0);
  return out;
}

template Tensor<float> binarize(const Tensor<float>&, double);
template Tensor<double> binarize(const Tensor<double>&, double);

CrackProfile to_profile(const Tensor<float>& binary, std::size_t offset) {
  CrackProfile p;
  for (int idx = 0; idx < kProfileCells; ++idx) {
    p.set(idx / kProfileCols, idx % kProfileCols, binary.data[offset + idx] >= 0.5f);
  }
  return p;
}

EvalReport evaluate(const ModelParams<float>& params, const Dataset& test_set,
                    std::optional<Variant> expected, int batch_size) {
  require_variant(params.variant, expected);
  if (test_set.samples.empty()) throw Error(ErrorCategory::invalid_argument, "empty evaluation set");
  EvalReport r;
  const std::size_t n = test_set.size();
  r.per_sample_raw.resize(n);
  r.per_sample_binarized.resize(n);
  r.predictions.resize(n);
  Tensor<float> input, truth;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    assemble_batch(test_set, idx, params.stats, input, truth);
    const auto start = Clock::now();
    const Tensor<float> pred = model_predict(params, input);
    r.forward_seconds += seconds_since(start);
    const Tensor<float> bin = binarize(pred);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t off = i * kProfileCells;
      double raw = 0.0;
      double hard = 0.0;
      for (int p = 0; p < kProfileCells; ++p) {
        raw += std::abs(static_cast<double>(pred.data[off + p]) - truth.data[off + p]);
        hard += std::abs(static_cast<double>(bin.data[off + p]) - truth.data[off + p]);
      }
      r.per_sample_raw[begin + i] = raw / kProfileCells;
      r.per_sample_binarized[begin + i] = hard / kProfileCells;
      r.predictions[begin + i] = to_profile(bin, off);
    }
  }
  r.raw_mae = std::accumulate(r.per_sample_raw.begin(), r.per_sample_raw.end(), 0.0) / n;
  r.binarized_mae =
      std::accumulate(r.per_sample_binarized.begin(), r.per_sample_binarized.end(), 0.0) / n;
  return r;
}

std::vector<Tensor<float>> reconstruct(const ModelParams<float>& params, const Dataset& data,
                                       const std::vector<std::size_t>& indices) {
  Tensor<float> input, truth;
  assemble_batch(data, indices, params.stats, input, truth);
  const Tensor<float> pred = model_predict(params, input);
  std::vector<Tensor<float>> out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Tensor<float> t({1, 1, kProfileRows, kProfileCols});
    std::copy_n(pred.data.begin() + static_cast<std::ptrdiff_t>(i * kProfileCells), kProfileCells,
                t.data.begin());
    out.push_back(std::move(t));
  }
  return out;
}

std::string format_eval_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "metric       | value\n";
  os << "samples      | " << r.per_sample_raw.size() << "\n";
  os << "raw MAE      | " << r.raw_mae << "\n";
  os << "binarized MAE| " << r.binarized_mae << "\n";
  os << "forward (s)  | " << r.forward_seconds << "\n";
  return os.str();
}

std::vector<AblationEntry> run_ablations(const Dataset& data, const TrainConfig& base,
                                         const std::string& out_dir, const LogFn& log) {
  std::filesystem::create_directories(out_dir);
  auto [train_set, test_set] = split(data, kDefaultTrainFraction);
  if (!train_set.stats) train_set.stats = compute_channel_stats(train_set);

  std::vector<AblationEntry> entries;
  for (Variant v : kAllVariants) {
    TrainConfig cfg = base;
    cfg.variant = v;
    AblationEntry e;
    e.variant = v;
    e.training = train(cfg, train_set, Dataset{}, log);
    e.checkpoint_path = (std::filesystem::path(out_dir) / (std::string(variant_name(v)) + ".eck")).string();
    save_checkpoint(e.training.params, e.checkpoint_path);
    e.report = evaluate(e.training.params, test_set, v);
    if (log) {
      log(std::string(variant_name(v)) + " test raw " + std::to_string(e.report.raw_mae) +
          " binarized " + std::to_string(e.report.binarized_mae));
    }
    entries.push_back(std::move(e));
  }
  std::ofstream out(std::filesystem::path(out_dir) / "ablation.txt");
  out << format_ablation_table(entries);
  if (!out) throw Error(ErrorCategory::io, "cannot write ablation report in " + out_dir);
  return entries;
}

namespace {

std::string display_name(Variant v) {
  switch (v) {
    case Variant::eddynet: return "EddyNet";
    case Variant::nodec: return "Eddy-nodec";
    case Variant::relu: return "Eddy-relu";
    case Variant::noattn: return "Eddy-noattn";
  }
  return "?";
}

}  // namespace

std::string format_ablation_table(const std::vector<AblationEntry>& entries) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "profile type";
  for (const auto& e : entries) os << " | " << std::setw(11) << display_name(e.variant);
  os << "\n";
  os << std::fixed << std::setprecision(3);
  os << std::setw(12) << "raw";
  for (const auto& e : entries) os << " | " << std::setw(11) << e.report.raw_mae;
  os << "\n" << std::setw(12) << "binarized";
  for (const auto& e : entries) os << " | " << std::setw(11) << e.report.binarized_mae;
  os << "\n";
  return os.str();
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<TimingEntry> benchmark_reconstruction(const ModelParams<float>& params,
                                                  const std::vector<int>& batch_sizes, int repeats,
                                                  int warmup) {
  if (repeats < 1) throw Error(ErrorCategory::invalid_argument, "repeats must be >= 1");
  std::vector<TimingEntry> out;
  RngState s = derive_stream(0, 99);
  for (int b : batch_sizes) {
    Tensor<float> input({b, kInputChannels, kScanRows, kScanCols});
    for (float& v : input.data) v = static_cast<float>(next_gaussian(s));
    for (int i = 0; i < warmup; ++i) model_predict(params, input);
    TimingEntry e;
    e.batch_size = b;
    for (int i = 0; i < repeats; ++i) {
      const auto start = Clock::now();
      const Tensor<float> pred = model_predict(params, input);
      e.samples.push_back(seconds_since(start));
    }
    e.median_seconds = median(e.samples);
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_timing_table(const std::vector<TimingEntry>& entries) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "batch size" << " | CPU\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& e : entries) os << std::setw(10) << e.batch_size << " | " << e.median_seconds << "\n";
  return os.str();
}

void write_montages(const std::vector<CrackProfile>& pred, const std::vector<CrackProfile>& truth,
                    const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = std::min<std::size_t>({pred.size(), truth.size(), kMontageTiles});
  const std::vector<CrackProfile> p(pred.begin(), pred.begin() + static_cast<std::ptrdiff_t>(n));
  const std::vector<CrackProfile> t(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(n));
  const std::filesystem::path base(dir);
  write_pgm(make_montage(t), (base / "truth.pgm").string());
  write_pgm(make_montage(p), (base / "reconstructed.pgm").string());
  write_pgm(make_error_montage(p, t), (base / "error.pgm").string());
}

}  // namespace eddynet
