// Command-line front end: dataset generation, training, evaluation,
// ablations, timing, gradient checks and single-sample reconstruction.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "eddynet/checkpoint.hpp"
#include "eddynet/dataset.hpp"
#include "eddynet/gradcheck.hpp"
#include "eddynet/harness.hpp"
#include "eddynet/montage.hpp"

using namespace eddynet;

namespace {

void log_line(const std::string& s) { std::cerr << s << std::endl; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot open " + path + " for writing");
  out << text;
}

std::string history_text(const TrainResult& r) {
  std::ostringstream os;
  os << "epoch | train_loss | val_raw_mae | seconds\n";
  for (const auto& e : r.history) {
    os << e.epoch << " | " << e.train_loss << " | ";
    if (e.val_raw_mae) {
      os << *e.val_raw_mae;
    } else {
      os << "-";
    }
    os << " | " << e.seconds << "\n";
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eddy-current crack profile reconstruction"};
  app.require_subcommand(1);

  struct {
    std::size_t n = kDeskScaleSamples;
    std::uint64_t seed = 0;
    double gamma = 0.15;
    std::string out;
    int threads = 0;
  } gen;
  auto* gen_cmd = app.add_subcommand("gen", "simulate (profile, response) pairs into an .ecd file");
  gen_cmd->add_option("--n", gen.n, "number of samples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "dataset seed");
  gen_cmd->add_option("--gamma", gen.gamma, "shadowing strength")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--out", gen.out, "output .ecd path")->required();
  gen_cmd->add_option("--threads", gen.threads, "worker threads (0 = OpenMP default)");

  TrainConfig tc = TrainConfig::desk_scale();
  std::string train_data, train_out, train_variant = "eddynet";
  bool no_standardize = false;
  auto* train_cmd = app.add_subcommand("train", "train a model on the 80% prefix of a dataset");
  train_cmd->add_option("--data", train_data, "input .ecd")->required();
  train_cmd->add_option("--variant", train_variant, "eddynet|nodec|relu|noattn");
  train_cmd->add_option("--channels", tc.width, "channel width C");
  train_cmd->add_option("--k", tc.attention_channels, "attention channels K");
  train_cmd->add_option("--epochs", tc.epochs, "epochs");
  train_cmd->add_option("--batch", tc.batch_size, "batch size");
  train_cmd->add_option("--lr", tc.lr, "learning rate");
  train_cmd->add_option("--seed", tc.seed, "training seed");
  train_cmd->add_option("--out", train_out, "output .eck")->required();
  train_cmd->add_flag("--no-standardize", no_standardize, "feed raw channels to the network");

  std::string eval_data, eval_model, eval_report, eval_montage, eval_variant;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the 20% test suffix");
  eval_cmd->add_option("--data", eval_data, "input .ecd")->required();
  eval_cmd->add_option("--model", eval_model, "checkpoint .eck")->required();
  eval_cmd->add_option("--report", eval_report, "report path")->required();
  eval_cmd->add_option("--montage-dir", eval_montage, "directory for PGM montages")->required();
  eval_cmd->add_option("--variant", eval_variant, "refuse checkpoints of any other variant");

  TrainConfig ac = TrainConfig::desk_scale();
  std::string ablate_data, ablate_dir;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare all four variants");
  ablate_cmd->add_option("--data", ablate_data, "input .ecd")->required();
  ablate_cmd->add_option("--seed", ac.seed, "training seed");
  ablate_cmd->add_option("--out-dir", ablate_dir, "output directory")->required();
  ablate_cmd->add_option("--channels", ac.width, "channel width C");
  ablate_cmd->add_option("--k", ac.attention_channels, "attention channels K");
  ablate_cmd->add_option("--epochs", ac.epochs, "epochs");
  ablate_cmd->add_option("--batch", ac.batch_size, "batch size");
  ablate_cmd->add_option("--lr", ac.lr, "learning rate");

  std::string bench_model;
  int bench_repeats = 20;
  auto* bench_cmd = app.add_subcommand("bench", "time reconstruction at batch 64 and 1");
  bench_cmd->add_option("--model", bench_model, "checkpoint .eck")->required();
  bench_cmd->add_option("--repeats", bench_repeats, "timed repeats")->check(CLI::PositiveNumber);

  bool grad_full = false;
  std::uint64_t grad_seed = 1;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_flag("--full", grad_full, "check every element of every tensor");
  grad_cmd->add_option("--seed", grad_seed, "seed for the random evaluation point");

  std::string rec_model, rec_data, rec_out;
  std::size_t rec_index = 0;
  auto* rec_cmd = app.add_subcommand("reconstruct", "reconstruct one sample to a PGM");
  rec_cmd->add_option("--model", rec_model, "checkpoint .eck")->required();
  rec_cmd->add_option("--data", rec_data, "input .ecd")->required();
  rec_cmd->add_option("--index", rec_index, "sample index")->required();
  rec_cmd->add_option("--out", rec_out, "output PGM")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      const SimConfig cfg = default_sim_config(gen.gamma);
      Dataset d = build_dataset(gen.n, gen.seed, cfg, gen.threads);
      if (d.size() >= 2) d.stats = compute_channel_stats(split(d, kDefaultTrainFraction).first);
      save_dataset(d, gen.out);
      std::cout << "wrote " << d.size() << " samples to " << gen.out << "\n";
    } else if (*train_cmd) {
      tc.variant = parse_variant(train_variant);
      tc.standardize = !no_standardize;
      const Dataset d = load_dataset(train_data);
      auto [train_set, val_set] = split(d, kDefaultTrainFraction);
      const TrainResult r = train(tc, train_set, val_set, log_line);
      save_checkpoint(r.params, train_out);
      write_text(train_out + ".history.txt", history_text(r));
      std::cout << "trained " << r.steps << " steps; checkpoint " << train_out << "\n";
    } else if (*eval_cmd) {
      std::optional<Variant> expected;
      if (!eval_variant.empty()) expected = parse_variant(eval_variant);
      const ModelParams<float> params = load_checkpoint(eval_model, expected);
      const Dataset d = load_dataset(eval_data);
      const Dataset test = split(d, kDefaultTrainFraction).second;
      const EvalReport r = evaluate(params, test, expected);
      write_text(eval_report, format_eval_report(r));
      std::vector<CrackProfile> truth;
      for (const Sample& s : test.samples) truth.push_back(s.profile);
      write_montages(r.predictions, truth, eval_montage);
      std::cout << format_eval_report(r);
    } else if (*ablate_cmd) {
      const Dataset d = load_dataset(ablate_data);
      const auto entries = run_ablations(d, ac, ablate_dir, log_line);
      std::cout << format_ablation_table(entries);
    } else if (*bench_cmd) {
      const ModelParams<float> params = load_checkpoint(bench_model);
      std::cout << format_timing_table(benchmark_reconstruction(params, {64, 1}, bench_repeats));
    } else if (*grad_cmd) {
      bool ok = true;
      for (const auto& r : gradcheck_suite(grad_seed, grad_full ? 0 : kDefaultElementBudget)) {
        std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " max_rel_err " << r.max_rel_error
                  << " (" << r.checked << " elements; worst analytic " << r.worst_analytic
                  << " numeric " << r.worst_numeric << ")\n";
        ok = ok && r.passed();
      }
      if (!ok) {
        std::cerr << "error: gradcheck: analytic and numeric gradients disagree\n";
        return 1;
      }
    } else if (*rec_cmd) {
      const ModelParams<float> params = load_checkpoint(rec_model);
      const Dataset d = load_dataset(rec_data);
      if (rec_index >= d.size()) {
        throw Error(ErrorCategory::invalid_argument, "index out of range");
      }
      const auto pred = reconstruct(params, d, {rec_index});
      const CrackProfile p = to_profile(binarize(pred[0]));
      write_pgm(profile_image(p), rec_out);
      double mae = 0.0;
      for (int idx = 0; idx < kProfileCells; ++idx) {
        mae += std::abs(static_cast<double>(pred[0].data[idx]) - d.samples[rec_index].profile.cells()[idx]);
      }
      std::cout << "sample " << rec_index << " raw MAE " << mae / kProfileCells << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
