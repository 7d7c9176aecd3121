// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0
//
// emtnet: dataset synthesis, training, evaluation, sweeps, inference,
// parameter accounting and latency benchmarking.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error. Tables and reports
// go to stdout; progress and warnings go to stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtnet/data.hpp"
#include "emtnet/image.hpp"
#include "emtnet/kernels.hpp"
#include "emtnet/model.hpp"
#include "emtnet/report.hpp"
#include "emtnet/trainer.hpp"
#include "emtnet/weights.hpp"

namespace fs = std::filesystem;
using namespace emtnet;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags every subcommand carries.
struct Common {
  std::uint64_t seed = 42;
  std::string out;
  bool toy = false;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", c.out, out_help);
  cmd->add_flag("--toy", c.toy, "Toy width (channels / 8, 64x64 input)");
}

// Runs `validate` and reports std::invalid_argument as a usage error.
template <typename F>
void check_usage(F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// Writes `text` to `path` when given, otherwise to stdout.
void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error("failed writing '" + path + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error("failed writing '" + path.string() + "'");
}

WeightStore load_checkpoint(const std::string& path, bool toy) {
  if (path.empty()) throw std::runtime_error("no checkpoint given (--weights)");
  if (!fs::exists(path)) throw std::runtime_error("checkpoint '" + path + "' does not exist");
  WeightStore store = load_weights(path);
  if (toy && config_from_weights(store).width != Width::toy) {
    throw std::runtime_error("--toy given but '" + path + "' is a full-width checkpoint");
  }
  return store;
}

DatasetManifest require_manifest(const std::string& path) {
  if (path.empty()) throw std::runtime_error("no manifest given (--manifest)");
  if (!fs::exists(path)) throw std::runtime_error("manifest '" + path + "' does not exist");
  return load_manifest(path);
}

// Training options shared by train, the sweeps and the ablation.
struct TrainFlags {
  std::string variant = "emt-net";
  double wp = 3.0;
  double wclf = 1.5;
  std::size_t epochs = 30;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::string optimizer = "adam";
  double momentum = 0.0;
  std::uint64_t split_seed = 42;
  std::size_t input_size = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool with_variant, bool with_weights) {
  if (with_variant) {
    cmd->add_option("--variant", f.variant, "emt-net | single-clf | single-sgm")->capture_default_str();
  }
  if (with_weights) {
    cmd->add_option("--wp", f.wp, "Positive-class coefficient w_p (>= 1)")->capture_default_str();
    cmd->add_option("--wclf", f.wclf, "Classification-loss weight w_clf (> 0)")->capture_default_str();
  }
  cmd->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", f.lr, "Learning rate")->capture_default_str();
  cmd->add_option("--batch", f.batch, "Batch size")->capture_default_str();
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd")->capture_default_str();
  cmd->add_option("--momentum", f.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--split-seed", f.split_seed, "Seed of the data split")->capture_default_str();
  cmd->add_option("--input-size", f.input_size, "Input side, a multiple of 32 (0: width default)");
}

TrainConfig make_config(const TrainFlags& f, const Common& c) {
  TrainConfig config;
  check_usage([&] {
    config.variant = parse_variant(f.variant);
    config.optimizer.kind = parse_optimizer(f.optimizer);
  });
  config.epochs = f.epochs;
  config.batch_size = f.batch;
  config.optimizer.learning_rate = f.lr;
  config.optimizer.momentum = f.momentum;
  config.loss_weights = {f.wp, f.wclf};
  config.seed = c.seed;
  config.split.seed = f.split_seed;
  config.toy = c.toy;
  config.input_size = f.input_size;
  return config;
}

void log_epoch(const EpochRecord& e) {
  std::cerr << "epoch " << e.epoch << " train_loss=" << e.train_loss
            << " val_loss=" << format_metric(e.val_loss) << " val_acc=" << format_metric(e.val.acc)
            << " val_dsc=" << format_metric(e.val.dsc) << '\n';
}

// Synthetic data the sweeps and the ablation fall back to.
DatasetManifest synthetic_manifest(std::size_t n, std::uint64_t seed, double fraction) {
  SynthOptions so;
  so.n = n;
  so.seed = seed;
  so.malignant_fraction = fraction;
  check_usage([&] {
    if (n < 2) throw std::invalid_argument("--n must be at least 2");
    if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("--malignant-fraction must be in [0, 1]");
  });
  DatasetManifest m;
  m.provenance = "synthetic";
  m.samples = synth_samples(so);
  return m;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  Common common;
  std::size_t n = 256;
  std::size_t size = 0;
  double fraction = 0.4;
};

int run_synth(const SynthArgs& a) {
  if (a.n < 2) throw UsageError("--n must be at least 2");
  SynthOptions so;
  so.n = a.n;
  so.seed = a.common.seed;
  so.image_size = a.size != 0 ? a.size : (a.common.toy ? 64 : 224);
  so.malignant_fraction = a.fraction;
  if (so.image_size < 16) throw UsageError("--size must be at least 16");
  if (a.fraction < 0.0 || a.fraction > 1.0) throw UsageError("--malignant-fraction must be in [0, 1]");
  const fs::path dir = a.common.out.empty() ? fs::path("synthetic") : fs::path(a.common.out);
  const DatasetManifest m = synth_generate(so, dir);
  std::cout << (m.directory / "manifest.csv").string() << '\n';
  std::cerr << "wrote " << m.size() << " samples to " << m.directory.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  Common common;
  TrainFlags flags;
  std::string manifest;
  std::string split = "holdout";
  std::size_t k = 4;
  std::size_t fold = 0;
  bool wclf_given = false;
  bool wp_given = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig config = make_config(a.flags, a.common);
  if (a.split == "kfold") {
    config.split = SplitSpec::kfold(a.k, a.flags.split_seed);
    config.fold = a.fold;
  } else if (a.split != "holdout") {
    throw UsageError("--split must be holdout or kfold");
  }
  check_usage([&] { config.validate(); });
  if (config.variant != Variant::emt_net && a.wclf_given) {
    std::cerr << "warning: --wclf is ignored by " << to_string(config.variant) << '\n';
  }
  if (config.variant == Variant::single_sgm && a.wp_given) {
    std::cerr << "warning: --wp is ignored by single-sgm\n";
  }

  const DatasetManifest manifest = require_manifest(a.manifest);
  const fs::path dir = a.common.out.empty() ? fs::path("run") : fs::path(a.common.out);
  fs::create_directories(dir);

  TrainResult result;
  try {
    result = train(config, manifest, log_epoch);
  } catch (const TrainingDiverged& e) {
    save_weights(e.last_good, dir / "last_good.emtw");
    std::cerr << "last good checkpoint written to " << (dir / "last_good.emtw").string() << '\n';
    throw;
  }
  save_weights(result.weights, dir / "checkpoint.emtw");
  const std::string table = run_csv(result.record);
  write_text(dir / "run.csv", table);
  write_text(dir / "report.txt", run_report(result.record));
  std::cout << table << std::flush;
  std::cerr << "test " << metrics_record(result.record.test) << '\n'
            << "checkpoint " << (dir / "checkpoint.emtw").string() << '\n';
  return 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string weights;
  std::string manifest;
  std::string subset = "all";
  std::size_t k = 4;
  std::size_t fold = 0;
  double threshold = 0.5;
};

int run_eval(const EvalArgs& a) {
  if (a.threshold <= 0.0 || a.threshold >= 1.0) throw UsageError("--threshold must be in (0, 1)");
  if (a.subset != "all" && a.subset != "test" && a.subset != "kfold-test") {
    throw UsageError("--subset must be all, test or kfold-test");
  }
  const WeightStore store = load_checkpoint(a.weights, a.common.toy);
  const DatasetManifest manifest = require_manifest(a.manifest);
  const ModelConfig mc = config_from_weights(store);
  const auto samples = prepare_all(manifest, mc.input_size);

  std::vector<std::size_t> indices;
  if (a.subset == "test") {
    indices = split(samples.size(), SplitSpec::holdout(70, 15, 15, a.common.seed)).front().test;
  } else if (a.subset == "kfold-test") {
    const auto folds = split(samples.size(), SplitSpec::kfold(a.k, a.common.seed));
    if (a.fold >= folds.size()) throw UsageError("--fold out of range");
    indices = folds[a.fold].test;
  }
  const Evaluation ev = evaluate(store, samples, indices, a.threshold);
  emit(metrics_record(ev.report) + "\n", a.common.out);
  return 0;
}

// ------------------------------------------------------------------ infer

// Little-endian float32 .npy holding a rows x cols array.
void write_npy(const fs::path& path, const std::vector<float>& values, std::size_t rows, std::size_t cols) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(rows) + ", " +
                       std::to_string(cols) + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const char magic[] = {'\x93', 'N', 'U', 'M', 'P', 'Y', 1, 0};
  f.write(magic, sizeof magic);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  f.write(len_bytes, 2);
  f << header;
  f.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!f.flush()) throw std::runtime_error("failed writing '" + path.string() + "'");
}

struct InferArgs {
  Common common;
  std::string weights;
  std::string image;
  double threshold = 0.5;
};

int run_infer(const InferArgs& a) {
  if (a.threshold <= 0.0 || a.threshold >= 1.0) throw UsageError("--threshold must be in (0, 1)");
  if (a.image.empty()) throw UsageError("--image is required");
  const WeightStore store = load_checkpoint(a.weights, a.common.toy);
  const ModelConfig mc = config_from_weights(store);
  Network<float> net(mc);
  net.import_weights(store);

  Sample sample;
  sample.image = read_image(a.image);
  sample.mask = GrayImage(sample.image.width, sample.image.height);
  const std::size_t S = mc.input_size;
  const PreparedSample prepared = prepare(sample, S);
  const NetworkOutput<float> out = net.forward(prepared.image.reshaped({1, 3, S, S}), Mode::infer);

  if (out.class_prob) {
    const double p = (*out.class_prob)[0];
    std::cout << "class_prob=" << p << " label=" << (p >= a.threshold ? "malignant" : "benign") << '\n';
  }
  if (out.mask_prob) {
    const fs::path base = a.common.out.empty() ? fs::path(fs::path(a.image).stem().string() + "_mask") : fs::path(a.common.out);
    fs::path png = base, npy = base;
    png.replace_extension(".png");
    npy.replace_extension(".npy");
    if (png.has_parent_path()) fs::create_directories(png.parent_path());

    const Tensor& prob = *out.mask_prob;
    write_npy(npy, std::vector<float>(prob.values().begin(), prob.values().end()), S, S);

    // Undo the square padding and the resize: each original pixel takes the
    // binarized probability of the network pixel it maps to.
    const std::size_t w = sample.image.width, h = sample.image.height, side = std::max(w, h);
    const std::size_t top = (side - h) / 2, left = (side - w) / 2;
    GrayImage mask(w, h);
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = std::min(S - 1, (y + top) * S / side);
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t sx = std::min(S - 1, (x + left) * S / side);
        mask.at(y, x) = prob[sy * S + sx] >= a.threshold ? 255 : 0;
      }
    }
    write_png(mask, png);
    std::cout << "mask=" << png.string() << " probabilities=" << npy.string() << '\n';
  }
  return 0;
}

// ----------------------------------------------------------------- sweeps

struct SweepArgs {
  Common common;
  TrainFlags flags;
  std::string manifest;
  std::size_t n = 256;
  double fraction = 0.25;
  std::size_t k = 4;
  std::vector<double> values;
};

DatasetManifest sweep_data(const SweepArgs& a, Common& common) {
  if (!a.manifest.empty()) return require_manifest(a.manifest);
  if (!common.toy) {
    std::cerr << "note: no --manifest, using the synthetic set in toy mode\n";
    common.toy = true;
  }
  return synthetic_manifest(a.n, common.seed, a.fraction);
}

void print_row_progress(const SweepRow& row) {
  std::cerr << "w_p=" << row.w_p;
  if (row.w_clf) std::cerr << " w_clf=" << *row.w_clf;
  std::cerr << ' ' << metrics_record(row.report) << '\n';
}

int run_sweep_wp(const SweepArgs& a) {
  Common common = a.common;
  TrainConfig base = make_config(a.flags, common);
  base.split = SplitSpec::kfold(a.k, a.flags.split_seed);
  check_usage([&] {
    base.validate();
    if (!ModelConfig::make(base.variant, Width::toy).has_classifier()) {
      throw std::invalid_argument("sweep-wp needs a classification variant");
    }
  });
  const DatasetManifest manifest = sweep_data(a, common);
  base.toy = common.toy;
  const std::vector<double> values = a.values.empty() ? default_wp_values() : a.values;
  const auto rows = sweep_wp(base, manifest, values, print_row_progress);
  emit(sweep_csv(rows), common.out);
  return 0;
}

int run_sweep_grid(const SweepArgs& a) {
  Common common = a.common;
  TrainConfig base = make_config(a.flags, common);
  base.variant = Variant::emt_net;
  base.split = SplitSpec::holdout(70, 15, 15, a.flags.split_seed);
  check_usage([&] { base.validate(); });
  const DatasetManifest manifest = sweep_data(a, common);
  base.toy = common.toy;
  const std::vector<double> axis = a.values.empty() ? grid_axis_values() : a.values;
  const auto rows = sweep_grid(base, manifest, axis, axis, print_row_progress);
  emit(sweep_csv(rows), common.out);
  return 0;
}

int run_ablation(const SweepArgs& a) {
  Common common = a.common;
  TrainConfig base = make_config(a.flags, common);
  base.split = SplitSpec::holdout(70, 15, 15, a.flags.split_seed);
  check_usage([&] { base.validate(); });
  const DatasetManifest manifest = sweep_data(a, common);
  base.toy = common.toy;
  const auto rows = ablation(base, manifest, [](const AblationRow& r) {
    std::cerr << to_string(r.variant) << ' ' << metrics_record(r.report) << '\n';
  });
  emit(ablation_csv(rows), common.out);
  return 0;
}

// ----------------------------------------------------------------- params

struct ParamsArgs {
  Common common;
  std::string variant;
};

int run_params(const ParamsArgs& a) {
  std::vector<Variant> variants{Variant::emt_net, Variant::single_clf, Variant::single_sgm};
  if (!a.variant.empty()) {
    Variant v{};
    check_usage([&] { v = parse_variant(a.variant); });
    variants = {v};
  }
  const Width width = a.common.toy ? Width::toy : Width::full;
  std::ostringstream out;
  out << "variant,width,parameters\n";
  for (Variant v : variants) {
    out << to_string(v) << ',' << to_string(width) << ',' << count_params(ModelConfig::make(v, width)) << '\n';
  }
  emit(out.str(), a.common.out);
  return 0;
}

// ------------------------------------------------------------------ bench

struct BenchArgs {
  Common common;
  std::string variant = "emt-net";
  std::string weights;
  std::size_t runs = 20;
  std::size_t warmup = 3;
  int threads = 0;
};

struct Timing {
  double mean_ms = 0.0, median_ms = 0.0, min_ms = 0.0;
};

Timing time_forward(Network<float>& net, const Tensor& input, std::size_t warmup, std::size_t runs) {
  for (std::size_t i = 0; i < warmup; ++i) net.forward(input, Mode::infer);
  std::vector<double> ms(runs);
  for (auto& t : ms) {
    const auto start = std::chrono::steady_clock::now();
    net.forward(input, Mode::infer);
    t = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  Timing out;
  for (double t : ms) out.mean_ms += t;
  out.mean_ms /= static_cast<double>(runs);
  std::sort(ms.begin(), ms.end());
  out.median_ms = runs % 2 == 1 ? ms[runs / 2] : 0.5 * (ms[runs / 2 - 1] + ms[runs / 2]);
  out.min_ms = ms.front();
  return out;
}

int run_bench(const BenchArgs& a) {
  if (a.runs < 20) throw UsageError("--runs must be at least 20");
  if (a.threads < 0) throw UsageError("--threads must be non-negative");
  ModelConfig mc;
  WeightStore store;
  if (!a.weights.empty()) {
    store = load_checkpoint(a.weights, a.common.toy);
    mc = config_from_weights(store);
  } else {
    Variant v{};
    check_usage([&] { v = parse_variant(a.variant); });
    mc = ModelConfig::make(v, a.common.toy ? Width::toy : Width::full);
    store = init_weights(mc, a.common.seed);
  }
  Network<float> net(mc);
  net.import_weights(store);

  const std::size_t S = mc.input_size;
  Tensor input({1, 3, S, S});
  std::mt19937_64 engine(a.common.seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : input.values()) v = dist(engine);

  const int hardware = kernels::max_threads();
  const int multi = a.threads > 0 ? a.threads : hardware;
  std::ostringstream out;
  out << "variant,width,input,threads,warmup,runs,mean_ms,median_ms,min_ms\n";
  for (int threads : {1, multi}) {
    kernels::set_threads(threads);
    const Timing t = time_forward(net, input, a.warmup, a.runs);
    out << to_string(mc.variant) << ',' << to_string(mc.width) << ',' << S << ',' << threads << ',' << a.warmup << ','
        << a.runs << ',' << t.mean_ms << ',' << t.median_ms << ',' << t.min_ms << '\n';
  }
  kernels::set_threads(hardware);
  if (multi == 1) std::cerr << "note: one hardware thread available, both rows are single-threaded\n";
  emit(out.str(), a.common.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMT-Net: multitask breast ultrasound tumor classification and segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads for the kernels (0: all)");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic ultrasound-like dataset");
  add_common(c_synth, synth.common, "Output directory (default: synthetic)");
  c_synth->add_option("--n", synth.n, "Number of samples (>= 2)")->capture_default_str();
  c_synth->add_option("--size", synth.size, "Image side (default 224, 64 with --toy)");
  c_synth->add_option("--malignant-fraction", synth.fraction, "Share of malignant samples")->capture_default_str();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train one model and write its best checkpoint");
  add_common(c_train, tr.common, "Output directory (default: run)");
  add_train_flags(c_train, tr.flags, true, true);
  c_train->add_option("--manifest", tr.manifest, "Dataset manifest CSV");
  c_train->add_option("--split", tr.split, "holdout (70/15/15) | kfold")->capture_default_str();
  c_train->add_option("--k", tr.k, "Folds for --split kfold")->capture_default_str();
  c_train->add_option("--fold", tr.fold, "Fold index for --split kfold")->capture_default_str();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  add_common(c_eval, ev.common, "Write the report here instead of stdout");
  c_eval->add_option("--weights", ev.weights, "Checkpoint file");
  c_eval->add_option("--manifest", ev.manifest, "Dataset manifest CSV");
  c_eval->add_option("--subset", ev.subset, "all | test (holdout, --seed) | kfold-test")->capture_default_str();
  c_eval->add_option("--k", ev.k, "Folds for --subset kfold-test")->capture_default_str();
  c_eval->add_option("--fold", ev.fold, "Fold for --subset kfold-test")->capture_default_str();
  c_eval->add_option("--threshold", ev.threshold, "Decision threshold")->capture_default_str();

  InferArgs inf;
  auto* c_infer = app.add_subcommand("infer", "Classify and segment one image");
  add_common(c_infer, inf.common, "Mask path stem; writes <stem>.png and <stem>.npy");
  c_infer->add_option("--weights", inf.weights, "Checkpoint file");
  c_infer->add_option("--image", inf.image, "PNG or PGM input");
  c_infer->add_option("--threshold", inf.threshold, "Decision and mask threshold")->capture_default_str();

  SweepArgs swp;
  swp.flags.variant = "single-clf";
  auto* c_swp = app.add_subcommand("sweep-wp", "K-fold sweep over the positive-class coefficient");
  add_common(c_swp, swp.common, "Write the CSV here instead of stdout");
  add_train_flags(c_swp, swp.flags, true, false);
  c_swp->add_option("--wclf", swp.flags.wclf, "w_clf for emt-net")->capture_default_str();
  c_swp->add_option("--manifest", swp.manifest, "Dataset manifest (default: synthetic, toy)");
  c_swp->add_option("--n", swp.n, "Synthetic samples")->capture_default_str();
  c_swp->add_option("--malignant-fraction", swp.fraction, "Synthetic positive share")->capture_default_str();
  c_swp->add_option("--k", swp.k, "Folds")->capture_default_str();
  c_swp->add_option("--values", swp.values, "Override the w_p list");

  SweepArgs grid;
  grid.fraction = 0.4;
  auto* c_grid = app.add_subcommand("sweep-grid", "Holdout grid over (w_clf, w_p)");
  add_common(c_grid, grid.common, "Write the CSV here instead of stdout");
  add_train_flags(c_grid, grid.flags, false, false);
  c_grid->add_option("--manifest", grid.manifest, "Dataset manifest (default: synthetic, toy)");
  c_grid->add_option("--n", grid.n, "Synthetic samples")->capture_default_str();
  c_grid->add_option("--malignant-fraction", grid.fraction, "Synthetic positive share")->capture_default_str();
  c_grid->add_option("--values", grid.values, "Override the axis values of both weights");

  SweepArgs abl;
  abl.fraction = 0.4;
  auto* c_abl = app.add_subcommand("ablation", "Train the three variants on one holdout split");
  add_common(c_abl, abl.common, "Write the CSV here instead of stdout");
  add_train_flags(c_abl, abl.flags, false, true);
  c_abl->add_option("--manifest", abl.manifest, "Dataset manifest (default: synthetic, toy)");
  c_abl->add_option("--n", abl.n, "Synthetic samples")->capture_default_str();
  c_abl->add_option("--malignant-fraction", abl.fraction, "Synthetic positive share")->capture_default_str();

  ParamsArgs par;
  auto* c_params = app.add_subcommand("params", "Learnable parameter counts");
  add_common(c_params, par.common, "Write the CSV here instead of stdout");
  c_params->add_option("--variant", par.variant, "One variant (default: all three)");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Single-image infer-mode forward latency");
  add_common(c_bench, bench.common, "Write the CSV here instead of stdout");
  c_bench->add_option("--variant", bench.variant, "Variant when no --weights")->capture_default_str();
  c_bench->add_option("--weights", bench.weights, "Checkpoint (default: seeded random weights)");
  c_bench->add_option("--runs", bench.runs, "Timed runs (>= 20)")->capture_default_str();
  c_bench->add_option("--warmup", bench.warmup, "Untimed warmup runs")->capture_default_str();
  c_bench->add_option("--bench-threads", bench.threads, "Threads of the multi-threaded row (0: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 1;
  }
  tr.wclf_given = c_train->count("--wclf") > 0;
  tr.wp_given = c_train->count("--wp") > 0;

  try {
    if (threads < 0) throw UsageError("--threads must be non-negative");
    if (threads > 0) kernels::set_threads(threads);
    if (*c_synth) return run_synth(synth);
    if (*c_train) return run_train(tr);
    if (*c_eval) return run_eval(ev);
    if (*c_infer) return run_infer(inf);
    if (*c_swp) return run_sweep_wp(swp);
    if (*c_grid) return run_sweep_grid(grid);
    if (*c_abl) return run_ablation(abl);
    if (*c_params) return run_params(par);
    if (*c_bench) return run_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
