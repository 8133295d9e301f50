// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fsd/attacks.hpp"
#include "fsd/dataset.hpp"
#include "fsd/dither.hpp"
#include "fsd/error.hpp"
#include "fsd/filters.hpp"
#include "fsd/grid.hpp"
#include "fsd/image_io.hpp"
#include "fsd/metrics.hpp"
#include "fsd/pipeline.hpp"
#include "fsd/report.hpp"
#include "fsd/tiny_model.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kCellFailures = 2;

// Distinguishes bad input (exit 1) from partial sweep results (exit 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fsd::IoError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// "8/255" or a plain decimal.
double parse_budget(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto slash = text.find('/');
    if (slash == std::string::npos) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } else {
      const double num = std::stod(text.substr(0, slash), &used);
      if (used == slash) {
        const std::string rest = text.substr(slash + 1);
        const double den = std::stod(rest, &used);
        if (used == rest.size() && den != 0.0) return num / den;
      }
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("not a number or fraction: '" + text + "'");
}

struct DataArgs {
  int size = 32;
  int train = 400;
  int eval = 200;
  std::uint64_t seed = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--size", size, "Image side in pixels")->capture_default_str();
    cmd->add_option("--train-count", train, "Training images")->capture_default_str();
    cmd->add_option("--eval-count", eval, "Evaluation images")->capture_default_str();
    cmd->add_option("--data-seed", seed, "Dataset seed")->capture_default_str();
  }

  fsd::SplitParams splits() const {
    fsd::SplitParams p;
    p.size = size;
    p.train = train;
    p.eval = eval;
    p.seed = seed;
    return p;
  }
};

int gen_data(const fs::path& out, int count, const DataArgs& d) {
  fsd::DatasetParams p;
  p.size = d.size;
  p.count = count;
  p.seed = d.seed;
  const auto ds = fsd::generate_dataset(p);
  fs::create_directories(out);
  std::ofstream labels(out / "labels.csv");
  labels << "file,label,class\n";
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%04zu_%s.png", i, ds.class_names[ds.labels[i]].c_str());
    fsd::save_image(ds.images[i], out / name);
    labels << name << ',' << ds.labels[i] << ',' << ds.class_names[ds.labels[i]] << '\n';
  }
  std::cout << "wrote " << ds.images.size() << " images to " << out.string() << '\n';
  return kOk;
}

int train_model(const fs::path& out, const DataArgs& d, int hidden, std::uint64_t init_seed,
                const fsd::TrainOptions& opts) {
  const auto splits = fsd::generate_splits(d.splits());
  const auto& tr = splits.train;
  const fsd::InputShape shape{d.size, d.size, 3};
  const auto init = fsd::TinyModel::random(shape, hidden, fsd::kSyntheticClasses, init_seed);
  const auto model = fsd::train(init, tr.images, tr.labels, opts);
  fsd::save_model(model, out);
  const auto& ev = splits.eval;
  std::cout << "train loss " << fsd::mean_cross_entropy(model, tr.images, tr.labels) << '\n'
            << "train accuracy " << fsd::evaluate_accuracy(model, tr.images, tr.labels, {}) << '\n'
            << "eval accuracy " << fsd::evaluate_accuracy(model, ev.images, ev.labels, {}) << '\n'
            << "model " << fsd::model_hash(model) << " -> " << out.string() << '\n';
  return kOk;
}

struct DitherArgs {
  fs::path in, out;
  int k = 3;
  std::optional<double> blur_sigma;
  int blur_size = 9;
  std::string scan = "raster";
  bool gray = false;
};

int dither_file(const DitherArgs& a) {
  const fsd::Image img = fsd::load_image(a.in);
  const fsd::QuantSpec q(a.k);
  const auto scan = fsd::parse_scan_order(a.scan);
  fsd::Image out = a.gray ? fsd::fs_dither_gray(img, q, scan) : fsd::fs_dither(img, q, scan);
  if (a.blur_sigma) out = fsd::gaussian_blur(out, {*a.blur_sigma, a.blur_size});
  fsd::save_image(out, a.out);
  return kOk;
}

struct AttackArgs {
  fs::path model, image, out;
  int label = 0;
  std::string family = "pgd";
  std::string epsilon = "8/255";
  int steps = 50;
  std::optional<std::string> step_size;
  double momentum = 1.0;
  std::string loss = "cross_entropy";
  std::uint64_t seed = 0;
  bool random_start = false;
  std::optional<int> ste_k;
  double ste_pq = 1.0;
  std::string ste_mode = "fs_dither";
};

int attack_file(const AttackArgs& a) {
  const auto model = fsd::load_model(a.model);
  const fsd::Image x = fsd::load_image(a.image);
  fsd::AttackConfig cfg;
  cfg.family = fsd::parse_attack_family(a.family);
  cfg.epsilon = parse_budget(a.epsilon);
  cfg.steps = a.steps;
  if (a.step_size) cfg.step_size = parse_budget(*a.step_size);
  cfg.momentum = a.momentum;
  cfg.seed = a.seed;
  cfg.random_start = a.random_start;
  if (cfg.family == fsd::AttackFamily::sia) cfg.sia = fsd::SiaConfig{};
  fsd::SteConfig ste;
  if (a.ste_k) {
    ste.enabled = true;
    ste.k_attack = *a.ste_k;
    ste.p_q = a.ste_pq;
    ste.mode = fsd::parse_ste_mode(a.ste_mode);
  }
  fsd::LossKind loss;
  if (a.loss == "cross_entropy") {
    loss = fsd::loss::CrossEntropy{a.label};
  } else if (a.loss == "margin") {
    loss = fsd::loss::Margin{a.label};
  } else {
    throw ConfigError("unknown loss '" + a.loss + "' (cross_entropy, margin)");
  }
  const auto r = fsd::run_attack(model, x, loss, cfg, ste);
  for (std::size_t t = 0; t < r.loss_trace.size(); ++t) {
    std::cout << "step " << t + 1 << " loss " << r.loss_trace[t] << '\n';
  }
  std::cout << "prediction " << fsd::predict(model, x) << " -> " << fsd::predict(model, r.adversarial)
            << '\n'
            << "linf " << r.linf_norm << " (" << r.linf_norm * 255 << "/255)\n"
            << "psnr " << fsd::format_sig6(r.psnr_db) << " dB\n";
  fsd::save_image(r.adversarial, a.out);
  return kOk;
}

struct SweepArgs {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<fs::path> csv, json;
  bool quiet = false;
};

int sweep(const SweepArgs& a) {
  fsd::ExperimentGrid grid;
  try {
    grid = fsd::parse_grid(read_text(a.config));
    if (a.seed) grid.base_seed = *a.seed;
    if (a.workers) grid.workers = *a.workers;
    grid.validate();
  } catch (const fsd::DomainError& e) {
    throw ConfigError(e.what());
  }
  const auto experiment = fsd::prepare_experiment(grid);
  fsd::RunOptions run{grid.workers, {}};
  if (!a.quiet) run.progress = [](std::string_view s) { std::cerr << s << '\n'; };
  const auto report = fsd::run_grid(grid, experiment, run);

  if (a.csv) fsd::emit_report(report, fsd::ReportFormat::csv, *a.csv);
  if (a.json) fsd::emit_report(report, fsd::ReportFormat::json, *a.json);
  if (!a.csv && !a.json) std::cout << fsd::report_to_csv(report);
  for (const auto& w : report.worst_case) {
    if (!w.degradation) continue;
    std::cerr << w.defense << " / " << w.attack << " / " << w.task << ": oblivious "
              << fsd::format_sig6(*w.oblivious) << ", worst informed "
              << fsd::format_sig6(w.informed_worst) << " (" << w.worst_ste << ")\n";
  }
  for (const auto& f : report.failures) {
    std::cerr << "FAILED " << f.defense << " / " << f.attack << " / " << f.ste << " / " << f.task
              << ": " << f.message << '\n';
  }
  return report.complete() ? kOk : kCellFailures;
}

int report_convert(const fs::path& in, const std::optional<fs::path>& out) {
  fsd::EvalReport report;
  try {
    report = fsd::parse_report_json(read_text(in));
  } catch (const fsd::DomainError& e) {
    throw ConfigError(e.what());
  }
  if (out) {
    fsd::emit_report(report, fsd::ReportFormat::csv, *out);
  } else {
    std::cout << fsd::report_to_csv(report);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floyd-Steinberg dithering defense toolkit"};
  app.set_version_flag("--version", std::string(fsd::tool_version()));
  app.require_subcommand(1);

  DataArgs data;
  fs::path gen_out;
  int gen_count = 400;
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as PNG files");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of images")->capture_default_str();
  gen->add_option("--size", data.size, "Image side in pixels")->capture_default_str();
  gen->add_option("--data-seed", data.seed, "Dataset seed")->capture_default_str();

  fs::path model_out;
  int hidden = 128;
  std::uint64_t init_seed = 1;
  fsd::TrainOptions opts;
  auto* tr = app.add_subcommand("train", "Train a TinyModel on the synthetic training split");
  tr->add_option("--out", model_out, "Checkpoint path")->required();
  data.add_to(tr);
  tr->add_option("--hidden", hidden, "Hidden units")->capture_default_str();
  tr->add_option("--init-seed", init_seed, "Weight initialisation seed")->capture_default_str();
  tr->add_option("--epochs", opts.epochs)->capture_default_str();
  tr->add_option("--lr", opts.learning_rate)->capture_default_str();
  tr->add_option("--momentum", opts.momentum)->capture_default_str();
  tr->add_option("--weight-decay", opts.weight_decay)->capture_default_str();
  tr->add_option("--batch", opts.batch_size)->capture_default_str();
  tr->add_option("--seed", opts.seed, "Shuffle seed")->capture_default_str();

  DitherArgs dither;
  auto* di = app.add_subcommand("dither", "Dither one image file, optionally followed by a blur");
  di->add_option("input", dither.in)->required()->check(CLI::ExistingFile);
  di->add_option("output", dither.out)->required();
  di->add_option("--k", dither.k, "Levels per channel")->capture_default_str();
  di->add_option("--blur-sigma", dither.blur_sigma, "Blur after dithering with this sigma");
  di->add_option("--blur-size", dither.blur_size, "Blur kernel taps")->capture_default_str();
  di->add_option("--scan", dither.scan, "raster or serpentine")->capture_default_str();
  di->add_flag("--gray", dither.gray, "Dither the luma and return one channel");

  AttackArgs attack;
  auto* at = app.add_subcommand("attack", "Attack one image and print the loss trace and PSNR");
  at->add_option("--model", attack.model)->required()->check(CLI::ExistingFile);
  at->add_option("--image", attack.image)->required()->check(CLI::ExistingFile);
  at->add_option("--out", attack.out, "Adversarial image path")->required();
  at->add_option("--label", attack.label, "True class")->capture_default_str();
  at->add_option("--family", attack.family, "pgd, mi-fgsm or sia")->capture_default_str();
  at->add_option("--eps", attack.epsilon, "Budget, e.g. 8/255")->capture_default_str();
  at->add_option("--steps", attack.steps)->capture_default_str();
  at->add_option("--step-size", attack.step_size, "Defaults to 4*eps/steps");
  at->add_option("--momentum", attack.momentum)->capture_default_str();
  at->add_option("--loss", attack.loss, "cross_entropy or margin")->capture_default_str();
  at->add_option("--seed", attack.seed)->capture_default_str();
  at->add_flag("--random-start", attack.random_start);
  at->add_option("--ste-k", attack.ste_k, "Enable the informed attacker with this K");
  at->add_option("--ste-pq", attack.ste_pq, "Probability of the quantized forward")
      ->capture_default_str();
  at->add_option("--ste-mode", attack.ste_mode, "fs_dither or uniform_quantize")
      ->capture_default_str();

  SweepArgs sw;
  auto* sp = app.add_subcommand("sweep", "Run an experiment grid");
  sp->add_option("--config", sw.config, "Grid JSON")->required()->check(CLI::ExistingFile);
  sp->add_option("--seed", sw.seed, "Override the grid's base seed");
  sp->add_option("--workers", sw.workers, "Override the worker count");
  sp->add_option("--csv", sw.csv, "Write the CSV report here");
  sp->add_option("--json", sw.json, "Write the JSON report here");
  sp->add_flag("--quiet", sw.quiet, "No progress lines");

  fs::path report_in;
  std::optional<fs::path> report_out;
  auto* rp = app.add_subcommand("report", "Convert a JSON report to CSV");
  rp->add_option("input", report_in)->required()->check(CLI::ExistingFile);
  rp->add_option("--out", report_out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return gen_data(gen_out, gen_count, data);
    if (*tr) return train_model(model_out, data, hidden, init_seed, opts);
    if (*di) return dither_file(dither);
    if (*at) return attack_file(attack);
    if (*sp) return sweep(sw);
    if (*rp) return report_convert(report_in, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fsd::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
