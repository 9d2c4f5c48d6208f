// Command-line front end: dataset generation, training runs, sweeps,
// ablations, evaluation of checkpoints and result tables.

#include <glob.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "coal/checkpoint.hpp"
#include "coal/errors.hpp"
#include "coal/evaluation.hpp"
#include "coal/experiment.hpp"
#include "coal/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> parse_degrees(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw coal::ConfigError("bad degree '" + item + "'");
    }
  }
  if (out.empty()) throw coal::ConfigError("no degrees given");
  return out;
}

void print_summary(const coal::RunReport& r) {
  std::cout << r.summary.label << " [" << r.summary.task << "]: per-class mean accuracy "
            << 100.0 * r.summary.final_target_accuracy << "% (after pretraining "
            << 100.0 * r.summary.pretrain_target_accuracy << "%)\n";
}

void write_tables(const fs::path& dir, const std::vector<coal::RunReport>& reports) {
  coal::write_text(dir / "table.csv", coal::render_table(reports, coal::TableFormat::csv));
  const std::string md = coal::render_table(reports, coal::TableFormat::markdown);
  coal::write_text(dir / "table.md", md);
  std::cout << md;
}

int cmd_gen_shift(const std::string& input, double alpha, double degree, std::size_t budget,
                  const std::string& direction, std::uint64_t seed, std::size_t min_per_class,
                  double interval_width, const fs::path& out) {
  coal::LabeledDataset pool;
  std::vector<std::string> inputs;
  if (input.rfind("synthetic", 0) == 0) {
    const coal::SyntheticSpec spec = coal::parse_synthetic_spec(input);
    auto [src, tgt] = coal::generate_twin_domains(spec.twin, spec.seed);
    pool = spec.target ? std::move(tgt) : std::move(src);
  } else {
    pool = coal::load_domain_file(input);
    inputs.push_back(input);
  }
  coal::ShiftSpec shift;
  shift.pareto_alpha = alpha;
  shift.degree = degree;
  shift.budget = budget;
  shift.direction = coal::parse_direction(direction);
  shift.min_per_class = min_per_class;
  shift.interval_width = interval_width;
  const coal::LabeledDataset shifted = coal::build_shift(pool, shift, seed);
  fs::create_directories(out);
  coal::write_csv(out / "dataset.csv", shifted);
  const json manifest = coal::dataset_manifest(shifted, "dataset.csv", out, shift, seed, inputs);
  coal::write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << shifted.size() << " samples to " << (out / "dataset.csv").string()
            << "; class counts " << json(shifted.class_counts()).dump() << "\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const std::string& out) {
  const coal::ExperimentConfig cfg = coal::load_experiment_config(config_path);
  const fs::path dir = out.empty() ? fs::path("runs") / cfg.name : fs::path(out);
  const coal::RunReport report = coal::run_experiment(cfg, dir);
  print_summary(report);
  std::cout << "outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_sweep(const fs::path& config_path, const std::string& degrees, const std::string& out) {
  const coal::ExperimentConfig base = coal::load_experiment_config(config_path);
  const fs::path dir = out.empty() ? fs::path("runs") / (base.name + "-sweep") : fs::path(out);
  std::vector<coal::RunReport> reports;
  for (double d : parse_degrees(degrees)) {
    coal::ExperimentConfig cfg = base;
    cfg.data.shift_enabled = true;
    cfg.data.degree = d;
    cfg.task.clear();
    std::ostringstream name;
    name << "d" << d;
    reports.push_back(coal::run_experiment(cfg, dir / name.str()));
    print_summary(reports.back());
  }
  write_tables(dir, reports);
  return 0;
}

int cmd_ablate(const fs::path& config_path, const std::string& out) {
  coal::ExperimentConfig base = coal::load_experiment_config(config_path);
  base.train.method = coal::Method::coal;
  const fs::path dir = out.empty() ? fs::path("runs") / (base.name + "-ablate") : fs::path(out);
  std::vector<coal::RunReport> reports;
  const std::pair<bool, bool> variants[] = {{false, false}, {true, false}, {false, true}, {true, true}};
  for (auto [no_pseudo, no_entropy] : variants) {
    coal::ExperimentConfig cfg = base;
    cfg.train.ablations = {no_pseudo, no_entropy};
    reports.push_back(coal::run_experiment(cfg, dir / cfg.train.label()));
    print_summary(reports.back());
  }
  write_tables(dir, reports);
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out) {
  const coal::ModelParams params = coal::load_checkpoint(checkpoint);
  const coal::LabeledDataset data = coal::load_manifest_dataset(manifest);
  const coal::Prediction pred = coal::classify(params, data.features);
  const auto predicted = coal::argmax_rows(pred.probabilities);
  const auto cm = coal::ConfusionMatrix::from_predictions(data.labels, predicted, data.num_classes);

  std::vector<double> truth_w, pred_w(data.num_classes, 0.0);
  for (std::size_t n : data.class_counts()) truth_w.push_back(static_cast<double>(n));
  for (int p : predicted) pred_w[static_cast<std::size_t>(p)] += 1.0;
  const auto cmp = coal::compare_distributions(coal::LabelDistribution::from_weights(pred_w),
                                               coal::LabelDistribution::from_weights(truth_w));
  std::cout << "samples: " << data.size() << "\n"
            << "per_class_mean_accuracy: " << coal::per_class_mean_accuracy(cm) << "\n"
            << "overall_accuracy: " << cm.overall_accuracy() << "\n"
            << "predicted_vs_true_js_distance: " << cmp.js_distance << "\n"
            << "predicted_vs_true_l1: " << cmp.l1 << "\n";
  fs::create_directories(out);
  coal::write_confusion_csv(out / "confusion.csv", cm);
  const coal::Projection2D proj = coal::project_features_2d(pred.embeddings);
  for (const auto& w : proj.warnings) std::cerr << "warning: " << w << "\n";
  coal::write_projection_csv(out / "features_2d.csv", proj, data.labels);
  std::cout << "wrote " << (out / "confusion.csv").string() << " and "
            << (out / "features_2d.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::string& pattern, const std::string& format, const std::string& output) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> paths;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (paths.empty()) throw coal::IoError("no report files match '" + pattern + "'");
  std::sort(paths.begin(), paths.end());
  std::vector<coal::RunReport> reports;
  for (const auto& p : paths) {
    try {
      reports.push_back(coal::report_from_json(json::parse(coal::read_text(p))));
    } catch (const json::parse_error& e) {
      throw coal::FormatError(p + ": " + e.what());
    }
  }
  const std::string table = coal::render_table(reports, coal::parse_table_format(format));
  if (output.empty()) {
    std::cout << table;
  } else {
    coal::write_text(output, table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-imbalanced domain adaptation lab"};
  app.require_subcommand(1);

  std::string input, direction = "ut", out, config, degrees = "0,20,40,60,80,100", checkpoint,
                     data, pattern, format = "markdown", output;
  double alpha = 1.0, degree = 100.0, interval_width = 1.0;
  std::size_t budget = 1000, min_per_class = 2;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-shift", "Resample a dataset to a long-tailed label distribution");
  gen->add_option("--input", input, "Dataset path (csv, idx:<images>,<labels>) or synthetic:<spec>")->required();
  gen->add_option("--alpha", alpha, "Pareto shape");
  gen->add_option("--degree", degree, "Shift degree in percent (0 = balanced)");
  gen->add_option("--budget", budget, "Total sample count");
  gen->add_option("--direction", direction, "rs (source-reversed) or ut (target-ranked)")
      ->check(CLI::IsMember({"rs", "ut"}));
  gen->add_option("--seed", seed, "Sampling seed");
  gen->add_option("--min-per-class", min_per_class, "Minimum samples per class");
  gen->add_option("--interval-width", interval_width, "Width of the Pareto evaluation interval");
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Run one experiment");
  train->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output directory (default runs/<name>)");

  auto* sweep = app.add_subcommand("sweep", "Run one experiment per label-shift degree");
  sweep->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--degrees", degrees, "Comma-separated degrees");
  sweep->add_option("--out", out, "Output directory");

  auto* ablate = app.add_subcommand("ablate", "Run COAL with each loss term disabled");
  ablate->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset manifest");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Directory for confusion.csv and features_2d.csv");

  auto* report = app.add_subcommand("report", "Render report.json files as a table");
  report->add_option("--glob", pattern, "Glob pattern for report.json files")->required();
  report->add_option("--format", format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));
  report->add_option("--output", output, "Write the table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      return cmd_gen_shift(input, alpha, degree, budget, direction, seed, min_per_class,
                           interval_width, out);
    }
    if (*train) return cmd_train(config, out);
    if (*sweep) return cmd_sweep(config, degrees, out);
    if (*ablate) return cmd_ablate(config, out);
    if (*eval) return cmd_eval(checkpoint, data, out.empty() ? fs::path(".") : fs::path(out));
    if (*report) return cmd_report(pattern, format, output);
  } catch (const coal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
