#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coal/model.hpp"
#include "coal/report.hpp"
#include "coal/shift.hpp"
#include "coal/trainer.hpp"
#include "json.hpp"

namespace coal {

/// Where a domain's samples come from:
///   "synthetic"                 twin-Gaussian generator (source or target half)
///   "csv:<path>" or "<x>.csv"   CSV with header and trailing label column
///   "idx:<images>,<labels>"     MNIST-style IDX pair
struct DataConfig {
  std::string source = "synthetic";
  std::string target = "synthetic";
  std::optional<std::uint64_t> seed;  // defaults to the training seed
  TwinDomainConfig synthetic;
  bool shift_enabled = true;
  double pareto_alpha = 1.0;
  double degree = 100.0;
  std::size_t budget_source = 1000;
  std::size_t budget_target = 1000;
  std::size_t min_per_class = 2;
  double interval_width = 1.0;
  double holdout_fraction = 0.2;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string task;  // table column; defaults to "d=<degree>"
  TrainConfig train;
  ModelConfig model;
  DataConfig data;
  bool dump_pseudo_labels = false;

  std::uint64_t data_seed() const { return data.seed.value_or(train.seed); }
  ShiftSpec source_shift() const;
  ShiftSpec target_shift() const;
};

/// Strict parser: unknown keys raise ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Parses "synthetic:key=value,..." (keys: classes, dims, per_class, radius,
/// noise, rotation, tx, ty, seed, domain=source|target).
struct SyntheticSpec {
  TwinDomainConfig twin;
  std::uint64_t seed = 0;
  bool target = false;
};
SyntheticSpec parse_synthetic_spec(const std::string& text);

/// Loads a non-synthetic domain description (csv/idx).
LabeledDataset load_domain_file(const std::string& spec, std::size_t num_classes = 0);

struct BuiltData {
  DomainData domains;
  LabeledDataset target_full;  // shifted target before the holdout split
  std::vector<std::string> input_files;
};
BuiltData build_domain_data(const ExperimentConfig& config);

/// Dataset manifest: per-class counts, shift parameters, seed and SHA-256 of
/// the data file plus any input files.
nlohmann::json dataset_manifest(const LabeledDataset& dataset, const std::string& data_file,
                                const std::filesystem::path& dir,
                                const std::optional<ShiftSpec>& shift, std::uint64_t seed,
                                const std::vector<std::string>& input_files);
/// Reads a manifest and the CSV it points to.
LabeledDataset load_manifest_dataset(const std::filesystem::path& manifest_path);

/// Builds data, trains, and (when out_dir is set) writes report.json,
/// metrics.jsonl, checkpoint.json and dataset manifests.
RunReport run_experiment(const ExperimentConfig& config,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace coal
