#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "coal/dataset.hpp"
#include "coal/model.hpp"
#include "coal/report.hpp"
#include "coal/sampler.hpp"
#include "coal/selftrain.hpp"
#include "coal/shift.hpp"
#include "json.hpp"

namespace coal {

enum class Method { coal, source_only, marginal_align };

Method parse_method(const std::string& text);
std::string to_string(Method method);
SamplerKind parse_sampler(const std::string& text);
std::string to_string(SamplerKind kind);

struct Ablations {
  bool disable_pseudo = false;
  bool disable_entropy = false;
};

struct TrainConfig {
  Method method = Method::coal;
  std::size_t epochs = 30;
  std::size_t pretrain_epochs = 10;
  std::size_t batch_size = 32;
  double lr_classifier = 0.01;  // prototype matrix and discriminator head
  double lr_other = 0.001;      // extractor layers
  double momentum = 0.9;
  double alpha = 0.1;
  KSchedule k_schedule = KSchedule::standard();
  SamplerKind sampler = SamplerKind::balanced;
  Ablations ablations;
  double adversarial_weight = 1.0;  // marginal-align domain loss weight
  std::uint64_t seed = 0;

  /// Throws ConfigError for inconsistent settings.
  void validate() const;
  /// Row label used in tables, e.g. "coal", "coal-no-entropy".
  std::string label() const;
};

/// Source, unlabeled target (labels kept only for diagnostics) and the
/// labeled target holdout used for reporting.
struct DomainData {
  LabeledDataset source;
  LabeledDataset target_train;
  LabeledDataset target_eval;
};

/// One JSON object per optimizer step, for metrics.jsonl.
using StepSink = std::function<void(const nlohmann::json&)>;

/// Per-class mean accuracy of the model on a labeled dataset.
double evaluate_accuracy(const ModelParams& params, const LabeledDataset& data);

/// Splitmix-style seed derivation so independent RNG streams (per purpose
/// and epoch) never share state.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose, std::uint64_t epoch);

std::vector<double> learning_rates_for(const ModelParams& params, const TrainConfig& config);

/// Source batches for one adaptation epoch, shared by every method so that
/// runs with the same seed see identical source batches.
BatchPlan source_plan(const LabeledDataset& source, const TrainConfig& config, std::size_t epoch,
                      std::size_t steps);
BatchPlan target_plan(const LabeledDataset& target, const TrainConfig& config, std::size_t epoch);
std::size_t steps_per_epoch(const DomainData& data, const TrainConfig& config);

/// Trains F and C on labeled source data only (classification loss).
void pretrain(ModelParams& params, const LabeledDataset& source, const TrainConfig& config,
              const StepSink& sink = {});

/// Step A (pseudo-labels, per-class top-k selection) followed by step B
/// (one optimizer step per paired source/target batch).
EpochRecord run_coal_epoch(ModelParams& params, const DomainData& data, const TrainConfig& config,
                           std::size_t epoch, const StepSink& sink = {},
                           PseudoLabelSet* pseudo_out = nullptr);

/// Source classification with gradient-reversed domain confusion.
EpochRecord run_marginal_align_epoch(ModelParams& params, const DomainData& data,
                                     const TrainConfig& config, std::size_t epoch,
                                     const StepSink& sink = {});

/// Continued source-only training over the same batch schedule.
EpochRecord run_source_only_epoch(ModelParams& params, const DomainData& data,
                                  const TrainConfig& config, std::size_t epoch,
                                  const StepSink& sink = {});

/// Pretraining followed by config.epochs adaptation epochs of the chosen
/// method. The report's config/label/task fields are left to the caller.
RunReport train(ModelParams& params, const DomainData& data, const TrainConfig& config,
                const StepSink& sink = {},
                const std::function<void(const PseudoLabelSet&, std::size_t)>& pseudo_hook = {});

}  // namespace coal
