#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coal/model.hpp"
#include "coal/objectives.hpp"

namespace coal {

/// Argmax pseudo-label and its probability for every target sample.
struct PseudoAssignment {
  std::vector<int> labels;
  std::vector<double> confidence;
};

/// Pseudo-labels plus the per-class top-k% selection mask for one epoch.
struct PseudoLabelSet {
  std::vector<int> labels;
  std::vector<double> confidence;
  std::vector<std::uint8_t> mask;
  double k_percent = 0.0;

  std::size_t size() const { return labels.size(); }
  std::size_t masked_count() const;
};

/// k(epoch) = min(k0 + epoch * k_step, k_max), in percent.
struct KSchedule {
  double k0 = 5.0;
  double k_step = 5.0;
  double k_max = 30.0;

  static KSchedule standard() { return {5.0, 5.0, 30.0}; }
  static KSchedule digits() { return {20.0, 5.0, 50.0}; }
  static KSchedule svhn() { return {5.0, 5.0, 10.0}; }
  /// Resolves "standard", "digits" or "svhn".
  static KSchedule preset(const std::string& name);
};

double advance_k(const KSchedule& schedule, std::size_t epoch);

/// Ties between equal probabilities go to the lowest class index.
PseudoAssignment assign_from_probabilities(const Tensor2& probabilities);
PseudoAssignment assign_pseudo_labels(const ModelParams& params, const Tensor2& target_inputs);

/// Number of samples kept from a pseudo-class of `class_size` at k percent:
/// ceil(k/100 * size), at least one when the class is nonempty and k > 0.
std::size_t selection_quota(std::size_t class_size, double k_percent);

/// Within each pseudo-class, masks the selection_quota highest-confidence
/// samples; equal confidences are ordered by sample index.
PseudoLabelSet select_top_k_per_class(const PseudoAssignment& assignment, double k_percent);

/// Masked-count proportions per class. Throws EstimationError when nothing
/// is masked.
LabelDistribution estimate_target_distribution(const PseudoLabelSet& pseudo,
                                               std::size_t num_classes);

/// CSV audit dump: sample_id,pseudo_label,confidence,mask
void write_pseudo_label_csv(const std::filesystem::path& path, const PseudoLabelSet& pseudo);

}  // namespace coal
