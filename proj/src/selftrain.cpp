#include "coal/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "coal/errors.hpp"

namespace coal {

std::size_t PseudoLabelSet::masked_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

KSchedule KSchedule::preset(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "digits") return digits();
  if (name == "svhn") return svhn();
  throw ConfigError("unknown k schedule preset '" + name + "'");
}

double advance_k(const KSchedule& schedule, std::size_t epoch) {
  return std::min(schedule.k0 + static_cast<double>(epoch) * schedule.k_step, schedule.k_max);
}

PseudoAssignment assign_from_probabilities(const Tensor2& probabilities) {
  PseudoAssignment out;
  out.labels = argmax_rows(probabilities);
  out.confidence.resize(out.labels.size());
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    out.confidence[i] = probabilities(i, static_cast<std::size_t>(out.labels[i]));
  }
  return out;
}

PseudoAssignment assign_pseudo_labels(const ModelParams& params, const Tensor2& target_inputs) {
  return assign_from_probabilities(classify(params, target_inputs).probabilities);
}

std::size_t selection_quota(std::size_t class_size, double k_percent) {
  if (!(k_percent >= 0.0 && k_percent <= 100.0)) {
    throw UsageError("k must lie in [0, 100], got " + std::to_string(k_percent));
  }
  if (class_size == 0 || k_percent == 0.0) return 0;
  // The 1e-9 slack keeps exact products such as 30% of 10 from rounding up
  // through representation error.
  const double raw = k_percent * static_cast<double>(class_size) / 100.0;
  auto quota = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(quota, 1, class_size);
}

PseudoLabelSet select_top_k_per_class(const PseudoAssignment& assignment, double k_percent) {
  if (assignment.labels.size() != assignment.confidence.size()) {
    throw DimensionError("pseudo assignment labels and confidences differ in length");
  }
  PseudoLabelSet out;
  out.labels = assignment.labels;
  out.confidence = assignment.confidence;
  out.mask.assign(out.labels.size(), 0);
  out.k_percent = k_percent;

  const int max_label =
      out.labels.empty() ? -1 : *std::max_element(out.labels.begin(), out.labels.end());
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (out.labels[i] < 0) throw IndexError("negative pseudo-label at sample " + std::to_string(i));
    by_class[static_cast<std::size_t>(out.labels[i])].push_back(i);
  }
  for (auto& members : by_class) {
    const std::size_t quota = selection_quota(members.size(), k_percent);
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return out.confidence[a] > out.confidence[b];
    });
    for (std::size_t j = 0; j < quota; ++j) out.mask[members[j]] = 1;
  }
  return out;
}

LabelDistribution estimate_target_distribution(const PseudoLabelSet& pseudo,
                                               std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    if (pseudo.mask[i] == 0) continue;
    const auto label = static_cast<std::size_t>(pseudo.labels[i]);
    if (label >= num_classes) throw IndexError("pseudo-label " + std::to_string(label) + " >= class count");
    counts[label] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) throw EstimationError("no masked pseudo-labels to estimate a distribution from");
  return LabelDistribution::from_weights(counts);
}

void write_pseudo_label_csv(const std::filesystem::path& path, const PseudoLabelSet& pseudo) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "sample_id,pseudo_label,confidence,mask\n" << std::setprecision(17);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    out << i << ',' << pseudo.labels[i] << ',' << pseudo.confidence[i] << ','
        << static_cast<int>(pseudo.mask[i]) << '\n';
  }
}

}  // namespace coal
