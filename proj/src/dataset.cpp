#include "coal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "coal/errors.hpp"

namespace coal {

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw ConsistencyError("dataset '" + provenance + "' has " + std::to_string(features.rows()) +
                           " feature rows but " + std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw IndexError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.num_classes = num_classes;
  out.provenance = provenance;
  return out;
}

std::pair<LabeledDataset, LabeledDataset> stratified_holdout(const LabeledDataset& dataset,
                                                             double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw UsageError("holdout fraction must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep, held;
  for (auto members : dataset.indices_by_class()) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    if (fraction > 0.0 && members.size() >= 2) n_hold = std::max<std::size_t>(n_hold, 1);
    n_hold = std::min(n_hold, members.size());
    held.insert(held.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_hold));
    keep.insert(keep.end(), members.begin() + static_cast<std::ptrdiff_t>(n_hold), members.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(held.begin(), held.end());
  LabeledDataset a = dataset.subset(keep);
  LabeledDataset b = dataset.subset(held);
  a.provenance += "#train";
  b.provenance += "#holdout";
  return {std::move(a), std::move(b)};
}

}  // namespace coal
