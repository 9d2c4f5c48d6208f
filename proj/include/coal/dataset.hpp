#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coal/tensor.hpp"

namespace coal {

/// Feature rows with integer class labels for one domain.
struct LabeledDataset {
  Tensor2 features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  /// Throws ConsistencyError / IndexError on broken invariants.
  void validate() const;
  std::vector<std::size_t> class_counts() const;
  /// Sample indices of each class, ascending.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

/// Seeded stratified split: returns (kept, held_out) where each class
/// contributes round(fraction * count) samples to the holdout, but at least
/// one when the class has two or more samples.
std::pair<LabeledDataset, LabeledDataset> stratified_holdout(const LabeledDataset& dataset,
                                                             double fraction, std::uint64_t seed);

}  // namespace coal
