#pragma once

#include <cstdint>
#include <vector>

#include "coal/dataset.hpp"

namespace coal {

/// Ordered mini-batches of sample indices for one epoch.
struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
  std::size_t batch_size = 0;
};

enum class SamplerKind { balanced, natural };

/// Class-balanced batches. Each batch draws floor(B/c) samples from every
/// class; the B mod c extra slots rotate round-robin over a class order
/// shuffled once per plan. Per-class queues reshuffle when exhausted, so
/// minority classes are oversampled. `num_batches` = 0 means ceil(N/B).
BatchPlan balanced_batches(const LabeledDataset& dataset, std::size_t batch_size,
                           std::uint64_t seed, std::size_t num_batches = 0);

/// Shuffled pass over every index exactly once; the last batch may be short.
BatchPlan natural_batches(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

BatchPlan make_batches(SamplerKind kind, const LabeledDataset& dataset, std::size_t batch_size,
                       std::uint64_t seed);

}  // namespace coal
