#include "coal/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "coal/errors.hpp"

namespace coal {

BatchPlan balanced_batches(const LabeledDataset& dataset, std::size_t batch_size,
                           std::uint64_t seed, std::size_t num_batches) {
  if (batch_size == 0) throw SamplerError("batch size must be positive");
  const std::size_t c = dataset.num_classes;
  auto queues = dataset.indices_by_class();
  for (std::size_t k = 0; k < c; ++k) {
    if (queues[k].empty()) throw SamplerError("class " + std::to_string(k) + " has no samples");
  }
  if (num_batches == 0) num_batches = (dataset.size() + batch_size - 1) / batch_size;

  std::mt19937_64 rng(seed);
  for (auto& q : queues) std::shuffle(q.begin(), q.end(), rng);
  std::vector<std::size_t> cursor(c, 0);
  std::vector<std::size_t> class_order(c);
  std::iota(class_order.begin(), class_order.end(), std::size_t{0});
  std::shuffle(class_order.begin(), class_order.end(), rng);

  auto draw = [&](std::size_t k) {
    if (cursor[k] == queues[k].size()) {
      std::shuffle(queues[k].begin(), queues[k].end(), rng);
      cursor[k] = 0;
    }
    return queues[k][cursor[k]++];
  };

  const std::size_t per_class = batch_size / c;
  const std::size_t extra = batch_size % c;
  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.batches.reserve(num_batches);
  for (std::size_t b = 0; b < num_batches; ++b) {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t j = 0; j < per_class; ++j) batch.push_back(draw(k));
    }
    for (std::size_t j = 0; j < extra; ++j) batch.push_back(draw(class_order[(b * extra + j) % c]));
    std::shuffle(batch.begin(), batch.end(), rng);
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

BatchPlan natural_batches(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw SamplerError("batch size must be positive");
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  BatchPlan plan;
  plan.batch_size = batch_size;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(dataset_size, start + batch_size);
    plan.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

BatchPlan make_batches(SamplerKind kind, const LabeledDataset& dataset, std::size_t batch_size,
                       std::uint64_t seed) {
  return kind == SamplerKind::balanced ? balanced_batches(dataset, batch_size, seed)
                                       : natural_batches(dataset.size(), batch_size, seed);
}

}  // namespace coal
