#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coal/dataset.hpp"
#include "coal/objectives.hpp"

namespace coal {

/// Which way the long-tailed ranking is laid over class indices.
/// target_ranked: the r-th largest proportion goes to class r-1.
/// source_reversed: the ranking is mirrored (class c-1 is the head).
enum class ShiftDirection { target_ranked, source_reversed };

ShiftDirection parse_direction(const std::string& text);  // "ut" | "rs" and long names
std::string to_string(ShiftDirection direction);

/// Pareto weights x_r^-(alpha+1) at x_r = 1 + width (r-1)/(c-1), normalized;
/// strictly decreasing in rank r = 1..c.
LabelDistribution pareto_proportions(std::size_t num_classes, double alpha,
                                     double interval_width = 1.0);

struct ShiftSpec {
  double pareto_alpha = 1.0;
  ShiftDirection direction = ShiftDirection::target_ranked;
  double degree = 100.0;  // percent; 0 = balanced, 100 = full long tail
  std::size_t min_per_class = 2;
  std::size_t budget = 1000;
  double interval_width = 1.0;
};

/// (1 - d/100) uniform + (d/100) ranked Pareto, indexed by class.
LabelDistribution interpolated_proportions(std::size_t num_classes, const ShiftSpec& spec);

/// Largest-remainder apportionment of `total` over `proportions`; ties in
/// the fractional part go to the lower class index.
std::vector<std::size_t> largest_remainder_counts(const LabelDistribution& proportions,
                                                  std::size_t total);

/// Per-class counts requested by `spec`. Throws ProtocolError when a class
/// falls below spec.min_per_class.
std::vector<std::size_t> shift_counts(std::size_t num_classes, const ShiftSpec& spec);

/// Upper bound on the JS distance between requested proportions and the
/// realized integer counts after largest-remainder rounding.
double rounding_js_bound(std::size_t num_classes, std::size_t total);

/// Seeded class-wise sampling without replacement to the requested counts.
LabeledDataset build_shift(const LabeledDataset& dataset, const ShiftSpec& spec,
                           std::uint64_t seed);

/// Class-conditional Gaussians for a source domain and a rotated,
/// translated copy for the target.
struct TwinDomainConfig {
  std::size_t num_classes = 4;
  std::size_t dims = 2;
  std::size_t per_class = 500;
  double radius = 3.0;
  double noise = 1.0;
  double rotation_deg = 30.0;
  std::vector<double> translation;  // empty = no translation
  // Explicit class means (num_classes x dims); empty = evenly spaced on a
  // circle of `radius` in the first two dimensions.
  std::vector<std::vector<double>> means;
};

std::pair<LabeledDataset, LabeledDataset> generate_twin_domains(const TwinDomainConfig& config,
                                                                std::uint64_t seed);

}  // namespace coal
