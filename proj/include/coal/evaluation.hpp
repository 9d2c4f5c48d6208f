#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coal/objectives.hpp"
#include "coal/report.hpp"
#include "coal/tensor.hpp"

namespace coal {

/// counts(i, j): number of class-i samples predicted as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);
  static ConfusionMatrix from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                          std::size_t num_classes);
  /// Row-major c x c counts.
  static ConfusionMatrix from_counts(std::size_t num_classes, std::vector<std::size_t> counts);

  std::size_t num_classes() const { return c_; }
  std::size_t operator()(std::size_t i, std::size_t j) const { return counts_[i * c_ + j]; }
  void add(int truth, int predicted);
  std::size_t row_total(std::size_t i) const;
  std::size_t total() const;
  double overall_accuracy() const;

 private:
  std::size_t c_;
  std::vector<std::size_t> counts_;
};

/// Mean over classes of n(i,i)/n_i. Throws MetricError for a class with no
/// samples.
double per_class_mean_accuracy(const ConfusionMatrix& cm);

struct DistributionComparison {
  double js_distance = 0.0;
  double js_divergence = 0.0;
  double l1 = 0.0;
};
DistributionComparison compare_distributions(const LabelDistribution& estimated,
                                             const LabelDistribution& truth);

struct Projection2D {
  Tensor2 coordinates;  // n x 2
  Tensor2 components;   // d x 2, unit columns
  std::vector<double> variances;
  std::vector<std::string> warnings;
};

/// Projects mean-centered rows onto the two leading covariance eigenvectors
/// found by power iteration with deflation. Each component's largest-magnitude
/// entry is made positive so the result is deterministic.
Projection2D project_features_2d(const Tensor2& embeddings, std::size_t iterations = 5000,
                                 std::uint64_t seed = 0);

enum class TableFormat { csv, markdown };
TableFormat parse_table_format(const std::string& text);

/// Method-by-task grid of final per-class mean accuracy (percent, two
/// decimals). Rows are sorted by label; columns by shift degree when every
/// report carries one, otherwise by task name.
std::string render_table(std::span<const RunReport> reports, TableFormat format);

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
void write_projection_csv(const std::filesystem::path& path, const Projection2D& projection,
                          std::span<const int> labels);

}  // namespace coal
