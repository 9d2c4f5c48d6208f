#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coal/model.hpp"

namespace coal {

/// Class proportions; nonnegative and summing to one.
class LabelDistribution {
 public:
  LabelDistribution() = default;
  /// Validates (sum within 1e-9 of one, no negatives).
  explicit LabelDistribution(std::vector<double> proportions);
  /// Normalizes nonnegative weights (e.g. counts) into a distribution.
  static LabelDistribution from_weights(std::span<const double> weights);
  static LabelDistribution uniform(std::size_t classes);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& proportions() const { return p_; }

 private:
  std::vector<double> p_;
};

/// Jensen-Shannon divergence in nats.
double js_divergence(const LabelDistribution& p, const LabelDistribution& q);
/// Square root of js_divergence; lies in [0, sqrt(ln 2)].
double js_distance(const LabelDistribution& p, const LabelDistribution& q);

/// 1/2 (d_JS(p, q) - feature_distance)^2: lower bound on the sum of source
/// and target errors. `feature_distance` is the JS distance between the
/// domains' input marginals when known, otherwise 0.
double js_label_bound(const LabelDistribution& p, const LabelDistribution& q,
                      double feature_distance = 0.0);

struct LossBreakdown {
  double l_sc = 0.0;
  double l_target_pseudo = 0.0;
  double l_st = 0.0;
  double l_h = 0.0;
  double alpha = 0.0;
};

struct ObjectiveResult {
  double value = 0.0;
  Gradients gradients;
};

/// Mean prototype cross-entropy on labeled source samples.
ObjectiveResult source_classification_loss(const ModelParams& params, const Tensor2& inputs,
                                           std::span<const int> labels);

struct SelfTrainingResult {
  LossBreakdown losses;
  Gradients gradients;
};

/// Source loss plus the masked mean cross-entropy of target pseudo-labels.
/// An all-zero mask reduces exactly to source_classification_loss.
SelfTrainingResult self_training_loss(const ModelParams& params, const Tensor2& source_inputs,
                                      std::span<const int> source_labels,
                                      const Tensor2& target_inputs,
                                      std::span<const int> pseudo_labels,
                                      std::span<const std::uint8_t> mask);

/// Gradient of scale * L_H for every block with no reversal boundary.
ObjectiveResult entropy_naive(const ModelParams& params, const Tensor2& target_inputs,
                              double scale = 1.0);

/// Minimax entropy routing. C receives d(-alpha L_H); the gradient that
/// crosses the reversal boundary into F is multiplied by -lambda, so with
/// lambda = 1 F receives d(+alpha L_H). `value` is the unscaled L_H.
ObjectiveResult entropy_objective(const ModelParams& params, const Tensor2& target_inputs,
                                  double alpha, GrlCoefficient boundary = GrlCoefficient(1.0));

struct AdaptiveTerms {
  bool pseudo = true;
  bool entropy = true;
};

struct AdaptiveResult {
  LossBreakdown losses;
  Gradients gradients;
  std::size_t masked_in_batch = 0;
};

/// One combined backward pass of L_ST with the entropy minimax term:
/// C minimizes L_ST - alpha L_H while F minimizes L_ST + alpha L_H.
/// Disabled terms are still evaluated for reporting but add no gradient;
/// a disabled pseudo term is reported as 0 and a disabled entropy term
/// reports alpha as 0.
AdaptiveResult adaptive_objective(const ModelParams& params, const Tensor2& source_inputs,
                                  std::span<const int> source_labels,
                                  const Tensor2& target_inputs, std::span<const int> pseudo_labels,
                                  std::span<const std::uint8_t> mask, double alpha,
                                  AdaptiveTerms terms = {});

/// Source classification plus a domain-confusion loss whose gradient
/// reaches F through a reversal boundary (marginal feature alignment).
struct MarginalAlignResult {
  double l_sc = 0.0;
  double l_domain = 0.0;
  double discriminator_accuracy = 0.0;
  Gradients gradients;
};
MarginalAlignResult marginal_alignment_objective(const ModelParams& params,
                                                 const Tensor2& source_inputs,
                                                 std::span<const int> source_labels,
                                                 const Tensor2& target_inputs, double weight,
                                                 GrlCoefficient boundary = GrlCoefficient(1.0));

}  // namespace coal
