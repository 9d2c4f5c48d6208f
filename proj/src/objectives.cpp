#include "coal/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coal/errors.hpp"

namespace coal {

LabelDistribution::LabelDistribution(std::vector<double> proportions) : p_(std::move(proportions)) {
  if (p_.empty()) throw UsageError("label distribution needs at least one class");
  double total = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("label distribution has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw UsageError("label distribution sums to " + std::to_string(total));
  }
}

LabelDistribution LabelDistribution::from_weights(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw UsageError("cannot normalize all-zero weights");
  std::vector<double> p(weights.begin(), weights.end());
  for (double& v : p) v /= total;
  return LabelDistribution(std::move(p));
}

LabelDistribution LabelDistribution::uniform(std::size_t classes) {
  return LabelDistribution(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

double js_divergence(const LabelDistribution& p, const LabelDistribution& q) {
  if (p.size() != q.size()) {
    throw DimensionError("js_divergence: " + std::to_string(p.size()) + " vs " +
                         std::to_string(q.size()) + " classes");
  }
  double div = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) div += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) div += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(div, 0.0, std::log(2.0));
}

double js_distance(const LabelDistribution& p, const LabelDistribution& q) {
  return std::sqrt(js_divergence(p, q));
}

double js_label_bound(const LabelDistribution& p, const LabelDistribution& q,
                      double feature_distance) {
  const double gap = js_distance(p, q) - feature_distance;
  return 0.5 * gap * gap;
}

namespace {

// Moves one unit gradient set across the F/C reversal boundary: blocks on
// the C side get `downstream_scale`, F blocks get the boundary's -lambda
// applied on top of the same scale.
void route_across_boundary(Gradients& g, const std::vector<BlockRole>& roles,
                           BlockRole downstream, double downstream_scale, GrlCoefficient boundary) {
  g.scale_role(downstream, downstream_scale, roles);
  g.scale_role(BlockRole::extractor, downstream_scale, roles);
  g.scale_role(BlockRole::extractor, -boundary.lambda(), roles);
}

}  // namespace

ObjectiveResult source_classification_loss(const ModelParams& params, const Tensor2& inputs,
                                           std::span<const int> labels) {
  if (inputs.rows() == 0) throw UsageError("source_classification_loss: empty batch");
  ObjectiveResult result{0.0, Gradients::zeros_like(params)};
  const ForwardPass pass = forward(params, inputs);
  LossWithGrad ce = softmax_cross_entropy(pass.head.logits, labels);
  result.value = ce.value;
  const Tensor2 d_emb =
      classifier_backward(params, pass.features, pass.head, ce.gradient, result.gradients);
  extractor_backward(params, pass.features, d_emb, result.gradients);
  return result;
}

SelfTrainingResult self_training_loss(const ModelParams& params, const Tensor2& source_inputs,
                                      std::span<const int> source_labels,
                                      const Tensor2& target_inputs,
                                      std::span<const int> pseudo_labels,
                                      std::span<const std::uint8_t> mask) {
  ObjectiveResult src = source_classification_loss(params, source_inputs, source_labels);
  SelfTrainingResult result;
  result.losses.l_sc = src.value;
  result.gradients = std::move(src.gradients);
  const bool any = std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
  if (any && target_inputs.rows() > 0) {
    const ForwardPass pass = forward(params, target_inputs);
    LossWithGrad ce = softmax_cross_entropy(pass.head.logits, pseudo_labels, mask);
    result.losses.l_target_pseudo = ce.value;
    Gradients tgt = Gradients::zeros_like(params);
    const Tensor2 d_emb = classifier_backward(params, pass.features, pass.head, ce.gradient, tgt);
    extractor_backward(params, pass.features, d_emb, tgt);
    result.gradients.add_scaled(tgt, 1.0);
  }
  result.losses.l_st = result.losses.l_sc + result.losses.l_target_pseudo;
  return result;
}

ObjectiveResult entropy_naive(const ModelParams& params, const Tensor2& target_inputs,
                              double scale) {
  ObjectiveResult result{0.0, Gradients::zeros_like(params)};
  if (target_inputs.rows() == 0) return result;
  const ForwardPass pass = forward(params, target_inputs);
  LossWithGrad h = mean_entropy(pass.head.probabilities);
  result.value = h.value;
  const Tensor2 d_emb =
      classifier_backward(params, pass.features, pass.head, h.gradient, result.gradients);
  extractor_backward(params, pass.features, d_emb, result.gradients);
  if (scale != 1.0) {
    for (auto& t : result.gradients.per_block) {
      for (double& v : t.data()) v *= scale;
    }
  }
  return result;
}

ObjectiveResult entropy_objective(const ModelParams& params, const Tensor2& target_inputs,
                                  double alpha, GrlCoefficient boundary) {
  if (!(alpha >= 0.0)) throw UsageError("entropy_objective: alpha must be >= 0");
  ObjectiveResult result = entropy_naive(params, target_inputs, 1.0);
  if (alpha == 0.0) {
    result.gradients = Gradients::zeros_like(params);
    return result;
  }
  route_across_boundary(result.gradients, params.roles(), BlockRole::classifier, -alpha, boundary);
  return result;
}

AdaptiveResult adaptive_objective(const ModelParams& params, const Tensor2& source_inputs,
                                  std::span<const int> source_labels,
                                  const Tensor2& target_inputs, std::span<const int> pseudo_labels,
                                  std::span<const std::uint8_t> mask, double alpha,
                                  AdaptiveTerms terms) {
  if (!(alpha >= 0.0)) throw UsageError("adaptive_objective: alpha must be >= 0");
  AdaptiveResult result;
  result.losses.alpha = terms.entropy ? alpha : 0.0;

  ObjectiveResult src = source_classification_loss(params, source_inputs, source_labels);
  result.losses.l_sc = src.value;
  result.gradients = std::move(src.gradients);

  result.masked_in_batch = static_cast<std::size_t>(
      std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));

  if (target_inputs.rows() > 0) {
    const ForwardPass pass = forward(params, target_inputs);
    const LossWithGrad h = mean_entropy(pass.head.probabilities);
    result.losses.l_h = h.value;

    const bool use_pseudo = terms.pseudo && result.masked_in_batch > 0;
    const bool use_entropy = terms.entropy && alpha > 0.0;
    if (use_pseudo || use_entropy) {
      Gradients tgt = Gradients::zeros_like(params);
      Tensor2 d_emb(pass.features.embeddings.rows(), pass.features.embeddings.cols());
      if (use_pseudo) {
        const LossWithGrad ce = softmax_cross_entropy(pass.head.logits, pseudo_labels, mask);
        result.losses.l_target_pseudo = ce.value;
        d_emb = classifier_backward(params, pass.features, pass.head, ce.gradient, tgt);
      }
      if (use_entropy) {
        // C side sees -alpha dL_H; the boundary flips it to +alpha dL_H for F.
        Gradients ent = Gradients::zeros_like(params);
        const Tensor2 d_emb_h = classifier_backward(params, pass.features, pass.head, h.gradient, ent);
        const auto roles = params.roles();
        const BlockRole head_role[] = {BlockRole::classifier};
        tgt.add_scaled(ent, -alpha, head_role, roles);
        const double into_f = -(-alpha);
        for (std::size_t i = 0; i < d_emb.size(); ++i) d_emb.data()[i] += into_f * d_emb_h.data()[i];
      }
      extractor_backward(params, pass.features, d_emb, tgt);
      result.gradients.add_scaled(tgt, 1.0);
    }
  }
  result.losses.l_st = result.losses.l_sc + result.losses.l_target_pseudo;
  return result;
}

MarginalAlignResult marginal_alignment_objective(const ModelParams& params,
                                                 const Tensor2& source_inputs,
                                                 std::span<const int> source_labels,
                                                 const Tensor2& target_inputs, double weight,
                                                 GrlCoefficient boundary) {
  MarginalAlignResult result;
  ObjectiveResult src = source_classification_loss(params, source_inputs, source_labels);
  result.l_sc = src.value;
  result.gradients = std::move(src.gradients);

  const ExtractorCache fs = extract_features_cached(params, source_inputs);
  const ExtractorCache ft = extract_features_cached(params, target_inputs);
  const std::size_t ns = fs.embeddings.rows();
  const std::size_t nt = ft.embeddings.rows();
  const std::size_t d = fs.embeddings.cols();
  Tensor2 raw(ns + nt, d);
  std::copy(fs.embeddings.data().begin(), fs.embeddings.data().end(), raw.data().begin());
  std::copy(ft.embeddings.data().begin(), ft.embeddings.data().end(),
            raw.data().begin() + static_cast<std::ptrdiff_t>(ns * d));
  // The discriminator sees the same unit-norm features as the prototype head.
  std::vector<double> norms;
  const Tensor2 emb = l2_normalize_rows(raw, kNormEpsilon, &norms);
  std::vector<int> domain(ns + nt, 0);
  std::fill(domain.begin() + static_cast<std::ptrdiff_t>(ns), domain.end(), 1);

  const Tensor2 logits = discriminator_logits(params, emb);
  const LossWithGrad ce = softmax_cross_entropy(logits, domain);
  result.l_domain = ce.value;
  const std::vector<int> guess = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < guess.size(); ++i) hits += guess[i] == domain[i] ? 1 : 0;
  result.discriminator_accuracy = static_cast<double>(hits) / static_cast<double>(guess.size());

  if (weight > 0.0) {
    Gradients dom = Gradients::zeros_like(params);
    const Tensor2 d_emb =
        l2_normalize_rows_backward(raw, norms, discriminator_backward(params, emb, ce.gradient, dom));
    Tensor2 d_s(ns, d), d_t(nt, d);
    std::copy_n(d_emb.data().begin(), ns * d, d_s.data().begin());
    std::copy(d_emb.data().begin() + static_cast<std::ptrdiff_t>(ns * d), d_emb.data().end(),
              d_t.data().begin());
    extractor_backward(params, fs, d_s, dom);
    extractor_backward(params, ft, d_t, dom);
    route_across_boundary(dom, params.roles(), BlockRole::discriminator, weight, boundary);
    result.gradients.add_scaled(dom, 1.0);
  }
  return result;
}

}  // namespace coal
