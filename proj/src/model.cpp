#include "coal/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "coal/errors.hpp"

namespace coal {

namespace {

std::size_t prototype_index(const ModelParams& p) { return 2 * p.extractor.size(); }

}  // namespace

std::vector<ParamBlock*> ModelParams::blocks() {
  std::vector<ParamBlock*> out;
  for (auto& layer : extractor) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
  out.push_back(&prototypes);
  out.push_back(&disc_weights);
  out.push_back(&disc_bias);
  return out;
}

std::vector<const ParamBlock*> ModelParams::blocks() const {
  std::vector<const ParamBlock*> out;
  for (const auto& layer : extractor) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
  out.push_back(&prototypes);
  out.push_back(&disc_weights);
  out.push_back(&disc_bias);
  return out;
}

std::vector<BlockRole> ModelParams::roles() const {
  std::vector<BlockRole> out(2 * extractor.size(), BlockRole::extractor);
  out.push_back(BlockRole::classifier);
  out.push_back(BlockRole::discriminator);
  out.push_back(BlockRole::discriminator);
  return out;
}

void ModelParams::zero_grad() {
  for (ParamBlock* b : blocks()) b->zero_grad();
}

void ModelParams::validate() const {
  if (!(temperature > 0.0)) throw UsageError("temperature must be > 0");
  if (extractor.empty()) throw UsageError("model needs at least one extractor layer");
  std::size_t width = input_dim();
  for (const auto& layer : extractor) {
    if (layer.weights.value.rows() != width || layer.bias.value.rows() != 1 ||
        layer.bias.value.cols() != layer.weights.value.cols()) {
      throw DimensionError("extractor layer '" + layer.weights.name + "' has shape " +
                           layer.weights.value.shape_string() + " after width " +
                           std::to_string(width));
    }
    width = layer.weights.value.cols();
  }
  if (prototypes.value.rows() != width) {
    throw DimensionError("prototype matrix " + prototypes.value.shape_string() +
                         " does not match embedding dimension " + std::to_string(width));
  }
  if (disc_weights.value.rows() != width || disc_weights.value.cols() != 2 ||
      disc_bias.value.rows() != 1 || disc_bias.value.cols() != 2) {
    throw DimensionError("discriminator head has shape " + disc_weights.value.shape_string());
  }
}

ModelParams init_model(const ModelConfig& config) {
  if (config.layer_widths.empty()) throw UsageError("layer_widths must not be empty");
  if (config.num_classes < 2) throw UsageError("need at least 2 classes");
  if (config.input_dim == 0) throw UsageError("input_dim must be positive");
  if (!(config.temperature > 0.0)) throw UsageError("temperature must be > 0");

  std::mt19937_64 rng(config.seed);
  ModelParams p;
  p.temperature = config.temperature;
  p.seed = config.seed;

  std::size_t fan_in = config.input_dim;
  for (std::size_t l = 0; l < config.layer_widths.size(); ++l) {
    const std::size_t width = config.layer_widths[l];
    if (width == 0) throw UsageError("layer widths must be positive");
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Tensor2 w(fan_in, width);
    for (double& v : w.data()) v = gauss(rng);
    const std::string tag = "extractor." + std::to_string(l);
    p.extractor.push_back({ParamBlock(tag + ".weight", std::move(w)),
                           ParamBlock(tag + ".bias", Tensor2(1, width))});
    fan_in = width;
  }

  const std::size_t d = fan_in;
  const std::size_t c = config.num_classes;
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  Tensor2 w(d, c);
  for (double& v : w.data()) v = gauss(rng);
  for (std::size_t j = 0; j < c; ++j) {
    double n = 0.0;
    for (std::size_t i = 0; i < d; ++i) n += w(i, j) * w(i, j);
    n = std::sqrt(n);
    if (n > 0.0) {
      for (std::size_t i = 0; i < d; ++i) w(i, j) /= n;
    }
  }
  p.prototypes = ParamBlock("classifier.prototypes", std::move(w));
  p.disc_weights = ParamBlock("discriminator.weight", Tensor2(d, 2));
  p.disc_bias = ParamBlock("discriminator.bias", Tensor2(1, 2));
  return p;
}

Gradients Gradients::zeros_like(const ModelParams& params) {
  Gradients g;
  for (const ParamBlock* b : params.blocks()) g.per_block.emplace_back(b->value.rows(), b->value.cols());
  return g;
}

void Gradients::add_scaled(const Gradients& other, double scale, std::span<const BlockRole> roles,
                           std::span<const BlockRole> block_roles) {
  if (other.per_block.size() != per_block.size()) {
    throw DimensionError("gradient sets have different block counts");
  }
  for (std::size_t i = 0; i < per_block.size(); ++i) {
    if (!roles.empty() &&
        std::find(roles.begin(), roles.end(), block_roles[i]) == roles.end()) {
      continue;
    }
    auto& dst = per_block[i].data();
    const auto& src = other.per_block[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

void Gradients::scale_role(BlockRole role, double factor, std::span<const BlockRole> block_roles) {
  for (std::size_t i = 0; i < per_block.size(); ++i) {
    if (block_roles[i] != role) continue;
    for (double& v : per_block[i].data()) v *= factor;
  }
}

void Gradients::accumulate_into(ModelParams& params) const {
  auto blocks = params.blocks();
  if (blocks.size() != per_block.size()) throw DimensionError("gradient set does not match model");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& dst = blocks[i]->gradient.data();
    const auto& src = per_block[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

double Gradients::max_abs_difference(const Gradients& other) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < per_block.size(); ++i) {
    const auto& a = per_block[i].data();
    const auto& b = other.per_block[i].data();
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  }
  return worst;
}

ExtractorCache extract_features_cached(const ModelParams& params, const Tensor2& inputs) {
  if (inputs.cols() != params.input_dim()) {
    throw DimensionError("extract_features: inputs " + inputs.shape_string() +
                         " but first layer expects " + std::to_string(params.input_dim()) +
                         " columns");
  }
  ExtractorCache cache;
  Tensor2 h = inputs;
  for (const auto& layer : params.extractor) {
    Tensor2 pre = linear_forward(h, layer.weights, layer.bias);
    cache.layer_inputs.push_back(std::move(h));
    h = relu_forward(pre);
    cache.pre_activations.push_back(std::move(pre));
  }
  cache.embeddings = std::move(h);
  return cache;
}

Tensor2 extract_features(const ModelParams& params, const Tensor2& inputs) {
  return extract_features_cached(params, inputs).embeddings;
}

ClassifierCache classifier_forward(const ModelParams& params, const Tensor2& embeddings) {
  if (embeddings.cols() != params.embedding_dim()) {
    throw DimensionError("classifier: embeddings " + embeddings.shape_string() +
                         " vs prototypes " + params.prototypes.value.shape_string());
  }
  ClassifierCache head;
  head.normalized = l2_normalize_rows(embeddings, kNormEpsilon, &head.norms);
  head.logits = linear_forward(head.normalized, params.prototypes.value,
                               Tensor2(1, params.num_classes()));
  const double inv_t = 1.0 / params.temperature;
  for (double& v : head.logits.data()) v *= inv_t;
  head.probabilities = softmax_rows(head.logits);
  return head;
}

ForwardPass forward(const ModelParams& params, const Tensor2& inputs) {
  ForwardPass pass;
  pass.features = extract_features_cached(params, inputs);
  pass.head = classifier_forward(params, pass.features.embeddings);
  return pass;
}

Prediction classify(const ModelParams& params, const Tensor2& inputs) {
  ForwardPass pass = forward(params, inputs);
  return {std::move(pass.head.probabilities), std::move(pass.features.embeddings)};
}

Prediction classify_embeddings(const ModelParams& params, const Tensor2& embeddings) {
  ClassifierCache head = classifier_forward(params, embeddings);
  return {std::move(head.probabilities), embeddings};
}

Tensor2 discriminator_logits(const ModelParams& params, const Tensor2& embeddings) {
  return linear_forward(embeddings, params.disc_weights, params.disc_bias);
}

std::vector<double> discriminate_domain(const ModelParams& params, const Tensor2& embeddings) {
  const Tensor2 probs = softmax_rows(discriminator_logits(params, embeddings));
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) out[i] = probs(i, 1);
  return out;
}

Tensor2 classifier_backward(const ModelParams& params, const ExtractorCache& features,
                            const ClassifierCache& head, const Tensor2& grad_logits,
                            Gradients& grads) {
  const double inv_t = 1.0 / params.temperature;
  Tensor2 scaled = grad_logits;
  for (double& v : scaled.data()) v *= inv_t;
  Tensor2 unused_bias(1, params.num_classes());
  Tensor2 grad_normalized = linear_backward(head.normalized, params.prototypes.value, scaled,
                                            grads.per_block[prototype_index(params)], unused_bias);
  return l2_normalize_rows_backward(features.embeddings, head.norms, grad_normalized);
}

void extractor_backward(const ModelParams& params, const ExtractorCache& features,
                        const Tensor2& grad_embeddings, Gradients& grads) {
  Tensor2 g = grad_embeddings;
  for (std::size_t l = params.extractor.size(); l-- > 0;) {
    g = relu_backward(features.pre_activations[l], g);
    g = linear_backward(features.layer_inputs[l], params.extractor[l].weights.value, g,
                        grads.per_block[2 * l], grads.per_block[2 * l + 1]);
  }
}

Tensor2 discriminator_backward(const ModelParams& params, const Tensor2& embeddings,
                               const Tensor2& grad_logits, Gradients& grads) {
  const std::size_t base = prototype_index(params) + 1;
  return linear_backward(embeddings, params.disc_weights.value, grad_logits,
                         grads.per_block[base], grads.per_block[base + 1]);
}

KinkProbe relu_probe(const ModelParams& params, const Tensor2& inputs) {
  const ExtractorCache cache = extract_features_cached(params, inputs);
  KinkProbe probe;
  probe.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& pre : cache.pre_activations) {
    for (double v : pre.data()) {
      probe.pattern.push_back(v > 0.0 ? 1 : 0);
      probe.min_margin = std::min(probe.min_margin, std::abs(v));
    }
  }
  return probe;
}

std::vector<int> argmax_rows(const Tensor2& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    const auto r = probabilities.row(i);
    // max_element returns the first maximum: ties go to the lowest index.
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

}  // namespace coal
