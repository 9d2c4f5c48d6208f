#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coal/numerics.hpp"
#include "coal/tensor.hpp"

namespace coal {

struct ModelConfig {
  std::size_t input_dim = 2;
  // Widths of the extractor's Linear+ReLU layers; the last one is the
  // embedding dimension d.
  std::vector<std::size_t> layer_widths{32, 16};
  std::size_t num_classes = 4;
  double temperature = 0.05;
  std::uint64_t seed = 0;
};

enum class BlockRole { extractor, classifier, discriminator };

struct LinearLayer {
  ParamBlock weights;
  ParamBlock bias;
};

/// Feature extractor F (stack of Linear+ReLU), cosine prototype classifier C
/// with weight matrix W (d x c) and fixed temperature T, and a linear
/// two-way domain discriminator over embeddings.
class ModelParams {
 public:
  std::vector<LinearLayer> extractor;
  ParamBlock prototypes;
  ParamBlock disc_weights;
  ParamBlock disc_bias;
  double temperature = 0.05;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return extractor.front().weights.value.rows(); }
  std::size_t embedding_dim() const { return prototypes.value.rows(); }
  std::size_t num_classes() const { return prototypes.value.cols(); }

  /// Every trainable block in a fixed order; roles() is parallel to it.
  std::vector<ParamBlock*> blocks();
  std::vector<const ParamBlock*> blocks() const;
  std::vector<BlockRole> roles() const;

  void zero_grad();
  /// Throws if shapes or temperature violate the model's invariants.
  void validate() const;
};

ModelParams init_model(const ModelConfig& config);

/// Per-block gradient tensors, parallel to ModelParams::blocks().
struct Gradients {
  std::vector<Tensor2> per_block;

  static Gradients zeros_like(const ModelParams& params);
  /// this += scale * other, restricted to blocks whose role is in `roles`
  /// (all blocks when `roles` is empty).
  void add_scaled(const Gradients& other, double scale, std::span<const BlockRole> roles = {},
                  std::span<const BlockRole> block_roles = {});
  /// Multiplies the blocks of one role by `factor`.
  void scale_role(BlockRole role, double factor, std::span<const BlockRole> block_roles);
  /// Adds into the ParamBlock gradient slots.
  void accumulate_into(ModelParams& params) const;
  double max_abs_difference(const Gradients& other) const;
};

struct ExtractorCache {
  std::vector<Tensor2> layer_inputs;
  std::vector<Tensor2> pre_activations;
  Tensor2 embeddings;
};

struct ClassifierCache {
  Tensor2 normalized;
  std::vector<double> norms;
  Tensor2 logits;
  Tensor2 probabilities;
};

struct ForwardPass {
  ExtractorCache features;
  ClassifierCache head;
};

struct Prediction {
  Tensor2 probabilities;
  Tensor2 embeddings;
};

Tensor2 extract_features(const ModelParams& params, const Tensor2& inputs);
ExtractorCache extract_features_cached(const ModelParams& params, const Tensor2& inputs);

/// logits = normalize(embedding) . W / T
ClassifierCache classifier_forward(const ModelParams& params, const Tensor2& embeddings);
ForwardPass forward(const ModelParams& params, const Tensor2& inputs);

Prediction classify(const ModelParams& params, const Tensor2& inputs);
/// Classifier head applied to externally supplied embeddings.
Prediction classify_embeddings(const ModelParams& params, const Tensor2& embeddings);

/// Two-column logits (source, target) of the domain discriminator.
Tensor2 discriminator_logits(const ModelParams& params, const Tensor2& embeddings);
/// Per-sample probability that the embedding comes from the target domain.
std::vector<double> discriminate_domain(const ModelParams& params, const Tensor2& embeddings);

/// Backpropagates dL/dlogits through C: accumulates the prototype gradient
/// into `grads` and returns dL/dembeddings.
Tensor2 classifier_backward(const ModelParams& params, const ExtractorCache& features,
                            const ClassifierCache& head, const Tensor2& grad_logits,
                            Gradients& grads);
/// Backpropagates dL/dembeddings through F into `grads`.
void extractor_backward(const ModelParams& params, const ExtractorCache& features,
                        const Tensor2& grad_embeddings, Gradients& grads);
/// Backpropagates dL/d(discriminator logits); returns dL/dembeddings.
Tensor2 discriminator_backward(const ModelParams& params, const Tensor2& embeddings,
                               const Tensor2& grad_logits, Gradients& grads);

/// ReLU on/off pattern of F on `inputs`, for the gradient checker.
KinkProbe relu_probe(const ModelParams& params, const Tensor2& inputs);

std::vector<int> argmax_rows(const Tensor2& probabilities);

}  // namespace coal
