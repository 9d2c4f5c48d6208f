#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coal/tensor.hpp"

namespace coal {

/// A trainable tensor together with its gradient and SGD momentum buffer.
/// All three always share one shape.
struct ParamBlock {
  ParamBlock() = default;
  ParamBlock(std::string block_name, Tensor2 initial);

  std::string name;
  Tensor2 value;
  Tensor2 gradient;
  Tensor2 momentum;

  void zero_grad() { gradient.fill(0.0); }
};

/// Strength of a gradient-reversal boundary. Forward is the identity;
/// backward multiplies by -lambda.
class GrlCoefficient {
 public:
  explicit GrlCoefficient(double lambda = 1.0);
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

/// Scalar loss paired with its gradient w.r.t. the op's differentiable input.
struct LossWithGrad {
  double value = 0.0;
  Tensor2 gradient;
};

// Dense layers ---------------------------------------------------------------

/// out = input * weights + bias, bias broadcast over rows (bias is 1 x out).
Tensor2 linear_forward(const Tensor2& input, const Tensor2& weights, const Tensor2& bias);
Tensor2 linear_forward(const Tensor2& input, const ParamBlock& weights, const ParamBlock& bias);

/// Accumulates dL/dW and dL/db into `grad_weights`/`grad_bias` and returns
/// dL/dinput.
Tensor2 linear_backward(const Tensor2& input, const Tensor2& weights, const Tensor2& grad_out,
                        Tensor2& grad_weights, Tensor2& grad_bias);

Tensor2 relu_forward(const Tensor2& pre);
Tensor2 relu_backward(const Tensor2& pre, const Tensor2& grad_out);

// Normalization --------------------------------------------------------------

inline constexpr double kNormEpsilon = 1e-12;

/// Divides each row by max(norm, epsilon). Row norms are written to `norms`
/// when provided.
Tensor2 l2_normalize_rows(const Tensor2& input, double epsilon = kNormEpsilon,
                          std::vector<double>* norms = nullptr);
Tensor2 l2_normalize_rows_backward(const Tensor2& input, std::span<const double> norms,
                                   const Tensor2& grad_out, double epsilon = kNormEpsilon);

// Probabilities and losses ---------------------------------------------------

Tensor2 softmax_rows(const Tensor2& logits);

/// Masked mean cross-entropy. Rows with mask 0 contribute neither loss nor
/// gradient; the mean divides by max(1, #masked rows). An empty mask span
/// means every row counts.
LossWithGrad softmax_cross_entropy(const Tensor2& logits, std::span<const int> labels,
                                   std::span<const std::uint8_t> mask = {});

/// Mean Shannon entropy (natural log) of probability rows, with the gradient
/// taken w.r.t. the logits that produced them.
LossWithGrad mean_entropy(const Tensor2& probabilities);

/// Backward of a reversal boundary: returns -lambda * grad.
Tensor2 reverse_gradient(const Tensor2& grad, GrlCoefficient coefficient);

// Optimization ---------------------------------------------------------------

/// buffer <- momentum * buffer + grad; value <- value - lr * buffer; grad <- 0.
/// Throws DivergenceError naming the block if any gradient is non-finite;
/// in that case no block is modified.
void sgd_momentum_step(std::span<ParamBlock* const> blocks, std::span<const double> learning_rates,
                       double momentum);

// Gradient checking ----------------------------------------------------------

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords_per_block = 24;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error.
  double abs_floor = 1e-5;
  double kink_margin = 1e-6;
};

struct BlockCheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<BlockCheckResult> blocks;
  double worst() const;
};

/// Snapshot of every ReLU's on/off state plus the smallest |pre-activation|.
struct KinkProbe {
  std::vector<std::uint8_t> pattern;
  double min_margin = 0.0;
};

/// Compares the analytic gradients already stored in `blocks` against
/// central differences of `loss`. `loss` must read the live block values.
/// When `probe` is set, coordinates whose +/-h perturbations flip a ReLU or
/// sit within kink_margin of one are skipped.
GradCheckReport finite_difference_check(std::span<ParamBlock* const> blocks,
                                        const std::function<double()>& loss,
                                        const GradCheckOptions& options = {},
                                        const std::function<KinkProbe()>& probe = {});

}  // namespace coal
