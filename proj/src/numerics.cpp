#include "coal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "coal/errors.hpp"

namespace coal {

ParamBlock::ParamBlock(std::string block_name, Tensor2 initial)
    : name(std::move(block_name)),
      value(std::move(initial)),
      gradient(value.rows(), value.cols()),
      momentum(value.rows(), value.cols()) {}

GrlCoefficient::GrlCoefficient(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw UsageError("gradient reversal coefficient must be finite and >= 0");
  }
}

Tensor2 linear_forward(const Tensor2& input, const Tensor2& weights, const Tensor2& bias) {
  if (input.cols() != weights.rows()) {
    throw DimensionError("linear_forward: input " + input.shape_string() +
                         " incompatible with weights " + weights.shape_string());
  }
  if (bias.rows() != 1 || bias.cols() != weights.cols()) {
    throw DimensionError("linear_forward: bias " + bias.shape_string() +
                         " incompatible with weights " + weights.shape_string());
  }
  Tensor2 out(input.rows(), weights.cols());
  for (std::size_t i = 0; i < input.rows(); ++i) {
    auto o = out.row(i);
    std::copy(bias.data().begin(), bias.data().end(), o.begin());
    for (std::size_t k = 0; k < input.cols(); ++k) {
      const double x = input(i, k);
      if (x == 0.0) continue;
      const auto w = weights.row(k);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += x * w[j];
    }
  }
  return out;
}

Tensor2 linear_forward(const Tensor2& input, const ParamBlock& weights, const ParamBlock& bias) {
  return linear_forward(input, weights.value, bias.value);
}

Tensor2 linear_backward(const Tensor2& input, const Tensor2& weights, const Tensor2& grad_out,
                        Tensor2& grad_weights, Tensor2& grad_bias) {
  if (grad_out.rows() != input.rows() || grad_out.cols() != weights.cols() ||
      !grad_weights.same_shape(weights) || grad_bias.cols() != weights.cols()) {
    throw DimensionError("linear_backward: grad_out " + grad_out.shape_string() + " vs input " +
                         input.shape_string() + " and weights " + weights.shape_string());
  }
  Tensor2 grad_in(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.rows(); ++i) {
    const auto g = grad_out.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) grad_bias(0, j) += g[j];
    for (std::size_t k = 0; k < input.cols(); ++k) {
      const double x = input(i, k);
      const auto w = weights.row(k);
      auto gw = grad_weights.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        gw[j] += x * g[j];
        acc += w[j] * g[j];
      }
      grad_in(i, k) = acc;
    }
  }
  return grad_in;
}

Tensor2 relu_forward(const Tensor2& pre) {
  Tensor2 out = pre;
  for (double& v : out.data()) v = (v > 0.0 || std::isnan(v)) ? v : 0.0;
  return out;
}

Tensor2 relu_backward(const Tensor2& pre, const Tensor2& grad_out) {
  if (!pre.same_shape(grad_out)) {
    throw DimensionError("relu_backward: " + pre.shape_string() + " vs " +
                         grad_out.shape_string());
  }
  Tensor2 out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(pre.data()[i] > 0.0)) out.data()[i] = 0.0;
  }
  return out;
}

Tensor2 l2_normalize_rows(const Tensor2& input, double epsilon, std::vector<double>* norms) {
  Tensor2 out(input.rows(), input.cols());
  if (norms) norms->assign(input.rows(), 0.0);
  for (std::size_t i = 0; i < input.rows(); ++i) {
    const auto x = input.row(i);
    const double n = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    const double denom = n > epsilon ? n : epsilon;
    auto o = out.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) o[j] = x[j] / denom;
    if (norms) (*norms)[i] = n;
  }
  return out;
}

Tensor2 l2_normalize_rows_backward(const Tensor2& input, std::span<const double> norms,
                                   const Tensor2& grad_out, double epsilon) {
  if (!input.same_shape(grad_out) || norms.size() != input.rows()) {
    throw DimensionError("l2_normalize_rows_backward: shape mismatch " + input.shape_string() +
                         " vs " + grad_out.shape_string());
  }
  Tensor2 grad_in(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.rows(); ++i) {
    const auto x = input.row(i);
    const auto g = grad_out.row(i);
    auto gi = grad_in.row(i);
    const double n = norms[i];
    if (n > epsilon) {
      // d(x/|x|) = (g - z (z.g)) / |x|
      double zg = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) zg += x[j] * g[j];
      zg /= n;
      for (std::size_t j = 0; j < x.size(); ++j) gi[j] = (g[j] - (x[j] / n) * zg) / n;
    } else {
      for (std::size_t j = 0; j < x.size(); ++j) gi[j] = g[j] / epsilon;
    }
  }
  return grad_in;
}

Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto s = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(s.begin(), s.end());
    double total = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      o[j] = std::exp(s[j] - mx);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

LossWithGrad softmax_cross_entropy(const Tensor2& logits, std::span<const int> labels,
                                   std::span<const std::uint8_t> mask) {
  if (labels.size() != logits.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + logits.shape_string());
  }
  if (!mask.empty() && mask.size() != logits.rows()) {
    throw DimensionError("softmax_cross_entropy: mask length " + std::to_string(mask.size()) +
                         " for logits " + logits.shape_string());
  }
  const auto cols = static_cast<int>(logits.cols());
  std::size_t active = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    if (labels[i] < 0 || labels[i] >= cols) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(cols) + ")");
    }
    ++active;
  }
  LossWithGrad result{0.0, Tensor2(logits.rows(), logits.cols())};
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, active));
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask.empty() && mask[i] == 0) continue;
    const auto s = logits.row(i);
    const double mx = *std::max_element(s.begin(), s.end());
    double total = 0.0;
    for (double v : s) total += std::exp(v - mx);
    const double log_z = mx + std::log(total);
    const auto label = static_cast<std::size_t>(labels[i]);
    result.value += log_z - s[label];
    auto g = result.gradient.row(i);
    for (std::size_t j = 0; j < s.size(); ++j) g[j] = std::exp(s[j] - log_z) * scale;
    g[label] -= scale;
  }
  result.value *= scale;
  return result;
}

LossWithGrad mean_entropy(const Tensor2& probabilities) {
  LossWithGrad result{0.0, Tensor2(probabilities.rows(), probabilities.cols())};
  if (probabilities.rows() == 0) return result;
  const double scale = 1.0 / static_cast<double>(probabilities.rows());
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    const auto p = probabilities.row(i);
    double sum = 0.0;
    for (double v : p) {
      if (v < 0.0) throw NormalizationError("mean_entropy: negative probability in row " +
                                            std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-4) {
      throw NormalizationError("mean_entropy: row " + std::to_string(i) + " sums to " +
                               std::to_string(sum));
    }
    double h = 0.0;
    for (double v : p) {
      if (v > 0.0) h -= v * std::log(v);
    }
    result.value += h;
    auto g = result.gradient.row(i);
    // dH/ds_j = -p_j (log p_j + H)
    for (std::size_t j = 0; j < p.size(); ++j) {
      g[j] = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + h) * scale : 0.0;
    }
  }
  result.value *= scale;
  return result;
}

Tensor2 reverse_gradient(const Tensor2& grad, GrlCoefficient coefficient) {
  Tensor2 out = grad;
  const double factor = -coefficient.lambda();
  for (double& v : out.data()) v *= factor;
  return out;
}

void sgd_momentum_step(std::span<ParamBlock* const> blocks, std::span<const double> learning_rates,
                       double momentum) {
  if (learning_rates.size() != blocks.size()) {
    throw UsageError("sgd_momentum_step: " + std::to_string(learning_rates.size()) +
                     " learning rates for " + std::to_string(blocks.size()) + " blocks");
  }
  for (const ParamBlock* b : blocks) {
    if (!b->gradient.all_finite()) {
      throw DivergenceError("non-finite gradient in block '" + b->name + "'");
    }
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    ParamBlock& b = *blocks[i];
    const double lr = learning_rates[i];
    auto& v = b.value.data();
    auto& m = b.momentum.data();
    auto& g = b.gradient.data();
    for (std::size_t j = 0; j < v.size(); ++j) {
      m[j] = momentum * m[j] + g[j];
      v[j] -= lr * m[j];
      g[j] = 0.0;
    }
  }
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& b : blocks) w = std::max(w, b.max_relative_error);
  return w;
}

GradCheckReport finite_difference_check(std::span<ParamBlock* const> blocks,
                                        const std::function<double()>& loss,
                                        const GradCheckOptions& options,
                                        const std::function<KinkProbe()>& probe) {
  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (ParamBlock* block : blocks) {
    BlockCheckResult res;
    res.name = block->name;
    const std::size_t n = block->value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.max_coords_per_block) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_block);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      double& theta = block->value.data()[idx];
      const double original = theta;
      theta = original + options.step;
      const double plus = loss();
      KinkProbe plus_probe = probe ? probe() : KinkProbe{};
      theta = original - options.step;
      const double minus = loss();
      KinkProbe minus_probe = probe ? probe() : KinkProbe{};
      theta = original;
      if (probe) {
        const KinkProbe here = probe();
        if (plus_probe.pattern != minus_probe.pattern || here.min_margin < options.kink_margin) {
          ++res.skipped;
          continue;
        }
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = block->gradient.data()[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
      res.max_relative_error = std::max(res.max_relative_error, std::abs(analytic - numeric) / denom);
      ++res.checked;
    }
    report.blocks.push_back(std::move(res));
  }
  return report;
}

}  // namespace coal
