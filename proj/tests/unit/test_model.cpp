#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coal/errors.hpp"
#include "coal/model.hpp"
#include "coal/objectives.hpp"
#include "grad_harness.hpp"

using namespace coal;

namespace {

ModelParams single_layer(std::size_t in, std::size_t d, std::size_t c) {
  ModelConfig mc;
  mc.input_dim = in;
  mc.layer_widths = {d};
  mc.num_classes = c;
  return init_model(mc);
}

void set_prototypes(ModelParams& m, const Tensor2& w) { m.prototypes.value = w; }

}  // namespace

TEST(InitModel, ShapesAndInvariants) {
  ModelConfig mc;
  mc.input_dim = 3;
  mc.layer_widths = {8, 5};
  mc.num_classes = 4;
  const ModelParams m = init_model(mc);
  EXPECT_EQ(m.extractor.size(), 2u);
  EXPECT_EQ(m.input_dim(), 3u);
  EXPECT_EQ(m.embedding_dim(), 5u);
  EXPECT_EQ(m.num_classes(), 4u);
  EXPECT_EQ(m.temperature, 0.05);
  EXPECT_EQ(m.blocks().size(), m.roles().size());
  for (const ParamBlock* b : m.blocks()) {
    EXPECT_TRUE(b->value.same_shape(b->gradient));
    EXPECT_TRUE(b->value.same_shape(b->momentum));
  }
  EXPECT_NO_THROW(m.validate());
}

TEST(InitModel, PrototypeColumnsAreUnitNorm) {
  ModelConfig mc;
  mc.layer_widths = {16, 12};
  mc.num_classes = 6;
  mc.seed = 4;
  const ModelParams m = init_model(mc);
  for (std::size_t j = 0; j < 6; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 12; ++i) s += m.prototypes.value(i, j) * m.prototypes.value(i, j);
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
}

TEST(InitModel, SeededAndDistinct) {
  ModelConfig mc;
  mc.seed = 7;
  const ModelParams a = init_model(mc), b = init_model(mc);
  mc.seed = 8;
  const ModelParams c = init_model(mc);
  EXPECT_EQ(a.prototypes.value, b.prototypes.value);
  EXPECT_EQ(a.extractor[0].weights.value, b.extractor[0].weights.value);
  EXPECT_NE(a.prototypes.value, c.prototypes.value);
}

TEST(InitModel, RejectsBadConfig) {
  ModelConfig mc;
  mc.temperature = 0.0;
  EXPECT_THROW(init_model(mc), UsageError);
  mc.temperature = 0.05;
  mc.layer_widths.clear();
  EXPECT_THROW(init_model(mc), UsageError);
  mc.layer_widths = {4};
  mc.num_classes = 0;
  EXPECT_THROW(init_model(mc), UsageError);
}

TEST(ExtractFeatures, ZeroWeightsGiveZeroEmbeddings) {
  ModelParams m = single_layer(2, 3, 2);
  m.extractor[0].weights.value.fill(0.0);
  EXPECT_EQ(extract_features(m, Tensor2::from_rows({{1, 2}, {-3, 4}})), Tensor2(2, 3));
}

TEST(ExtractFeatures, ReluClamps) {
  ModelParams m = single_layer(2, 2, 2);
  m.extractor[0].weights.value = Tensor2::from_rows({{1, 0}, {0, 1}});
  EXPECT_EQ(extract_features(m, Tensor2::from_rows({{-1, 2}})), Tensor2::from_rows({{0, 2}}));
}

TEST(ExtractFeatures, Deterministic) {
  ModelConfig mc;
  mc.seed = 7;
  const ModelParams m = init_model(mc);
  const Tensor2 x = Tensor2::from_rows({{0.3, -1.2}, {2.0, 0.5}});
  EXPECT_EQ(extract_features(m, x), extract_features(m, x));
}

TEST(ExtractFeatures, ShapeMismatch) {
  const ModelParams m = single_layer(2, 3, 2);
  EXPECT_THROW(extract_features(m, Tensor2(1, 3)), DimensionError);
}

TEST(Classify, PrototypeMatchGivesConfidentArgmax) {
  ModelParams m = single_layer(3, 3, 3);
  set_prototypes(m, Tensor2::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  for (std::size_t j = 0; j < 3; ++j) {
    Tensor2 e(1, 3);
    e(0, j) = 2.5;
    const Prediction p = classify_embeddings(m, e);
    EXPECT_EQ(argmax_rows(p.probabilities)[0], static_cast<int>(j));
    EXPECT_GT(p.probabilities(0, j), 0.99);
  }
}

TEST(Classify, EquidistantEmbeddingGivesUniform) {
  ModelParams m = single_layer(2, 2, 2);
  const double r = 1.0 / std::sqrt(2.0);
  set_prototypes(m, Tensor2::from_rows({{r, r}, {r, -r}}));  // columns (r, r) and (r, -r)
  const Prediction p = classify_embeddings(m, Tensor2::from_rows({{1, 0}}));
  EXPECT_NEAR(p.probabilities(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p.probabilities(0, 1), 0.5, 1e-15);
}

TEST(Classify, ScaleInvariantInEmbedding) {
  ModelConfig mc;
  mc.layer_widths = {6};
  mc.num_classes = 4;
  mc.seed = 3;
  const ModelParams m = init_model(mc);
  std::mt19937_64 rng(1);
  Tensor2 e = fixtures::random_matrix(5, 6, rng);
  Tensor2 scaled = e;
  for (double& v : scaled.data()) v *= 10.0;
  const Tensor2 a = classify_embeddings(m, e).probabilities;
  const Tensor2 b = classify_embeddings(m, scaled).probabilities;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(Classify, ProbabilityRowsSumToOne) {
  ModelConfig mc;
  mc.seed = 12;
  const ModelParams m = init_model(mc);
  std::mt19937_64 rng(2);
  const Prediction p = classify(m, fixtures::random_matrix(30, 2, rng, 3.0));
  EXPECT_EQ(p.embeddings.cols(), m.embedding_dim());
  for (std::size_t r = 0; r < p.probabilities.rows(); ++r) {
    double s = 0.0;
    for (double v : p.probabilities.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Classify, ArgmaxInvariantToLogitShift) {
  const Tensor2 p = Tensor2::from_rows({{0.1, 0.7, 0.2}, {0.4, 0.4, 0.2}});
  EXPECT_EQ(argmax_rows(p), (std::vector<int>{1, 0}));
  Tensor2 logits = Tensor2::from_rows({{1, 3, 2}});
  Tensor2 shifted = logits;
  for (double& v : shifted.data()) v += 100.0;
  EXPECT_EQ(argmax_rows(softmax_rows(logits)), argmax_rows(softmax_rows(shifted)));
}

TEST(Classify, PrototypesAlignWithClassesAfterTraining) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 0.3);
  Tensor2 x(40, 2);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = static_cast<int>(i % 2);
    x(i, 0) = (y[i] ? 2.0 : -2.0) + g(rng);
    x(i, 1) = 1.0 + g(rng);
  }
  ModelConfig mc;
  mc.layer_widths = {16, 8};
  mc.num_classes = 2;
  mc.seed = 5;
  ModelParams m = init_model(mc);
  const auto blocks = m.blocks();
  std::vector<double> lr(blocks.size(), 0.01);
  for (int step = 0; step < 300; ++step) {
    const ObjectiveResult r = source_classification_loss(m, x, y);
    m.zero_grad();
    r.gradients.accumulate_into(m);
    sgd_momentum_step(blocks, lr, 0.9);
  }
  const Tensor2 emb = l2_normalize_rows(extract_features(m, x));
  auto cosine = [&](std::size_t i, std::size_t cls) {
    double dot = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
      dot += emb(i, k) * m.prototypes.value(k, cls);
      norm += m.prototypes.value(k, cls) * m.prototypes.value(k, cls);
    }
    return dot / std::sqrt(norm);
  };
  for (std::size_t cls = 0; cls < 2; ++cls) {
    double own = 0.0, other = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
      if (y[i] != static_cast<int>(cls)) continue;
      own += cosine(i, cls);
      other += cosine(i, 1 - cls);
    }
    EXPECT_GT(own, other) << "class " << cls;
  }
}

TEST(Discriminator, UntrainedHeadIsHalf) {
  ModelConfig mc;
  const ModelParams m = init_model(mc);
  std::mt19937_64 rng(4);
  const auto p = discriminate_domain(m, fixtures::random_matrix(3, m.embedding_dim(), rng));
  ASSERT_EQ(p.size(), 3u);
  for (double v : p) EXPECT_EQ(v, 0.5);
}

TEST(Discriminator, SingleSampleShape) {
  ModelConfig mc;
  const ModelParams m = init_model(mc);
  EXPECT_EQ(discriminate_domain(m, Tensor2(1, m.embedding_dim(), 1.0)).size(), 1u);
  EXPECT_THROW(discriminate_domain(m, Tensor2(1, m.embedding_dim() + 1)), DimensionError);
}

TEST(Discriminator, LearnsSeparableEmbeddings) {
  ModelConfig mc;
  mc.layer_widths = {4};
  ModelParams m = init_model(mc);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.2);
  Tensor2 emb(60, 4);
  std::vector<int> domain(60);
  for (std::size_t i = 0; i < 60; ++i) {
    domain[i] = i < 30 ? 0 : 1;
    for (std::size_t k = 0; k < 4; ++k) emb(i, k) = g(rng) + (k == 0 ? (domain[i] ? 1.0 : -1.0) : 0.0);
  }
  ParamBlock* blocks[] = {&m.disc_weights, &m.disc_bias};
  const double lr[] = {0.1, 0.1};
  for (int step = 0; step < 200; ++step) {
    Gradients grads = Gradients::zeros_like(m);
    const LossWithGrad ce = softmax_cross_entropy(discriminator_logits(m, emb), domain);
    discriminator_backward(m, emb, ce.gradient, grads);
    m.zero_grad();
    grads.accumulate_into(m);
    sgd_momentum_step(blocks, lr, 0.9);
  }
  const auto p = discriminate_domain(m, emb);
  int hits = 0;
  for (std::size_t i = 0; i < 60; ++i) hits += (p[i] > 0.5) == (domain[i] == 1);
  EXPECT_GT(hits / 60.0, 0.9);
}

TEST(Gradients, RoleFilteredArithmetic) {
  ModelConfig mc;
  mc.layer_widths = {3};
  mc.num_classes = 2;
  const ModelParams m = init_model(mc);
  Gradients a = Gradients::zeros_like(m);
  Gradients b = Gradients::zeros_like(m);
  for (auto& t : b.per_block) t.fill(1.0);
  const auto roles = m.roles();
  const BlockRole only[] = {BlockRole::classifier};
  a.add_scaled(b, 2.0, only, roles);
  for (std::size_t i = 0; i < roles.size(); ++i) {
    const double expect = roles[i] == BlockRole::classifier ? 2.0 : 0.0;
    for (double v : a.per_block[i].data()) EXPECT_EQ(v, expect);
  }
  a.scale_role(BlockRole::classifier, -0.5, roles);
  EXPECT_EQ(a.max_abs_difference(Gradients::zeros_like(m)), 1.0);
}

TEST(ReluProbe, ReportsPatternAndMargin) {
  ModelParams m = single_layer(2, 2, 2);
  m.extractor[0].weights.value = Tensor2::from_rows({{1, 0}, {0, 1}});
  const KinkProbe k = relu_probe(m, Tensor2::from_rows({{-0.5, 2.0}}));
  EXPECT_EQ(k.pattern, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_DOUBLE_EQ(k.min_margin, 0.5);
}
