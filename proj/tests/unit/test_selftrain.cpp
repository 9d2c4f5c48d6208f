#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>

#include "coal/errors.hpp"
#include "coal/io.hpp"
#include "coal/selftrain.hpp"
#include "grad_harness.hpp"

using namespace coal;

namespace {

/// Independent oracle: full sort of each pseudo-class.
std::vector<std::uint8_t> oracle_mask(const PseudoAssignment& a, double k) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < a.labels.size(); ++i) by_class[a.labels[i]].push_back(i);
  std::vector<std::uint8_t> mask(a.labels.size(), 0);
  for (auto& [cls, idx] : by_class) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      if (a.confidence[x] != a.confidence[y]) return a.confidence[x] > a.confidence[y];
      return x < y;
    });
    std::size_t quota = 0;
    if (k > 0) {
      quota = static_cast<std::size_t>(std::ceil(k * static_cast<double>(idx.size()) / 100.0 - 1e-9));
      quota = std::clamp<std::size_t>(quota, 1, idx.size());
    }
    for (std::size_t i = 0; i < quota; ++i) mask[idx[i]] = 1;
  }
  return mask;
}

PseudoAssignment random_assignment(std::mt19937_64& rng, std::size_t n, int c, int levels) {
  PseudoAssignment a;
  for (std::size_t i = 0; i < n; ++i) {
    a.labels.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(c)));
    a.confidence.push_back(0.2 + 0.05 * static_cast<double>(rng() % static_cast<std::uint64_t>(levels)));
  }
  return a;
}

}  // namespace

TEST(AssignPseudoLabels, OneHotRow) {
  const PseudoAssignment a = assign_from_probabilities(Tensor2::from_rows({{0, 0, 1, 0}}));
  EXPECT_EQ(a.labels[0], 2);
  EXPECT_EQ(a.confidence[0], 1.0);
}

TEST(AssignPseudoLabels, UniformRowPicksClassZero) {
  const PseudoAssignment a = assign_from_probabilities(Tensor2::from_rows({{0.25, 0.25, 0.25, 0.25}}));
  EXPECT_EQ(a.labels[0], 0);
  EXPECT_EQ(a.confidence[0], 0.25);
}

TEST(AssignPseudoLabels, TiesGoToLowestIndex) {
  const PseudoAssignment a = assign_from_probabilities(Tensor2::from_rows({{0.1, 0.45, 0.45}}));
  EXPECT_EQ(a.labels[0], 1);
}

TEST(AssignPseudoLabels, DeterministicForFrozenModel) {
  ModelConfig mc;
  mc.seed = 31;
  const ModelParams m = init_model(mc);
  std::mt19937_64 rng(1);
  const Tensor2 x = fixtures::random_matrix(50, 2, rng);
  const PseudoAssignment a = assign_pseudo_labels(m, x), b = assign_pseudo_labels(m, x);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.confidence, b.confidence);
}

TEST(SelectionQuota, CeilingWithFloorOfOne) {
  EXPECT_EQ(selection_quota(10, 30), 3u);
  EXPECT_EQ(selection_quota(10, 31), 4u);
  EXPECT_EQ(selection_quota(3, 5), 1u);
  EXPECT_EQ(selection_quota(0, 50), 0u);
  EXPECT_EQ(selection_quota(7, 0), 0u);
  EXPECT_EQ(selection_quota(7, 100), 7u);
  EXPECT_EQ(selection_quota(20, 15), 3u);
  EXPECT_EQ(selection_quota(100, 7), 7u);
  EXPECT_THROW(selection_quota(5, 101), UsageError);
  EXPECT_THROW(selection_quota(5, -1), UsageError);
}

TEST(SelectTopK, TenSamplesAtThirtyPercent) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PseudoAssignment a;
  for (int i = 0; i < 10; ++i) {
    a.labels.push_back(0);
    a.confidence.push_back(u(rng));
  }
  const PseudoLabelSet s = select_top_k_per_class(a, 30);
  EXPECT_EQ(s.masked_count(), 3u);
  std::vector<double> sorted = a.confidence;
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(s.mask[i] == 1, a.confidence[i] >= sorted[2]);
  EXPECT_EQ(s.k_percent, 30.0);
}

TEST(SelectTopK, ZeroAndHundredPercent) {
  std::mt19937_64 rng(5);
  const PseudoAssignment a = random_assignment(rng, 40, 4, 10);
  EXPECT_EQ(select_top_k_per_class(a, 0).masked_count(), 0u);
  EXPECT_EQ(select_top_k_per_class(a, 100).masked_count(), 40u);
}

TEST(SelectTopK, MatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 1000;
    const int c = 1 + static_cast<int>(rng() % 10);
    const int levels = 1 + static_cast<int>(rng() % 50);
    const PseudoAssignment a = random_assignment(rng, n, c, levels);
    const double k = static_cast<double>(rng() % 101);
    EXPECT_EQ(select_top_k_per_class(a, k).mask, oracle_mask(a, k)) << "trial " << trial;
  }
}

TEST(SelectTopK, PerClassInvariants) {
  std::mt19937_64 rng(7);
  const PseudoAssignment a = random_assignment(rng, 300, 5, 20);
  const PseudoLabelSet s = select_top_k_per_class(a, 25);
  for (int cls = 0; cls < 5; ++cls) {
    std::size_t size = 0, masked = 0;
    double min_masked = 2.0, max_unmasked = -1.0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (a.labels[i] != cls) continue;
      ++size;
      if (s.mask[i]) {
        ++masked;
        min_masked = std::min(min_masked, a.confidence[i]);
      } else {
        max_unmasked = std::max(max_unmasked, a.confidence[i]);
      }
    }
    EXPECT_EQ(masked, selection_quota(size, 25));
    EXPECT_GE(min_masked, max_unmasked);
  }
}

TEST(SelectTopK, PermutationOnlyAffectsTies) {
  std::mt19937_64 rng(8);
  PseudoAssignment a;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    a.labels.push_back(static_cast<int>(rng() % 4));
    a.confidence.push_back(u(rng));  // continuous: no ties
  }
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  PseudoAssignment b;
  for (std::size_t i : perm) {
    b.labels.push_back(a.labels[i]);
    b.confidence.push_back(a.confidence[i]);
  }
  const PseudoLabelSet sa = select_top_k_per_class(a, 20), sb = select_top_k_per_class(b, 20);
  for (std::size_t j = 0; j < 200; ++j) EXPECT_EQ(sb.mask[j], sa.mask[perm[j]]);
}

TEST(SelectTopK, EveryPseudoClassRepresented) {
  // Class 1 is uniformly less confident; a global top-10% would skip it.
  PseudoAssignment a;
  for (int i = 0; i < 90; ++i) {
    a.labels.push_back(0);
    a.confidence.push_back(0.9 + 0.001 * i);
  }
  for (int i = 0; i < 10; ++i) {
    a.labels.push_back(1);
    a.confidence.push_back(0.4 + 0.01 * i);
  }
  std::vector<double> sorted = a.confidence;
  std::sort(sorted.rbegin(), sorted.rend());
  EXPECT_GT(sorted[9], 0.5);  // global top 10 are all class 0
  const PseudoLabelSet s = select_top_k_per_class(a, 10);
  std::size_t class1 = 0;
  for (std::size_t i = 90; i < 100; ++i) class1 += s.mask[i];
  EXPECT_EQ(class1, 1u);
  EXPECT_EQ(s.mask[99], 1);
}

TEST(SelectTopK, TiesBrokenBySampleIndex) {
  PseudoAssignment a;
  a.labels = {0, 0, 0, 0};
  a.confidence = {0.5, 0.7, 0.7, 0.7};
  const PseudoLabelSet s = select_top_k_per_class(a, 50);
  EXPECT_EQ(s.mask, (std::vector<std::uint8_t>{0, 1, 1, 0}));
}

TEST(EstimateDistribution, BalancedSelection) {
  PseudoLabelSet s;
  s.labels = {0, 0, 1, 1, 1};
  s.confidence = std::vector<double>(5, 0.9);
  s.mask = {1, 1, 1, 1, 0};
  const LabelDistribution d = estimate_target_distribution(s, 2);
  EXPECT_EQ(d.proportions(), (std::vector<double>{0.5, 0.5}));
}

TEST(EstimateDistribution, SingleClassIsOneHot) {
  PseudoLabelSet s;
  s.labels = {2, 2, 0};
  s.confidence = {0.9, 0.8, 0.7};
  s.mask = {1, 1, 0};
  EXPECT_EQ(estimate_target_distribution(s, 3).proportions(), (std::vector<double>{0, 0, 1}));
}

TEST(EstimateDistribution, SevenSampleHandCount) {
  PseudoLabelSet s;
  s.labels = {0, 1, 2, 1, 1, 0, 2};
  s.confidence = std::vector<double>(7, 0.5);
  s.mask = {1, 1, 0, 1, 0, 1, 1};  // masked: class 0 x2, class 1 x2, class 2 x1
  const LabelDistribution d = estimate_target_distribution(s, 3);
  EXPECT_DOUBLE_EQ(d[0], 0.4);
  EXPECT_DOUBLE_EQ(d[1], 0.4);
  EXPECT_DOUBLE_EQ(d[2], 0.2);
}

TEST(EstimateDistribution, NothingMaskedIsEstimationError) {
  PseudoLabelSet s;
  s.labels = {0, 1};
  s.confidence = {0.5, 0.5};
  s.mask = {0, 0};
  EXPECT_THROW(estimate_target_distribution(s, 2), EstimationError);
}

TEST(KSchedule, DefaultsAndClamp) {
  const KSchedule k = KSchedule::standard();
  EXPECT_EQ(advance_k(k, 0), 5.0);
  EXPECT_EQ(advance_k(k, 4), 25.0);
  EXPECT_EQ(advance_k(k, 100), 30.0);
  double prev = 0.0;
  for (std::size_t e = 0; e < 20; ++e) {
    EXPECT_GE(advance_k(k, e), prev);
    prev = advance_k(k, e);
  }
}

TEST(KSchedule, Presets) {
  EXPECT_EQ(advance_k(KSchedule::preset("digits"), 0), 20.0);
  EXPECT_EQ(advance_k(KSchedule::preset("digits"), 100), 50.0);
  EXPECT_EQ(advance_k(KSchedule::preset("svhn"), 1), 10.0);
  EXPECT_EQ(advance_k(KSchedule::preset("svhn"), 5), 10.0);
  EXPECT_EQ(advance_k(KSchedule::preset("standard"), 2), 15.0);
  EXPECT_THROW(KSchedule::preset("bogus"), ConfigError);
}

TEST(PseudoLabelCsv, WritesAuditColumns) {
  PseudoLabelSet s;
  s.labels = {1, 0};
  s.confidence = {0.75, 0.5};
  s.mask = {1, 0};
  const auto path = std::filesystem::temp_directory_path() / "coal_pseudo_test.csv";
  write_pseudo_label_csv(path, s);
  const std::string text = read_text(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "sample_id,pseudo_label,confidence,mask");
  EXPECT_NE(text.find("0,1,0.75,1"), std::string::npos) << text;
  EXPECT_NE(text.find("1,0,0.5,0"), std::string::npos) << text;
  std::filesystem::remove(path);
}
