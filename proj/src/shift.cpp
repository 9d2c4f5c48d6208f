#include "coal/shift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "coal/errors.hpp"

namespace coal {

ShiftDirection parse_direction(const std::string& text) {
  if (text == "ut" || text == "target-ranked" || text == "target_ranked") {
    return ShiftDirection::target_ranked;
  }
  if (text == "rs" || text == "source-reversed" || text == "source_reversed") {
    return ShiftDirection::source_reversed;
  }
  throw ConfigError("unknown shift direction '" + text + "' (expected rs or ut)");
}

std::string to_string(ShiftDirection direction) {
  return direction == ShiftDirection::target_ranked ? "ut" : "rs";
}

LabelDistribution pareto_proportions(std::size_t num_classes, double alpha,
                                     double interval_width) {
  if (num_classes < 2) throw UsageError("pareto_proportions needs at least 2 classes");
  if (!(alpha > 0.0)) throw UsageError("pareto shape alpha must be > 0");
  if (!(interval_width > 0.0)) throw UsageError("pareto interval width must be > 0");
  std::vector<double> w(num_classes);
  const double span = static_cast<double>(num_classes - 1);
  for (std::size_t r = 0; r < num_classes; ++r) {
    const double x = 1.0 + interval_width * static_cast<double>(r) / span;
    w[r] = std::pow(x, -(alpha + 1.0));
  }
  return LabelDistribution::from_weights(w);
}

LabelDistribution interpolated_proportions(std::size_t num_classes, const ShiftSpec& spec) {
  if (!(spec.degree >= 0.0 && spec.degree <= 100.0)) {
    throw UsageError("shift degree must be in [0, 100], got " + std::to_string(spec.degree));
  }
  const LabelDistribution ranked =
      pareto_proportions(num_classes, spec.pareto_alpha, spec.interval_width);
  const double t = spec.degree / 100.0;
  const double u = 1.0 / static_cast<double>(num_classes);
  std::vector<double> p(num_classes);
  for (std::size_t cls = 0; cls < num_classes; ++cls) {
    const std::size_t rank = spec.direction == ShiftDirection::target_ranked
                                 ? cls
                                 : num_classes - 1 - cls;
    p[cls] = (1.0 - t) * u + t * ranked[rank];
  }
  return LabelDistribution::from_weights(p);
}

std::vector<std::size_t> largest_remainder_counts(const LabelDistribution& proportions,
                                                  std::size_t total) {
  const std::size_t c = proportions.size();
  std::vector<std::size_t> counts(c);
  std::vector<double> frac(c);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double exact = proportions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  // Sum of floors is at most `total`; the deficit is below c.
  for (std::size_t j = 0; assigned < total; j = (j + 1) % c, ++assigned) ++counts[order[j]];
  return counts;
}

std::vector<std::size_t> shift_counts(std::size_t num_classes, const ShiftSpec& spec) {
  const auto counts = largest_remainder_counts(interpolated_proportions(num_classes, spec), spec.budget);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < spec.min_per_class) {
      throw ProtocolError("class " + std::to_string(i) + " gets " + std::to_string(counts[i]) +
                          " samples, below the minimum of " + std::to_string(spec.min_per_class));
    }
  }
  return counts;
}

double rounding_js_bound(std::size_t num_classes, std::size_t total) {
  // Each count is within one sample of its target, so the total variation is
  // below c / (2N); JS divergence is at most ln 2 times total variation.
  const double tv = std::min(1.0, static_cast<double>(num_classes) / (2.0 * static_cast<double>(total)));
  return std::sqrt(std::log(2.0) * tv);
}

LabeledDataset build_shift(const LabeledDataset& dataset, const ShiftSpec& spec,
                           std::uint64_t seed) {
  dataset.validate();
  const auto counts = shift_counts(dataset.num_classes, spec);
  auto members = dataset.indices_by_class();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(spec.budget);
  for (std::size_t cls = 0; cls < members.size(); ++cls) {
    if (members[cls].size() < counts[cls]) {
      throw ProtocolError("class " + std::to_string(cls) + " needs " + std::to_string(counts[cls]) +
                          " samples but only " + std::to_string(members[cls].size()) +
                          " are available (shortfall " +
                          std::to_string(counts[cls] - members[cls].size()) + ")");
    }
    std::shuffle(members[cls].begin(), members[cls].end(), rng);
    chosen.insert(chosen.end(), members[cls].begin(),
                  members[cls].begin() + static_cast<std::ptrdiff_t>(counts[cls]));
  }
  std::sort(chosen.begin(), chosen.end());
  LabeledDataset out = dataset.subset(chosen);
  out.provenance = dataset.provenance + "|shift(" + to_string(spec.direction) + ",alpha=" +
                   std::to_string(spec.pareto_alpha) + ",d=" + std::to_string(spec.degree) + ")";
  return out;
}

std::pair<LabeledDataset, LabeledDataset> generate_twin_domains(const TwinDomainConfig& config,
                                                                std::uint64_t seed) {
  const std::size_t c = config.num_classes;
  const std::size_t dims = config.dims;
  if (c < 2 || dims < 2) throw UsageError("twin domains need >= 2 classes and >= 2 dims");
  if (!(config.noise >= 0.0)) throw UsageError("noise must be >= 0");
  if (!config.translation.empty() && config.translation.size() != dims) {
    throw DimensionError("translation has " + std::to_string(config.translation.size()) +
                         " entries for " + std::to_string(dims) + " dims");
  }
  std::vector<std::vector<double>> means = config.means;
  if (means.empty()) {
    for (std::size_t k = 0; k < c; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(c);
      std::vector<double> m(dims, 0.0);
      m[0] = config.radius * std::cos(angle);
      m[1] = config.radius * std::sin(angle);
      means.push_back(std::move(m));
    }
  }
  if (means.size() != c) throw DimensionError("expected one mean per class");
  for (const auto& m : means) {
    if (m.size() != dims) throw DimensionError("class mean has wrong dimension");
  }

  const double theta = config.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);

  auto sample = [&](std::uint64_t stream, bool shifted) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LabeledDataset ds;
    ds.num_classes = c;
    ds.features = Tensor2(c * config.per_class, dims);
    ds.labels.resize(c * config.per_class);
    std::size_t row = 0;
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t n = 0; n < config.per_class; ++n, ++row) {
        auto x = ds.features.row(row);
        for (std::size_t j = 0; j < dims; ++j) x[j] = means[k][j] + config.noise * gauss(rng);
        if (shifted) {
          const double a = x[0], b = x[1];
          x[0] = cs * a - sn * b;
          x[1] = sn * a + cs * b;
          for (std::size_t j = 0; j < config.translation.size(); ++j) x[j] += config.translation[j];
        }
        ds.labels[row] = static_cast<int>(k);
      }
    }
    ds.provenance = std::string("synthetic:twin(") + (shifted ? "target" : "source") +
                    ",seed=" + std::to_string(seed) + ")";
    return ds;
  };
  return {sample(0, false), sample(1, true)};
}

}  // namespace coal
