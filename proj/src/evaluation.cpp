#include "coal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "coal/errors.hpp"

namespace coal {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : c_(num_classes), counts_(num_classes * num_classes, 0) {}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> truth,
                                                  std::span<const int> predicted,
                                                  std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw DimensionError("confusion matrix: " + std::to_string(truth.size()) + " labels vs " +
                         std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

ConfusionMatrix ConfusionMatrix::from_counts(std::size_t num_classes, std::vector<std::size_t> counts) {
  if (counts.size() != num_classes * num_classes) throw DimensionError("confusion counts must be c x c");
  ConfusionMatrix cm(num_classes);
  cm.counts_ = std::move(counts);
  return cm;
}

void ConfusionMatrix::add(int truth, int predicted) {
  const auto c = static_cast<int>(c_);
  if (truth < 0 || truth >= c || predicted < 0 || predicted >= c) {
    throw IndexError("confusion matrix entry (" + std::to_string(truth) + ", " +
                     std::to_string(predicted) + ") outside " + std::to_string(c_) + " classes");
  }
  ++counts_[static_cast<std::size_t>(truth) * c_ + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::row_total(std::size_t i) const {
  std::size_t total = 0;
  for (std::size_t j = 0; j < c_; ++j) total += (*this)(i, j);
  return total;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t total = 0;
  for (std::size_t v : counts_) total += v;
  return total;
}

double ConfusionMatrix::overall_accuracy() const {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < c_; ++i) hits += (*this)(i, i);
  const std::size_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

double per_class_mean_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    const std::size_t n_i = cm.row_total(i);
    if (n_i == 0) throw MetricError("class " + std::to_string(i) + " has no evaluation samples");
    sum += static_cast<double>(cm(i, i)) / static_cast<double>(n_i);
  }
  return sum / static_cast<double>(cm.num_classes());
}

DistributionComparison compare_distributions(const LabelDistribution& estimated,
                                             const LabelDistribution& truth) {
  DistributionComparison out;
  out.js_divergence = js_divergence(estimated, truth);
  out.js_distance = std::sqrt(out.js_divergence);
  for (std::size_t i = 0; i < estimated.size(); ++i) out.l1 += std::abs(estimated[i] - truth[i]);
  return out;
}

namespace {

std::vector<double> mat_vec(const std::vector<double>& m, const std::vector<double>& v) {
  const std::size_t d = v.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i] += m[i * d + j] * v[j];
  }
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

// Leading eigenpair of symmetric `m`, kept orthogonal to `avoid` when given.
std::pair<double, std::vector<double>> power_iterate(const std::vector<double>& m, std::size_t d,
                                                     std::size_t iterations, std::mt19937_64& rng,
                                                     const std::vector<double>* avoid) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(d);
  for (double& x : v) x = gauss(rng);
  auto orthogonalize = [&](std::vector<double>& x) {
    if (!avoid) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += x[i] * (*avoid)[i];
    for (std::size_t i = 0; i < d; ++i) x[i] -= dot * (*avoid)[i];
  };
  orthogonalize(v);
  double n = norm(v);
  if (n == 0.0) return {0.0, std::vector<double>(d, 0.0)};
  for (double& x : v) x /= n;
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> w = mat_vec(m, v);
    orthogonalize(w);
    n = norm(w);
    if (n == 0.0) return {0.0, v};
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / n;
  }
  const std::vector<double> mv = mat_vec(m, v);
  double lambda = 0.0;
  for (std::size_t i = 0; i < d; ++i) lambda += v[i] * mv[i];
  return {lambda, v};
}

}  // namespace

Projection2D project_features_2d(const Tensor2& embeddings, std::size_t iterations,
                                 std::uint64_t seed) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (n < 3) throw UsageError("project_features_2d needs at least 3 rows");
  if (d == 0) throw UsageError("project_features_2d needs at least one column");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += embeddings(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Tensor2 centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = embeddings(i, j) - mean[j];
  }
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += centered(i, a) * centered(i, b);
    }
  }
  for (double& v : cov) v /= static_cast<double>(n - 1);

  std::mt19937_64 rng(seed);
  Projection2D out;
  auto [l1, v1] = power_iterate(cov, d, iterations, rng, nullptr);
  fix_sign(v1);
  std::vector<double> v2(d, 0.0);
  double l2 = 0.0;
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
  if (d >= 2) {
    auto [lam, vec] = power_iterate(cov, d, iterations, rng, &v1);
    l2 = lam;
    v2 = vec;
  }
  const double tol = 1e-12 * std::max(trace, 1e-300);
  if (d < 2 || !(l2 > tol)) {
    std::fill(v2.begin(), v2.end(), 0.0);
    l2 = 0.0;
    out.warnings.push_back("covariance is rank-deficient; second component set to zero");
  } else {
    fix_sign(v2);
  }
  out.variances = {l1, l2};
  out.components = Tensor2(d, 2);
  for (std::size_t i = 0; i < d; ++i) {
    out.components(i, 0) = v1[i];
    out.components(i, 1) = v2[i];
  }
  out.coordinates = Tensor2(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out.coordinates(i, 0) += centered(i, j) * v1[j];
      out.coordinates(i, 1) += centered(i, j) * v2[j];
    }
  }
  return out;
}

TableFormat parse_table_format(const std::string& text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "markdown" || text == "md") return TableFormat::markdown;
  throw ConfigError("unknown table format '" + text + "'");
}

std::string render_table(std::span<const RunReport> reports, TableFormat format) {
  if (reports.empty()) throw TableError("no reports to tabulate");
  bool all_degrees = true;
  for (const auto& r : reports) {
    if (r.summary.label.empty() || r.summary.task.empty()) {
      throw TableError("report is missing its label or task key");
    }
    all_degrees = all_degrees && r.summary.degree >= 0.0;
  }
  std::vector<std::pair<double, std::string>> columns;
  std::vector<std::string> rows;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (const auto& r : reports) {
    const auto col = std::make_pair(all_degrees ? r.summary.degree : 0.0, r.summary.task);
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    if (std::find(rows.begin(), rows.end(), r.summary.label) == rows.end()) rows.push_back(r.summary.label);
    if (!cells.emplace(std::make_pair(r.summary.label, r.summary.task), r.summary.final_target_accuracy).second) {
      throw TableError("duplicate cell for " + r.summary.label + " / " + r.summary.task);
    }
  }
  std::sort(columns.begin(), columns.end());
  std::sort(rows.begin(), rows.end());

  auto cell = [&](const std::string& row, const std::string& col) {
    auto it = cells.find({row, col});
    if (it == cells.end()) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * it->second;
    return s.str();
  };

  std::ostringstream out;
  if (format == TableFormat::csv) {
    out << "method";
    for (const auto& c : columns) out << ',' << c.second;
    out << '\n';
    for (const auto& r : rows) {
      out << r;
      for (const auto& c : columns) out << ',' << cell(r, c.second);
      out << '\n';
    }
  } else {
    out << "| method |";
    for (const auto& c : columns) out << ' ' << c.second << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out << "---:|";
    out << '\n';
    for (const auto& r : rows) {
      out << "| " << r << " |";
      for (const auto& c : columns) out << ' ' << cell(r, c.second) << " |";
      out << '\n';
    }
  }
  return out.str();
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "true_class";
  for (std::size_t j = 0; j < cm.num_classes(); ++j) out << ",pred_" << j;
  out << '\n';
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    out << i;
    for (std::size_t j = 0; j < cm.num_classes(); ++j) out << ',' << cm(i, j);
    out << '\n';
  }
}

void write_projection_csv(const std::filesystem::path& path, const Projection2D& projection,
                          std::span<const int> labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "pc1,pc2,label\n" << std::setprecision(17);
  for (std::size_t i = 0; i < projection.coordinates.rows(); ++i) {
    out << projection.coordinates(i, 0) << ',' << projection.coordinates(i, 1) << ','
        << (i < labels.size() ? labels[i] : -1) << '\n';
  }
}

}  // namespace coal
