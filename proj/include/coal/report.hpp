#pragma once

#include <string>
#include <vector>

#include "coal/objectives.hpp"
#include "json.hpp"

namespace coal {

inline constexpr int kReportSchemaVersion = 1;

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown losses;                     // means over the epoch's steps
  double target_accuracy = 0.0;             // per-class mean accuracy on the target holdout
  std::vector<double> estimated_distribution;
  double k_percent = 0.0;
  std::size_t masked = 0;
  double pseudo_label_accuracy = 0.0;       // accuracy of the masked pseudo-labels
  double discriminator_accuracy = 0.0;      // marginal-align only
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct RunSummary {
  std::string method;
  std::string label;  // table row key
  std::string task;   // table column key
  double degree = -1.0;
  double pretrain_target_accuracy = 0.0;
  double final_target_accuracy = 0.0;
  double final_source_accuracy = 0.0;
  std::vector<double> target_distribution;
  double target_js_distance = 0.0;  // estimated vs true target label distribution
  double label_shift_bound = 0.0;   // js_label_bound(source, target) with no feature term
};

struct RunReport {
  std::vector<EpochRecord> records;
  RunSummary summary;
  nlohmann::json config;
  double total_wall_seconds = 0.0;
};

/// report.json layout: {"schema_version", "metrics": {...}, "timing": {...}}.
/// Everything under "metrics" is a pure function of seed, config and data.
nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);
nlohmann::json metrics_json(const RunReport& report);

}  // namespace coal
