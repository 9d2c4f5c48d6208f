#include "coal/report.hpp"

#include "coal/errors.hpp"

namespace coal {

using nlohmann::json;

namespace {

json losses_json(const LossBreakdown& l) {
  return {{"l_sc", l.l_sc}, {"l_target_pseudo", l.l_target_pseudo}, {"l_st", l.l_st},
          {"l_h", l.l_h}, {"alpha", l.alpha}};
}

LossBreakdown losses_from(const json& j) {
  LossBreakdown l;
  l.l_sc = j.at("l_sc").get<double>();
  l.l_target_pseudo = j.at("l_target_pseudo").get<double>();
  l.l_st = j.at("l_st").get<double>();
  l.l_h = j.at("l_h").get<double>();
  l.alpha = j.at("alpha").get<double>();
  return l;
}

}  // namespace

json metrics_json(const RunReport& report) {
  json epochs = json::array();
  for (const auto& r : report.records) {
    epochs.push_back({{"epoch", r.epoch},
                      {"losses", losses_json(r.losses)},
                      {"target_accuracy", r.target_accuracy},
                      {"estimated_distribution", r.estimated_distribution},
                      {"k_percent", r.k_percent},
                      {"masked", r.masked},
                      {"pseudo_label_accuracy", r.pseudo_label_accuracy},
                      {"discriminator_accuracy", r.discriminator_accuracy},
                      {"warnings", r.warnings}});
  }
  const auto& s = report.summary;
  json summary = {{"method", s.method},
                  {"label", s.label},
                  {"task", s.task},
                  {"degree", s.degree},
                  {"metric", "per_class_mean_accuracy"},
                  {"pretrain_target_accuracy", s.pretrain_target_accuracy},
                  {"final_target_accuracy", s.final_target_accuracy},
                  {"final_source_accuracy", s.final_source_accuracy},
                  {"target_distribution", s.target_distribution},
                  {"target_js_distance", s.target_js_distance},
                  {"label_shift_bound", s.label_shift_bound},
                  {"js_log_base", "e"}};
  return {{"epochs", epochs}, {"summary", summary}};
}

json to_json(const RunReport& report) {
  json timing = {{"total_wall_seconds", report.total_wall_seconds}};
  json per_epoch = json::array();
  for (const auto& r : report.records) per_epoch.push_back(r.wall_seconds);
  timing["epoch_wall_seconds"] = per_epoch;
  return {{"schema_version", kReportSchemaVersion},
          {"config", report.config},
          {"metrics", metrics_json(report)},
          {"timing", timing}};
}

RunReport report_from_json(const json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw FormatError("unsupported report schema version");
    }
    RunReport report;
    report.config = doc.value("config", json::object());
    const json& m = doc.at("metrics");
    const json& timing = doc.value("timing", json::object());
    const json walls = timing.value("epoch_wall_seconds", json::array());
    std::size_t i = 0;
    for (const auto& e : m.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<std::size_t>();
      r.losses = losses_from(e.at("losses"));
      r.target_accuracy = e.at("target_accuracy").get<double>();
      r.estimated_distribution = e.at("estimated_distribution").get<std::vector<double>>();
      r.k_percent = e.at("k_percent").get<double>();
      r.masked = e.at("masked").get<std::size_t>();
      r.pseudo_label_accuracy = e.at("pseudo_label_accuracy").get<double>();
      r.discriminator_accuracy = e.at("discriminator_accuracy").get<double>();
      r.warnings = e.at("warnings").get<std::vector<std::string>>();
      if (i < walls.size()) r.wall_seconds = walls[i].get<double>();
      ++i;
      report.records.push_back(std::move(r));
    }
    const json& s = m.at("summary");
    if (s.at("metric").get<std::string>() != "per_class_mean_accuracy") {
      throw FormatError("report metric is not per_class_mean_accuracy");
    }
    report.summary.method = s.at("method").get<std::string>();
    report.summary.label = s.at("label").get<std::string>();
    report.summary.task = s.at("task").get<std::string>();
    report.summary.degree = s.at("degree").get<double>();
    report.summary.pretrain_target_accuracy = s.at("pretrain_target_accuracy").get<double>();
    report.summary.final_target_accuracy = s.at("final_target_accuracy").get<double>();
    report.summary.final_source_accuracy = s.at("final_source_accuracy").get<double>();
    report.summary.target_distribution = s.at("target_distribution").get<std::vector<double>>();
    report.summary.target_js_distance = s.at("target_js_distance").get<double>();
    report.summary.label_shift_bound = s.at("label_shift_bound").get<double>();
    report.total_wall_seconds = timing.value("total_wall_seconds", 0.0);
    return report;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace coal
