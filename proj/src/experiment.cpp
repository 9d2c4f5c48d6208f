#include "coal/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "coal/checkpoint.hpp"
#include "coal/errors.hpp"
#include "coal/io.hpp"

namespace coal {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

ShiftSpec ExperimentConfig::source_shift() const {
  ShiftSpec s;
  s.pareto_alpha = data.pareto_alpha;
  s.direction = ShiftDirection::source_reversed;
  s.degree = data.degree;
  s.min_per_class = data.min_per_class;
  s.budget = data.budget_source;
  s.interval_width = data.interval_width;
  return s;
}

ShiftSpec ExperimentConfig::target_shift() const {
  ShiftSpec s = source_shift();
  s.direction = ShiftDirection::target_ranked;
  s.budget = data.budget_target;
  return s;
}

ExperimentConfig experiment_from_json(const json& doc) {
  try {
    reject_unknown(doc,
                   {"name", "task", "method", "epochs", "pretrain_epochs", "batch_size",
                    "lr_classifier", "lr_other", "momentum", "alpha", "k_schedule", "sampler",
                    "ablations", "adversarial_weight", "seed", "model", "data",
                    "dump_pseudo_labels"},
                   "config");
    ExperimentConfig cfg;
    read_opt(doc, "name", cfg.name);
    read_opt(doc, "task", cfg.task);
    TrainConfig& t = cfg.train;
    if (doc.contains("method")) t.method = parse_method(doc.at("method").get<std::string>());
    read_opt(doc, "epochs", t.epochs);
    read_opt(doc, "pretrain_epochs", t.pretrain_epochs);
    read_opt(doc, "batch_size", t.batch_size);
    read_opt(doc, "lr_classifier", t.lr_classifier);
    read_opt(doc, "lr_other", t.lr_other);
    read_opt(doc, "momentum", t.momentum);
    read_opt(doc, "alpha", t.alpha);
    read_opt(doc, "adversarial_weight", t.adversarial_weight);
    read_opt(doc, "seed", t.seed);
    read_opt(doc, "dump_pseudo_labels", cfg.dump_pseudo_labels);
    if (doc.contains("sampler")) t.sampler = parse_sampler(doc.at("sampler").get<std::string>());
    if (doc.contains("k_schedule")) {
      const json& k = doc.at("k_schedule");
      if (k.is_string()) {
        t.k_schedule = KSchedule::preset(k.get<std::string>());
      } else {
        reject_unknown(k, {"k0", "k_step", "k_max"}, "k_schedule");
        read_opt(k, "k0", t.k_schedule.k0);
        read_opt(k, "k_step", t.k_schedule.k_step);
        read_opt(k, "k_max", t.k_schedule.k_max);
      }
    }
    if (doc.contains("ablations")) {
      const json& a = doc.at("ablations");
      reject_unknown(a, {"disable_pseudo", "disable_entropy"}, "ablations");
      read_opt(a, "disable_pseudo", t.ablations.disable_pseudo);
      read_opt(a, "disable_entropy", t.ablations.disable_entropy);
    }
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      reject_unknown(m, {"layer_widths", "temperature"}, "model");
      read_opt(m, "layer_widths", cfg.model.layer_widths);
      read_opt(m, "temperature", cfg.model.temperature);
    }
    if (doc.contains("data")) {
      const json& d = doc.at("data");
      reject_unknown(d,
                     {"source", "target", "seed", "synthetic", "shift", "holdout_fraction"},
                     "data");
      read_opt(d, "source", cfg.data.source);
      read_opt(d, "target", cfg.data.target);
      if (d.contains("seed")) cfg.data.seed = d.at("seed").get<std::uint64_t>();
      read_opt(d, "holdout_fraction", cfg.data.holdout_fraction);
      if (d.contains("synthetic")) {
        const json& s = d.at("synthetic");
        reject_unknown(s,
                       {"num_classes", "dims", "per_class", "radius", "noise", "rotation_deg",
                        "translation", "means"},
                       "data.synthetic");
        TwinDomainConfig& tw = cfg.data.synthetic;
        read_opt(s, "num_classes", tw.num_classes);
        read_opt(s, "dims", tw.dims);
        read_opt(s, "per_class", tw.per_class);
        read_opt(s, "radius", tw.radius);
        read_opt(s, "noise", tw.noise);
        read_opt(s, "rotation_deg", tw.rotation_deg);
        read_opt(s, "translation", tw.translation);
        read_opt(s, "means", tw.means);
      }
      if (d.contains("shift")) {
        const json& s = d.at("shift");
        reject_unknown(s,
                       {"enabled", "alpha", "degree", "budget_source", "budget_target",
                        "min_per_class", "interval_width"},
                       "data.shift");
        read_opt(s, "enabled", cfg.data.shift_enabled);
        read_opt(s, "alpha", cfg.data.pareto_alpha);
        read_opt(s, "degree", cfg.data.degree);
        read_opt(s, "budget_source", cfg.data.budget_source);
        read_opt(s, "budget_target", cfg.data.budget_target);
        read_opt(s, "min_per_class", cfg.data.min_per_class);
        read_opt(s, "interval_width", cfg.data.interval_width);
      }
    }
    t.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

json to_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const DataConfig& d = cfg.data;
  json data = {{"source", d.source},
               {"target", d.target},
               {"synthetic",
                {{"num_classes", d.synthetic.num_classes},
                 {"dims", d.synthetic.dims},
                 {"per_class", d.synthetic.per_class},
                 {"radius", d.synthetic.radius},
                 {"noise", d.synthetic.noise},
                 {"rotation_deg", d.synthetic.rotation_deg},
                 {"translation", d.synthetic.translation},
                 {"means", d.synthetic.means}}},
               {"shift",
                {{"enabled", d.shift_enabled},
                 {"alpha", d.pareto_alpha},
                 {"degree", d.degree},
                 {"budget_source", d.budget_source},
                 {"budget_target", d.budget_target},
                 {"min_per_class", d.min_per_class},
                 {"interval_width", d.interval_width}}},
               {"holdout_fraction", d.holdout_fraction}};
  if (d.seed) data["seed"] = *d.seed;
  return {{"name", cfg.name},
          {"task", cfg.task},
          {"method", to_string(t.method)},
          {"epochs", t.epochs},
          {"pretrain_epochs", t.pretrain_epochs},
          {"batch_size", t.batch_size},
          {"lr_classifier", t.lr_classifier},
          {"lr_other", t.lr_other},
          {"momentum", t.momentum},
          {"alpha", t.alpha},
          {"k_schedule", {{"k0", t.k_schedule.k0}, {"k_step", t.k_schedule.k_step}, {"k_max", t.k_schedule.k_max}}},
          {"sampler", to_string(t.sampler)},
          {"ablations", {{"disable_pseudo", t.ablations.disable_pseudo}, {"disable_entropy", t.ablations.disable_entropy}}},
          {"adversarial_weight", t.adversarial_weight},
          {"seed", t.seed},
          {"model", {{"layer_widths", cfg.model.layer_widths}, {"temperature", cfg.model.temperature}}},
          {"data", data},
          {"dump_pseudo_labels", cfg.dump_pseudo_labels}};
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return experiment_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  if (!starts_with(text, "synthetic")) throw ConfigError("not a synthetic spec: " + text);
  SyntheticSpec spec;
  double tx = 0.0, ty = 0.0;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key=value in '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      try {
        if (key == "classes") spec.twin.num_classes = std::stoul(value);
        else if (key == "dims") spec.twin.dims = std::stoul(value);
        else if (key == "per_class") spec.twin.per_class = std::stoul(value);
        else if (key == "radius") spec.twin.radius = std::stod(value);
        else if (key == "noise") spec.twin.noise = std::stod(value);
        else if (key == "rotation") spec.twin.rotation_deg = std::stod(value);
        else if (key == "tx") tx = std::stod(value);
        else if (key == "ty") ty = std::stod(value);
        else if (key == "seed") spec.seed = std::stoull(value);
        else if (key == "domain") {
          if (value != "source" && value != "target") throw ConfigError("domain must be source or target");
          spec.target = value == "target";
        } else {
          throw ConfigError("unknown synthetic key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw ConfigError("bad value for synthetic key '" + key + "'");
      }
    }
  }
  if (tx != 0.0 || ty != 0.0) {
    spec.twin.translation.assign(spec.twin.dims, 0.0);
    spec.twin.translation[0] = tx;
    spec.twin.translation[1] = ty;
  }
  return spec;
}

LabeledDataset load_domain_file(const std::string& spec, std::size_t num_classes) {
  if (starts_with(spec, "idx:")) {
    const std::string rest = spec.substr(4);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw ConfigError("idx spec needs '<images>,<labels>'");
    return load_idx(rest.substr(0, comma), rest.substr(comma + 1), num_classes);
  }
  if (starts_with(spec, "csv:")) return load_csv(spec.substr(4), num_classes);
  return load_csv(spec, num_classes);
}

BuiltData build_domain_data(const ExperimentConfig& config) {
  const std::uint64_t seed = config.data_seed();
  BuiltData built;
  LabeledDataset src_pool, tgt_pool;
  const bool synth_src = config.data.source == "synthetic";
  const bool synth_tgt = config.data.target == "synthetic";
  if (synth_src || synth_tgt) {
    auto [s, t] = generate_twin_domains(config.data.synthetic, seed);
    if (synth_src) src_pool = std::move(s);
    if (synth_tgt) tgt_pool = std::move(t);
  }
  if (!synth_src) {
    src_pool = load_domain_file(config.data.source);
    built.input_files.push_back(config.data.source);
  }
  if (!synth_tgt) {
    tgt_pool = load_domain_file(config.data.target, src_pool.num_classes);
    built.input_files.push_back(config.data.target);
  }
  if (src_pool.num_classes != tgt_pool.num_classes) {
    throw ConsistencyError("source has " + std::to_string(src_pool.num_classes) +
                           " classes but target has " + std::to_string(tgt_pool.num_classes));
  }
  if (src_pool.features.cols() != tgt_pool.features.cols()) {
    throw ConsistencyError("source and target feature dimensions differ");
  }
  if (config.data.shift_enabled) {
    built.domains.source = build_shift(src_pool, config.source_shift(), derive_seed(seed, 11, 0));
    built.target_full = build_shift(tgt_pool, config.target_shift(), derive_seed(seed, 12, 0));
  } else {
    built.domains.source = std::move(src_pool);
    built.target_full = std::move(tgt_pool);
  }
  auto [train, eval] =
      stratified_holdout(built.target_full, config.data.holdout_fraction, derive_seed(seed, 13, 0));
  built.domains.target_train = std::move(train);
  built.domains.target_eval = std::move(eval);
  return built;
}

json dataset_manifest(const LabeledDataset& dataset, const std::string& data_file,
                      const std::filesystem::path& dir, const std::optional<ShiftSpec>& shift,
                      std::uint64_t seed, const std::vector<std::string>& input_files) {
  json hashes = json::object();
  hashes[data_file] = sha256_file(dir / data_file);
  for (const auto& f : input_files) {
    std::string path = f;
    if (starts_with(path, "csv:")) path = path.substr(4);
    if (starts_with(path, "idx:")) {
      const std::string rest = path.substr(4);
      const auto comma = rest.find(',');
      hashes[rest.substr(0, comma)] = sha256_file(rest.substr(0, comma));
      hashes[rest.substr(comma + 1)] = sha256_file(rest.substr(comma + 1));
      continue;
    }
    hashes[path] = sha256_file(path);
  }
  json shift_json = nullptr;
  if (shift) {
    shift_json = {{"alpha", shift->pareto_alpha},
                  {"direction", to_string(shift->direction)},
                  {"degree", shift->degree},
                  {"budget", shift->budget},
                  {"min_per_class", shift->min_per_class},
                  {"interval_width", shift->interval_width}};
  }
  return {{"format", "coal-dataset-manifest"},
          {"version", 1},
          {"data_file", data_file},
          {"num_classes", dataset.num_classes},
          {"num_features", dataset.features.cols()},
          {"size", dataset.size()},
          {"class_counts", dataset.class_counts()},
          {"shift", shift_json},
          {"seed", seed},
          {"provenance", dataset.provenance},
          {"hashes", hashes}};
}

LabeledDataset load_manifest_dataset(const std::filesystem::path& manifest_path) {
  json doc;
  try {
    doc = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "coal-dataset-manifest") {
      throw FormatError(manifest_path.string() + " is not a dataset manifest");
    }
    const auto data_path = manifest_path.parent_path() / doc.at("data_file").get<std::string>();
    LabeledDataset ds = load_csv(data_path, doc.at("num_classes").get<std::size_t>());
    if (ds.size() != doc.at("size").get<std::size_t>()) {
      throw ConsistencyError(data_path.string() + " does not match its manifest's size");
    }
    return ds;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

RunReport run_experiment(const ExperimentConfig& config,
                         const std::optional<std::filesystem::path>& out_dir) {
  config.train.validate();
  BuiltData built = build_domain_data(config);
  ModelConfig mc = config.model;
  mc.input_dim = built.domains.source.features.cols();
  mc.num_classes = built.domains.source.num_classes;
  mc.seed = config.train.seed;
  ModelParams params = init_model(mc);

  std::ofstream metrics;
  StepSink sink;
  std::function<void(const PseudoLabelSet&, std::size_t)> pseudo_hook;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    metrics.open(*out_dir / "metrics.jsonl");
    if (!metrics) throw IoError("cannot write metrics.jsonl in " + out_dir->string());
    sink = [&metrics](const json& line) { metrics << line.dump() << '\n'; };
    if (config.dump_pseudo_labels) {
      std::filesystem::create_directories(*out_dir / "pseudo_labels");
      pseudo_hook = [dir = *out_dir](const PseudoLabelSet& pseudo, std::size_t epoch) {
        write_pseudo_label_csv(dir / "pseudo_labels" / ("epoch_" + std::to_string(epoch) + ".csv"), pseudo);
      };
    }
  }

  RunReport report = train(params, built.domains, config.train, sink, pseudo_hook);
  report.config = to_json(config);
  report.summary.degree = config.data.shift_enabled ? config.data.degree : -1.0;
  if (!config.task.empty()) {
    report.summary.task = config.task;
  } else if (config.data.shift_enabled) {
    std::ostringstream t;
    t << "d=" << config.data.degree;
    report.summary.task = t.str();
  } else {
    report.summary.task = config.name;
  }

  if (out_dir) {
    const auto& dir = *out_dir;
    const std::uint64_t seed = config.data_seed();
    write_csv(dir / "source.csv", built.domains.source);
    write_csv(dir / "target.csv", built.target_full);
    write_csv(dir / "target_eval.csv", built.domains.target_eval);
    std::optional<ShiftSpec> src_shift, tgt_shift;
    if (config.data.shift_enabled) {
      src_shift = config.source_shift();
      tgt_shift = config.target_shift();
    }
    write_text(dir / "source_manifest.json",
               dataset_manifest(built.domains.source, "source.csv", dir, src_shift, seed, built.input_files).dump(2) + "\n");
    write_text(dir / "target_manifest.json",
               dataset_manifest(built.target_full, "target.csv", dir, tgt_shift, seed, built.input_files).dump(2) + "\n");
    write_text(dir / "target_eval_manifest.json",
               dataset_manifest(built.domains.target_eval, "target_eval.csv", dir, tgt_shift, seed, built.input_files).dump(2) + "\n");
    save_checkpoint(dir / "checkpoint.json", params);
    write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  }
  return report;
}

}  // namespace coal
