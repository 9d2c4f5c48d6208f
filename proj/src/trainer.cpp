#include "coal/trainer.hpp"

#include <chrono>
#include <cmath>

#include "coal/errors.hpp"
#include "coal/evaluation.hpp"
#include "coal/objectives.hpp"

namespace coal {

namespace {

enum : std::uint64_t { kPretrainStream = 1, kSourceStream = 2, kTargetStream = 3 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_finite(double loss, const char* phase, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string("non-finite loss during ") + phase + " (epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step) +
                          "); run aborted");
  }
}

void apply_step(ModelParams& params, const Gradients& grads, const std::vector<double>& lrs,
                double momentum) {
  params.zero_grad();
  grads.accumulate_into(params);
  const auto blocks = params.blocks();
  sgd_momentum_step(blocks, lrs, momentum);
}

std::vector<double> prediction_histogram(const ModelParams& params, const LabeledDataset& data) {
  const auto predicted = argmax_rows(classify(params, data.features).probabilities);
  std::vector<double> counts(params.num_classes(), 0.0);
  for (int p : predicted) counts[static_cast<std::size_t>(p)] += 1.0;
  if (predicted.empty()) return counts;
  return LabelDistribution::from_weights(counts).proportions();
}

struct StepAccumulator {
  LossBreakdown sum;
  double disc_accuracy = 0.0;
  std::size_t steps = 0;

  void add(const LossBreakdown& l) {
    sum.l_sc += l.l_sc;
    sum.l_target_pseudo += l.l_target_pseudo;
    sum.l_st += l.l_st;
    sum.l_h += l.l_h;
    sum.alpha = l.alpha;
    ++steps;
  }
  LossBreakdown mean() const {
    LossBreakdown m = sum;
    if (steps == 0) return m;
    const double n = static_cast<double>(steps);
    m.l_sc /= n;
    m.l_target_pseudo /= n;
    m.l_st /= n;
    m.l_h /= n;
    return m;
  }
};

nlohmann::json step_json(const char* phase, std::size_t epoch, std::size_t step,
                         const LossBreakdown& l) {
  return {{"phase", phase},      {"epoch", epoch},
          {"step", step},        {"l_sc", l.l_sc},
          {"l_target_pseudo", l.l_target_pseudo},
          {"l_st", l.l_st},      {"l_h", l.l_h},
          {"alpha", l.alpha}};
}

}  // namespace

Method parse_method(const std::string& text) {
  if (text == "coal") return Method::coal;
  if (text == "source-only" || text == "source_only") return Method::source_only;
  if (text == "marginal-align" || text == "marginal_align") return Method::marginal_align;
  throw ConfigError("unknown method '" + text + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::coal: return "coal";
    case Method::source_only: return "source-only";
    case Method::marginal_align: return "marginal-align";
  }
  return "?";
}

SamplerKind parse_sampler(const std::string& text) {
  if (text == "balanced") return SamplerKind::balanced;
  if (text == "natural") return SamplerKind::natural;
  throw ConfigError("unknown sampler '" + text + "'");
}

std::string to_string(SamplerKind kind) {
  return kind == SamplerKind::balanced ? "balanced" : "natural";
}

void TrainConfig::validate() const {
  if (method != Method::coal && (ablations.disable_pseudo || ablations.disable_entropy)) {
    throw ConfigError("ablation flags are only valid with method = coal");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(lr_classifier >= 0.0) || !(lr_other >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (!(adversarial_weight >= 0.0)) throw ConfigError("adversarial_weight must be >= 0");
  if (!(k_schedule.k0 >= 0.0 && k_schedule.k_max <= 100.0 && k_schedule.k_step >= 0.0 &&
        k_schedule.k0 <= k_schedule.k_max)) {
    throw ConfigError("k schedule must satisfy 0 <= k0 <= k_max <= 100 and k_step >= 0");
  }
}

std::string TrainConfig::label() const {
  std::string out = to_string(method);
  if (ablations.disable_pseudo) out += "-no-pseudo";
  if (ablations.disable_entropy) out += "-no-entropy";
  if (sampler == SamplerKind::natural) out += "-natural";
  return out;
}

double evaluate_accuracy(const ModelParams& params, const LabeledDataset& data) {
  const auto predicted = argmax_rows(classify(params, data.features).probabilities);
  return per_class_mean_accuracy(
      ConfusionMatrix::from_predictions(data.labels, predicted, data.num_classes));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose, std::uint64_t epoch) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ purpose) ^ epoch);
}

std::vector<double> learning_rates_for(const ModelParams& params, const TrainConfig& config) {
  std::vector<double> lrs;
  for (BlockRole role : params.roles()) {
    lrs.push_back(role == BlockRole::extractor ? config.lr_other : config.lr_classifier);
  }
  return lrs;
}

std::size_t steps_per_epoch(const DomainData& data, const TrainConfig& config) {
  const std::size_t b = config.batch_size;
  return std::max((data.source.size() + b - 1) / b, (data.target_train.size() + b - 1) / b);
}

BatchPlan source_plan(const LabeledDataset& source, const TrainConfig& config, std::size_t epoch,
                      std::size_t steps) {
  const std::uint64_t seed = derive_seed(config.seed, kSourceStream, epoch);
  if (config.sampler == SamplerKind::balanced) {
    return balanced_batches(source, config.batch_size, seed, steps);
  }
  return natural_batches(source.size(), config.batch_size, seed);
}

BatchPlan target_plan(const LabeledDataset& target, const TrainConfig& config, std::size_t epoch) {
  return natural_batches(target.size(), config.batch_size,
                         derive_seed(config.seed, kTargetStream, epoch));
}

void pretrain(ModelParams& params, const LabeledDataset& source, const TrainConfig& config,
              const StepSink& sink) {
  config.validate();
  const auto lrs = learning_rates_for(params, config);
  for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    const std::uint64_t seed = derive_seed(config.seed, kPretrainStream, epoch);
    const BatchPlan plan = make_batches(config.sampler, source, config.batch_size, seed);
    for (std::size_t step = 0; step < plan.batches.size(); ++step) {
      const auto& idx = plan.batches[step];
      const Tensor2 x = source.features.gather_rows(idx);
      std::vector<int> y;
      for (std::size_t i : idx) y.push_back(source.labels[i]);
      ObjectiveResult res = source_classification_loss(params, x, y);
      check_finite(res.value, "pretraining", epoch, step);
      apply_step(params, res.gradients, lrs, config.momentum);
      if (sink) {
        LossBreakdown l;
        l.l_sc = l.l_st = res.value;
        sink(step_json("pretrain", epoch, step, l));
      }
    }
  }
}

EpochRecord run_coal_epoch(ModelParams& params, const DomainData& data, const TrainConfig& config,
                           std::size_t epoch, const StepSink& sink, PseudoLabelSet* pseudo_out) {
  const auto start = Clock::now();
  EpochRecord record;
  record.epoch = epoch;

  // Step A: pseudo-labels are recomputed from scratch every epoch.
  record.k_percent = advance_k(config.k_schedule, epoch);
  const PseudoLabelSet pseudo =
      select_top_k_per_class(assign_pseudo_labels(params, data.target_train.features), record.k_percent);
  record.masked = pseudo.masked_count();
  if (record.masked == 0) {
    record.warnings.push_back("no pseudo-labels selected; epoch trained on the source loss only");
    record.estimated_distribution.assign(params.num_classes(), 0.0);
  } else {
    record.estimated_distribution =
        estimate_target_distribution(pseudo, params.num_classes()).proportions();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      if (pseudo.mask[i] && pseudo.labels[i] == data.target_train.labels[i]) ++correct;
    }
    record.pseudo_label_accuracy = static_cast<double>(correct) / static_cast<double>(record.masked);
  }
  if (pseudo_out) *pseudo_out = pseudo;

  // Step B.
  const auto lrs = learning_rates_for(params, config);
  const std::size_t steps = steps_per_epoch(data, config);
  const BatchPlan src_plan = source_plan(data.source, config, epoch, steps);
  const BatchPlan tgt_plan = target_plan(data.target_train, config, epoch);
  const AdaptiveTerms terms{!config.ablations.disable_pseudo, !config.ablations.disable_entropy};
  StepAccumulator acc;
  for (std::size_t step = 0; step < steps; ++step) {
    const auto& s_idx = src_plan.batches[step % src_plan.batches.size()];
    const auto& t_idx = tgt_plan.batches[step % tgt_plan.batches.size()];
    const Tensor2 xs = data.source.features.gather_rows(s_idx);
    std::vector<int> ys;
    for (std::size_t i : s_idx) ys.push_back(data.source.labels[i]);
    const Tensor2 xt = data.target_train.features.gather_rows(t_idx);
    std::vector<int> yt;
    std::vector<std::uint8_t> mt;
    for (std::size_t i : t_idx) {
      yt.push_back(pseudo.labels[i]);
      mt.push_back(pseudo.mask[i]);
    }
    AdaptiveResult res = adaptive_objective(params, xs, ys, xt, yt, mt, config.alpha, terms);
    check_finite(res.losses.l_st + res.losses.l_h, "adaptation", epoch, step);
    apply_step(params, res.gradients, lrs, config.momentum);
    acc.add(res.losses);
    if (sink) sink(step_json("adapt", epoch, step, res.losses));
  }
  record.losses = acc.mean();
  record.target_accuracy = evaluate_accuracy(params, data.target_eval);
  record.wall_seconds = seconds_since(start);
  return record;
}

EpochRecord run_marginal_align_epoch(ModelParams& params, const DomainData& data,
                                     const TrainConfig& config, std::size_t epoch,
                                     const StepSink& sink) {
  const auto start = Clock::now();
  EpochRecord record;
  record.epoch = epoch;
  const auto lrs = learning_rates_for(params, config);
  const std::size_t steps = steps_per_epoch(data, config);
  const BatchPlan src_plan = source_plan(data.source, config, epoch, steps);
  const BatchPlan tgt_plan = target_plan(data.target_train, config, epoch);
  StepAccumulator acc;
  for (std::size_t step = 0; step < steps; ++step) {
    const auto& s_idx = src_plan.batches[step % src_plan.batches.size()];
    const auto& t_idx = tgt_plan.batches[step % tgt_plan.batches.size()];
    const Tensor2 xs = data.source.features.gather_rows(s_idx);
    std::vector<int> ys;
    for (std::size_t i : s_idx) ys.push_back(data.source.labels[i]);
    const Tensor2 xt = data.target_train.features.gather_rows(t_idx);
    MarginalAlignResult res =
        marginal_alignment_objective(params, xs, ys, xt, config.adversarial_weight);
    check_finite(res.l_sc + res.l_domain, "marginal alignment", epoch, step);
    apply_step(params, res.gradients, lrs, config.momentum);
    LossBreakdown l;
    l.l_sc = l.l_st = res.l_sc;
    acc.add(l);
    acc.disc_accuracy += res.discriminator_accuracy;
    if (sink) {
      auto j = step_json("adapt", epoch, step, l);
      j["l_domain"] = res.l_domain;
      j["discriminator_accuracy"] = res.discriminator_accuracy;
      sink(j);
    }
  }
  record.losses = acc.mean();
  record.discriminator_accuracy = steps ? acc.disc_accuracy / static_cast<double>(steps) : 0.0;
  record.estimated_distribution = prediction_histogram(params, data.target_train);
  record.target_accuracy = evaluate_accuracy(params, data.target_eval);
  record.wall_seconds = seconds_since(start);
  return record;
}

EpochRecord run_source_only_epoch(ModelParams& params, const DomainData& data,
                                  const TrainConfig& config, std::size_t epoch,
                                  const StepSink& sink) {
  const auto start = Clock::now();
  EpochRecord record;
  record.epoch = epoch;
  const auto lrs = learning_rates_for(params, config);
  const std::size_t steps = steps_per_epoch(data, config);
  const BatchPlan src_plan = source_plan(data.source, config, epoch, steps);
  StepAccumulator acc;
  for (std::size_t step = 0; step < steps; ++step) {
    const auto& s_idx = src_plan.batches[step % src_plan.batches.size()];
    const Tensor2 xs = data.source.features.gather_rows(s_idx);
    std::vector<int> ys;
    for (std::size_t i : s_idx) ys.push_back(data.source.labels[i]);
    ObjectiveResult res = source_classification_loss(params, xs, ys);
    check_finite(res.value, "source-only training", epoch, step);
    apply_step(params, res.gradients, lrs, config.momentum);
    LossBreakdown l;
    l.l_sc = l.l_st = res.value;
    acc.add(l);
    if (sink) sink(step_json("adapt", epoch, step, l));
  }
  record.losses = acc.mean();
  record.estimated_distribution = prediction_histogram(params, data.target_train);
  record.target_accuracy = evaluate_accuracy(params, data.target_eval);
  record.wall_seconds = seconds_since(start);
  return record;
}

RunReport train(ModelParams& params, const DomainData& data, const TrainConfig& config,
                const StepSink& sink,
                const std::function<void(const PseudoLabelSet&, std::size_t)>& pseudo_hook) {
  config.validate();
  params.validate();
  const auto start = Clock::now();
  RunReport report;
  report.summary.method = to_string(config.method);
  report.summary.label = config.label();

  pretrain(params, data.source, config, sink);
  report.summary.pretrain_target_accuracy = evaluate_accuracy(params, data.target_eval);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    switch (config.method) {
      case Method::coal: {
        PseudoLabelSet pseudo;
        report.records.push_back(run_coal_epoch(params, data, config, epoch, sink, &pseudo));
        if (pseudo_hook) pseudo_hook(pseudo, epoch);
        break;
      }
      case Method::marginal_align:
        report.records.push_back(run_marginal_align_epoch(params, data, config, epoch, sink));
        break;
      case Method::source_only:
        report.records.push_back(run_source_only_epoch(params, data, config, epoch, sink));
        break;
    }
  }

  report.summary.final_target_accuracy = evaluate_accuracy(params, data.target_eval);
  report.summary.final_source_accuracy = evaluate_accuracy(params, data.source);
  std::vector<double> tgt_counts, src_counts;
  for (std::size_t n : data.target_train.class_counts()) tgt_counts.push_back(static_cast<double>(n));
  for (std::size_t n : data.source.class_counts()) src_counts.push_back(static_cast<double>(n));
  const LabelDistribution q = LabelDistribution::from_weights(tgt_counts);
  const LabelDistribution p = LabelDistribution::from_weights(src_counts);
  report.summary.target_distribution = q.proportions();
  report.summary.label_shift_bound = js_label_bound(p, q);
  if (!report.records.empty()) {
    const auto& est = report.records.back().estimated_distribution;
    double total = 0.0;
    for (double v : est) total += v;
    if (total > 0.0) {
      report.summary.target_js_distance = js_distance(LabelDistribution::from_weights(est), q);
    }
  } else {
    report.summary.target_js_distance =
        js_distance(LabelDistribution::from_weights(prediction_histogram(params, data.target_train)), q);
  }
  report.total_wall_seconds = seconds_since(start);
  return report;
}

}  // namespace coal
