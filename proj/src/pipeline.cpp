#include "logn/pipeline.hpp"

#include <iomanip>
#include <sstream>

#include "logn/errors.hpp"

namespace logn {
namespace fs = std::filesystem;

namespace {

const char* task_name(Task t) {
  return t == Task::classification ? "classification" : "detection";
}

Task parse_task(const std::string& s) {
  if (s == "classification") return Task::classification;
  if (s == "detection") return Task::detection;
  throw DomainError("unknown task '" + s + "'");
}

json train_config_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"seed", t.seed},
          {"weight_decay", t.weight_decay},
          {"hidden_units", t.hidden_units},
          {"online_logn", t.online_logn},
          {"online_beta", t.online_beta.to_string()},
          {"online_momentum", t.online_momentum},
          {"online_eps", t.online_eps},
          {"warmup_steps", t.warmup_steps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.hidden_units = j.value("hidden_units", t.hidden_units);
  t.online_logn = j.value("online_logn", t.online_logn);
  t.online_beta = BetaMode::parse(j.value("online_beta", t.online_beta.to_string()));
  t.online_momentum = j.value("online_momentum", t.online_momentum);
  t.online_eps = j.value("online_eps", t.online_eps);
  t.warmup_steps = j.value("warmup_steps", t.warmup_steps);
  return t;
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error(std::string("stage '") + name + "' failed: " + e.what());
  }
}

std::string dump_extension(DumpFormat f) {
  return f == DumpFormat::binary ? ".lgtn" : ".ndjson";
}

}  // namespace

json config_to_json(const PipelineConfig& c) {
  return {{"task", task_name(c.task)},
          {"synth", synth_spec_to_json(c.synth)},
          {"holdout_per_class", c.holdout_per_class},
          {"holdout_bg_multiplier", c.holdout_bg_multiplier},
          {"bg_index", c.bg_index},
          {"oversample_threshold", c.oversample_threshold},
          {"train", train_config_to_json(c.train)},
          {"stats_batch_size", c.stats_batch_size},
          {"momentum", c.momentum},
          {"exact_stats", c.exact_stats},
          {"beta_mode", c.beta_mode.to_string()},
          {"sigma_exponent", c.sigma_exponent},
          {"eps", c.eps},
          {"tau", c.tau},
          {"dump_format", c.dump_format == DumpFormat::binary ? "binary" : "ndjson"}};
}

PipelineConfig config_from_json(const json& patch) {
  try {
    const Task task = parse_task(patch.value("task", std::string("classification")));
    PipelineConfig c = task == Task::classification ? reference_classification_config()
                                                    : reference_detection_config();
    // Nested sections are merged key by key, not replaced.
    json j = config_to_json(c);
    j.merge_patch(patch);
    if (j.contains("synth")) c.synth = synth_spec_from_json(j["synth"]);
    c.holdout_per_class = j.value("holdout_per_class", c.holdout_per_class);
    c.holdout_bg_multiplier = j.value("holdout_bg_multiplier", c.holdout_bg_multiplier);
    c.bg_index = j.value("bg_index", c.bg_index);
    c.oversample_threshold = j.value("oversample_threshold", c.oversample_threshold);
    if (j.contains("train")) c.train = train_config_from_json(j["train"]);
    c.stats_batch_size = j.value("stats_batch_size", c.stats_batch_size);
    c.momentum = j.value("momentum", c.momentum);
    c.exact_stats = j.value("exact_stats", c.exact_stats);
    c.beta_mode = BetaMode::parse(j.value("beta_mode", c.beta_mode.to_string()));
    c.sigma_exponent = j.value("sigma_exponent", c.sigma_exponent);
    c.eps = j.value("eps", c.eps);
    c.tau = j.value("tau", c.tau);
    c.dump_format = parse_dump_format(j.value("dump_format", std::string("binary")));
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

PipelineConfig reference_classification_config(std::uint64_t seed) {
  PipelineConfig c;
  c.task = Task::classification;
  c.synth.num_classes = 50;
  c.synth.feature_dim = 16;
  c.synth.max_count = 500;
  c.synth.imbalance_ratio = 100.0;
  c.synth.class_sep = 3.0;
  c.synth.noise_sigma = 1.0;
  c.synth.bg_multiplier = 0.0;
  c.synth.seed = seed;
  c.holdout_per_class = 40;
  c.train.epochs = 30;
  c.train.learning_rate = 0.1;
  c.train.batch_size = 64;
  c.train.seed = seed + 1;
  c.beta_mode = BetaMode::none();
  return c;
}

PipelineConfig reference_detection_config(std::uint64_t seed) {
  PipelineConfig c;
  c.task = Task::detection;
  c.synth.num_classes = 30;
  c.synth.feature_dim = 16;
  c.synth.max_count = 300;
  c.synth.imbalance_ratio = 100.0;
  c.synth.class_sep = 4.0;
  c.synth.noise_sigma = 1.0;
  c.synth.bg_multiplier = 3.0;
  c.synth.seed = seed;
  c.holdout_per_class = 30;
  // Test-time proposal pools are far more background-heavy than the sampler.
  c.holdout_bg_multiplier = 100.0;
  c.bg_index = 0;
  // Background surrounds the classes, which a linear head cannot separate.
  c.train.hidden_units = 64;
  c.train.epochs = 30;
  c.train.learning_rate = 0.1;
  c.train.batch_size = 64;
  c.train.weight_decay = 3e-2;
  c.train.seed = seed + 1;
  c.beta_mode = BetaMode::fg_min();
  return c;
}

Dataset generate_training_split(const PipelineConfig& config) {
  Dataset ds = config.task == Task::classification
                   ? generate_classification(config.synth)
                   : generate_detection_proxy(config.synth, config.bg_index);
  if (config.oversample_threshold > 0.0) {
    ds = repeat_factor_oversample(ds, config.oversample_threshold, config.synth.seed);
  }
  return ds;
}

Dataset generate_holdout_split(const PipelineConfig& config) {
  return generate_holdout(config.synth, config.holdout_per_class,
                          config.task == Task::detection
                              ? std::optional<int>(config.bg_index)
                              : std::nullopt,
                          config.holdout_bg_multiplier);
}

RunningStats accumulate_stats(const LogitView& train_logits,
                              const PipelineConfig& config) {
  return config.exact_stats
             ? compute_exact_parallel(train_logits, 4096, config.momentum, config.eps)
             : ema_pass(train_logits, config.stats_batch_size, config.momentum,
                        config.eps);
}

Benchmark prepare_benchmark(const PipelineConfig& config) {
  Benchmark b;
  b.config = config;
  b.train = generate_training_split(config);
  b.holdout = generate_holdout_split(config);
  b.trained = train(b.train, config.train);
  b.train_logits = predict_logits(b.trained.model, b.train);
  b.holdout_logits = predict_logits(b.trained.model, b.holdout);
  b.stats = accumulate_stats(b.train_logits, config);
  b.dist = foreground_label_distribution(b.train.labels, b.train.num_classes,
                                         b.train.bg_index);
  return b;
}

EvalReport evaluate_classification(const LogitView& logits,
                                   const LabelDistribution& dist) {
  return classify_and_score(logits, dist);
}

ApResult evaluate_detection(const LogitView& logits) {
  const LogitTable scores = softmax_rows(logits);
  return proposal_ranking_ap(scores, logits.bg_index());
}

LogitTable apply_logit_adjustment(const LogitView& logits,
                                  const LabelDistribution& dist, double tau) {
  LogitTable out(logits.num_classes(), logits.bg_index());
  out.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.push_back(logits.label(i), logit_adjustment_baseline(logits.row(i), dist, tau));
  }
  return out;
}

namespace {

EvalReport report_for(Task task, const LogitView& logits, const Benchmark& b) {
  EvalReport r;
  if (task == Task::classification) {
    r = evaluate_classification(logits, b.dist);
  } else {
    const ApResult ap = evaluate_detection(logits);
    r.per_class_ap = ap.per_class_ap;
    r.mean_ap = ap.mean_ap;
  }
  const auto corr = statistic_correlation(b.stats, b.dist);
  r.correlation_mean = corr.mean;
  r.correlation_var = corr.var;
  return r;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const fs::path& out_dir) {
  const std::string ext = dump_extension(config.dump_format);
  Benchmark b;
  b.config = config;
  stage("config", [&] {
    fs::create_directories(out_dir);
    atomic_write(out_dir / "resolved_config.json", dump_json(config_to_json(config)));
    return 0;
  });
  stage("gen", [&] {
    b.train = generate_training_split(config);
    b.holdout = generate_holdout_split(config);
    write_dataset(out_dir / "train", b.train);
    write_dataset(out_dir / "holdout", b.holdout);
    return 0;
  });
  stage("train", [&] {
    b.trained = train(b.train, config.train);
    atomic_write(out_dir / "model.json", dump_json(model_to_json(b.trained.model)));
    atomic_write(out_dir / "train_log.csv", train_log_csv(b.trained));
    return 0;
  });
  stage("dump", [&] {
    const auto train_path = out_dir / ("train_logits" + ext);
    const auto holdout_path = out_dir / ("holdout_logits" + ext);
    write_dump(train_path, predict_logits(b.trained.model, b.train), config.dump_format);
    write_dump(holdout_path, predict_logits(b.trained.model, b.holdout), config.dump_format);
    // Later stages read the dumps back, exactly as the separate subcommands do.
    const std::optional<int> bg = b.train.bg_index;
    b.train_logits = read_dump(train_path, bg);
    b.holdout_logits = read_dump(holdout_path, bg);
    return 0;
  });
  stage("stats", [&] {
    b.stats = accumulate_stats(b.train_logits, config);
    b.dist = foreground_label_distribution(b.train.labels, b.train.num_classes,
                                           b.train.bg_index);
    atomic_write(out_dir / "stats.json", dump_json(stats_to_json(b.stats)));
    atomic_write(out_dir / "label_distribution.json",
                 dump_json(label_distribution_to_json(b.dist)));
    return 0;
  });
  PipelineResult result;
  stage("finalize", [&] {
    result.params = finalize(b.stats, config.beta_mode, config.sigma_exponent);
    atomic_write(out_dir / "calibration.json",
                 dump_json(params_to_json(b.stats, result.params)));
    return 0;
  });
  LogitTable calibrated;
  stage("apply", [&] {
    calibrated = apply_logn(b.holdout_logits, result.params);
    write_dump(out_dir / ("holdout_calibrated" + ext), calibrated, config.dump_format);
    return 0;
  });
  stage("eval", [&] {
    result.baseline = report_for(config.task, b.holdout_logits, b);
    result.calibrated = report_for(config.task, calibrated, b);
    json doc = {{"baseline", eval_report_to_json(result.baseline)},
                {"logn", eval_report_to_json(result.calibrated)}};
    if (config.task == Task::classification) {
      const LogitTable adjusted = apply_logit_adjustment(b.holdout_logits, b.dist, config.tau);
      result.logit_adjusted = report_for(config.task, adjusted, b);
      doc["logit_adjustment"] = eval_report_to_json(*result.logit_adjusted);
    }
    atomic_write(out_dir / "eval_report.json", dump_json(doc));
    atomic_write(out_dir / "eval_logn.csv", eval_report_csv(result.calibrated));
    return 0;
  });
  return result;
}

std::vector<SweepRow> sweep(const LogitView& train_logits,
                            const LogitView& holdout_logits,
                            const std::vector<double>& momenta,
                            const std::vector<BetaMode>& modes,
                            std::size_t batch_size, double sigma_exponent, double eps) {
  if (train_logits.num_classes() != holdout_logits.num_classes()) {
    throw DimensionError("train and holdout dumps differ in width");
  }
  const bool detection = train_logits.bg_index().has_value();
  const auto dist = foreground_label_distribution(
      train_logits.labels(), train_logits.num_classes(), train_logits.bg_index());
  std::vector<SweepRow> rows;
  for (double m : momenta) {
    const RunningStats stats = ema_pass(train_logits, batch_size, m, eps);
    for (const auto& mode : modes) {
      const CalibrationParams p = finalize(stats, mode, sigma_exponent);
      const LogitTable calibrated = apply_logn(holdout_logits, p);
      SweepRow row{m, mode.to_string(), p.beta, 0.0};
      row.metric = detection ? evaluate_detection(calibrated).mean_ap
                             : evaluate_classification(calibrated, dist).balanced_accuracy;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream ss;
  ss << std::setprecision(17) << "momentum,beta_mode,beta,metric\n";
  for (const auto& r : rows) {
    ss << r.momentum << ',' << r.beta_mode << ',' << r.beta << ',' << r.metric << '\n';
  }
  return ss.str();
}

}  // namespace logn
