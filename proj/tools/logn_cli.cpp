// logn: generate, train, dump, calibrate and evaluate from the command line.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "logn/errors.hpp"
#include "logn/io.hpp"
#include "logn/pipeline.hpp"
#include "logn/verify.hpp"

using namespace logn;
namespace fs = std::filesystem;

namespace {

// Background slot for text dumps; binary dumps carry their own.
struct BgOption {
  int index = 0;
  bool none = false;

  void add(CLI::App* app) {
    app->add_option("--bg-index", index, "Background slot for NDJSON input")
        ->capture_default_str();
    app->add_flag("--no-bg", none, "NDJSON input has no background slot");
  }
  std::optional<int> get() const { return none ? std::nullopt : std::optional<int>(index); }
};

PipelineConfig load_config(const std::string& path, const std::string& task) {
  if (!path.empty()) return config_from_json(json::parse(read_file(path)));
  return config_from_json(json{{"task", task}});
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    atomic_write(path, text);
  }
}

std::vector<BetaMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<BetaMode> out;
  for (const auto& n : names) out.push_back(BetaMode::parse(n));
  return out;
}

struct FinalizeFlags {
  std::string beta_mode = "fg-min";
  double sigma_exponent = 1.0;
  std::optional<double> eps;

  void add(CLI::App* app) {
    app->add_option("--beta-mode", beta_mode, "fg-min|fg-avg|fg-max|bg-mean|const:<v>|none")
        ->capture_default_str();
    app->add_option("--sigma-exponent", sigma_exponent, "Exponent p of (var + eps)^(p/2)")
        ->capture_default_str();
    app->add_option("--eps", eps, "Override the eps stored with the statistics");
  }

  CalibrationParams apply(RunningStats stats) const {
    if (eps) stats.eps = *eps;
    return finalize(stats, BetaMode::parse(beta_mode), sigma_exponent);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logit normalization toolkit"};
  app.require_subcommand(1);

  // gen
  std::string gen_config, gen_task = "classification", gen_out;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen", "Generate the synthetic train and holdout splits");
  gen->add_option("--config", gen_config, "Pipeline config JSON");
  gen->add_option("--task", gen_task, "classification|detection when no config is given")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "Override the data seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  std::string train_config, train_data, train_out, train_log;
  auto* trn = app.add_subcommand("train", "Train a classifier on a generated split");
  trn->add_option("--config", train_config, "Pipeline config JSON (train section is used)");
  trn->add_option("--data", train_data, "Dataset stem, e.g. out/train")->required();
  trn->add_option("--out", train_out, "Model JSON")->required();
  trn->add_option("--log", train_log, "Per-epoch loss CSV");

  // dump
  std::string dump_model, dump_data, dump_out, dump_format;
  auto* dmp = app.add_subcommand("dump", "Write the model's logits for a dataset");
  dmp->add_option("--model", dump_model, "Model JSON")->required();
  dmp->add_option("--data", dump_data, "Dataset stem")->required();
  dmp->add_option("--out", dump_out, "Logit dump (.lgtn or .ndjson)")->required();
  dmp->add_option("--format", dump_format, "binary|ndjson; default follows the extension");

  // stats
  std::string stats_in, stats_out;
  double stats_momentum = kDefaultMomentum, stats_eps = kDefaultEps;
  std::size_t stats_batch = 256;
  bool stats_exact = false, stats_positive = false;
  BgOption stats_bg;
  auto* sts = app.add_subcommand("stats", "Accumulate per-class logit statistics");
  sts->add_option("--input", stats_in, "Training logit dump")->required();
  sts->add_option("--out", stats_out, "Statistics JSON")->required();
  sts->add_option("--momentum", stats_momentum, "EMA momentum")->capture_default_str();
  sts->add_option("--batch-size", stats_batch, "EMA batch size")->capture_default_str();
  sts->add_option("--eps", stats_eps, "Stored eps")->capture_default_str();
  auto* exact_flag = sts->add_flag("--exact", stats_exact, "Exact streaming statistics");
  sts->add_flag("--positive-only", stats_positive, "Class c uses only records labelled c")
      ->excludes(exact_flag);
  stats_bg.add(sts);

  // finalize
  std::string fin_stats, fin_out;
  FinalizeFlags fin_flags;
  auto* fin = app.add_subcommand("finalize", "Choose beta and write calibration parameters");
  fin->add_option("--stats", fin_stats, "Statistics JSON")->required();
  fin->add_option("--out", fin_out, "Calibration JSON")->required();
  fin_flags.add(fin);

  // apply
  std::string apply_params, apply_in, apply_out;
  BgOption apply_bg;
  auto* apl = app.add_subcommand("apply", "Normalize a logit dump with calibration parameters");
  apl->add_option("--calibration", apply_params, "Calibration JSON")->required();
  apl->add_option("--input", apply_in, "Logit dump")->required();
  apl->add_option("--out", apply_out, "Calibrated dump")->required();
  apply_bg.add(apl);

  // calibrate = finalize + apply
  std::string cal_stats, cal_in, cal_out, cal_params_out;
  FinalizeFlags cal_flags;
  BgOption cal_bg;
  auto* cal = app.add_subcommand("calibrate", "Finalize statistics and apply them in one step");
  cal->add_option("--stats", cal_stats, "Statistics JSON")->required();
  cal->add_option("--input", cal_in, "Logit dump")->required();
  cal->add_option("--out", cal_out, "Calibrated dump")->required();
  cal->add_option("--calibration-out", cal_params_out, "Also write the calibration JSON");
  cal_flags.add(cal);
  cal_bg.add(cal);

  // eval
  std::string eval_in, eval_dist, eval_train, eval_stats, eval_out, eval_format = "table";
  BgOption eval_bg;
  auto* evl = app.add_subcommand("eval", "Score a logit dump");
  evl->add_option("--input", eval_in, "Logit dump")->required();
  evl->add_option("--distribution", eval_dist, "Label distribution JSON (classification)");
  evl->add_option("--train", eval_train, "Training dump to take the label distribution from");
  evl->add_option("--stats", eval_stats, "Statistics JSON; adds the frequency correlations");
  evl->add_option("--format", eval_format, "table|csv|json")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();
  evl->add_option("--out", eval_out, "Output file; stdout by default");
  eval_bg.add(evl);

  // verify
  std::string verify_out;
  std::uint64_t verify_seed = 2022;
  auto* ver = app.add_subcommand("verify", "Run the calibration identity and inequality checks");
  ver->add_option("--out", verify_out, "JSON report; stdout by default");
  ver->add_option("--seed", verify_seed, "Trial seed")->capture_default_str();

  // sweep
  std::string sweep_train, sweep_holdout, sweep_out;
  std::vector<double> sweep_momenta{0.001, 0.01, 0.1};
  std::vector<std::string> sweep_modes{"fg-min", "fg-avg", "fg-max", "bg-mean", "none"};
  std::size_t sweep_batch = 256;
  double sweep_p = 1.0, sweep_eps = kDefaultEps;
  BgOption sweep_bg;
  auto* swp = app.add_subcommand("sweep", "Metric over a momentum x beta-mode grid");
  swp->add_option("--train", sweep_train, "Training logit dump")->required();
  swp->add_option("--holdout", sweep_holdout, "Holdout logit dump")->required();
  swp->add_option("--momenta", sweep_momenta, "EMA momenta")->delimiter(',')->capture_default_str();
  swp->add_option("--beta-modes", sweep_modes, "Beta modes")->delimiter(',')->capture_default_str();
  swp->add_option("--batch-size", sweep_batch, "EMA batch size")->capture_default_str();
  swp->add_option("--sigma-exponent", sweep_p, "Exponent p")->capture_default_str();
  swp->add_option("--eps", sweep_eps, "eps")->capture_default_str();
  swp->add_option("--out", sweep_out, "CSV; stdout by default");
  sweep_bg.add(swp);

  // run
  std::string run_config, run_task = "classification", run_out;
  auto* run = app.add_subcommand("run", "Run every stage from one config");
  run->add_option("--config", run_config, "Pipeline config JSON");
  run->add_option("--task", run_task, "classification|detection when no config is given")
      ->capture_default_str();
  run->add_option("--out", run_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto cfg = load_config(gen_config, gen_task);
      if (gen_seed) cfg.synth.seed = *gen_seed;
      fs::create_directories(gen_out);
      atomic_write(fs::path(gen_out) / "resolved_config.json", dump_json(config_to_json(cfg)));
      write_dataset(fs::path(gen_out) / "train", generate_training_split(cfg));
      write_dataset(fs::path(gen_out) / "holdout", generate_holdout_split(cfg));
    } else if (*trn) {
      const Dataset ds = read_dataset(train_data);
      auto cfg = load_config(train_config, ds.bg_index ? "detection" : "classification");
      const TrainResult r = train(ds, cfg.train);
      atomic_write(train_out, dump_json(model_to_json(r.model)));
      if (!train_log.empty()) atomic_write(train_log, train_log_csv(r));
      std::fprintf(stderr, "final loss %.6f after %zu steps\n",
                   r.epoch_loss.empty() ? r.initial_loss : r.epoch_loss.back(), r.steps);
    } else if (*dmp) {
      const Model m = model_from_json(json::parse(read_file(dump_model)));
      const Dataset ds = read_dataset(dump_data);
      std::optional<DumpFormat> fmt;
      if (!dump_format.empty()) fmt = parse_dump_format(dump_format);
      write_dump(dump_out, predict_logits(m, ds), fmt);
    } else if (*sts) {
      const LogitTable t = read_dump(stats_in, stats_bg.get());
      RunningStats s;
      if (stats_positive) {
        auto po = positive_only_stats(t, stats_eps);
        for (std::size_t c = 0; c < po.empty.size(); ++c)
          if (po.empty[c]) std::fprintf(stderr, "warning: class %zu has no records\n", c);
        s = po.stats;
      } else if (stats_exact) {
        s = compute_exact_parallel(t, 4096, stats_momentum, stats_eps);
      } else {
        s = ema_pass(t, stats_batch, stats_momentum, stats_eps);
      }
      atomic_write(stats_out, dump_json(stats_to_json(s)));
    } else if (*fin) {
      const RunningStats s = stats_from_json(json::parse(read_file(fin_stats)));
      atomic_write(fin_out, dump_json(params_to_json(s, fin_flags.apply(s))));
    } else if (*apl) {
      const CalibrationParams p = params_from_json(json::parse(read_file(apply_params)));
      write_dump(apply_out, apply_logn(read_dump(apply_in, apply_bg.get()), p));
    } else if (*cal) {
      const RunningStats s = stats_from_json(json::parse(read_file(cal_stats)));
      const CalibrationParams p = cal_flags.apply(s);
      if (!cal_params_out.empty()) atomic_write(cal_params_out, dump_json(params_to_json(s, p)));
      write_dump(cal_out, apply_logn(read_dump(cal_in, cal_bg.get()), p));
    } else if (*evl) {
      const LogitTable t = read_dump(eval_in, eval_bg.get());
      std::optional<LabelDistribution> dist;
      if (!eval_dist.empty()) {
        dist = label_distribution_from_json(json::parse(read_file(eval_dist)));
      } else if (!eval_train.empty()) {
        const LogitTable tr = read_dump(eval_train, eval_bg.get());
        dist = foreground_label_distribution(tr.labels(), tr.num_classes(), tr.bg_index());
      }
      EvalReport r;
      if (t.bg_index()) {
        const ApResult ap = evaluate_detection(t);
        r.per_class_ap = ap.per_class_ap;
        r.mean_ap = ap.mean_ap;
      } else {
        if (!dist) throw Error("classification eval needs --distribution or --train");
        r = evaluate_classification(t, *dist);
      }
      if (!eval_stats.empty()) {
        if (!dist) throw Error("--stats needs --distribution or --train");
        const auto corr =
            statistic_correlation(stats_from_json(json::parse(read_file(eval_stats))), *dist);
        r.correlation_mean = corr.mean;
        r.correlation_var = corr.var;
      }
      const std::string text = eval_format == "json" ? dump_json(eval_report_to_json(r))
                               : eval_format == "csv" ? eval_report_csv(r)
                                                      : eval_report_table(r);
      write_or_print(eval_out, text);
    } else if (*ver) {
      const auto results = run_verification_suite(verify_seed);
      write_or_print(verify_out, dump_json(verification_report(results)));
      for (const auto& r : results)
        if (!r.passed) return 1;
    } else if (*swp) {
      const LogitTable tr = read_dump(sweep_train, sweep_bg.get());
      const LogitTable ho = read_dump(sweep_holdout, sweep_bg.get());
      write_or_print(sweep_out, sweep_csv(sweep(tr, ho, sweep_momenta, parse_modes(sweep_modes),
                                                sweep_batch, sweep_p, sweep_eps)));
    } else if (*run) {
      const PipelineResult r = run_pipeline(load_config(run_config, run_task), run_out);
      std::cout << "baseline\n"
                << eval_report_table(r.baseline) << "logn (beta " << r.params.beta << ")\n"
                << eval_report_table(r.calibrated);
      if (r.logit_adjusted) std::cout << "logit adjustment\n" << eval_report_table(*r.logit_adjusted);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
