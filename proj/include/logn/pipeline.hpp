#pragma once

// End-to-end benchmark pipeline: generate -> train -> dump logits ->
// statistics -> finalize -> apply -> evaluate, plus the in-memory pieces the
// sweeps and benchmark checks reuse.

#include <filesystem>
#include <string>
#include <vector>

#include "logn/calibrate.hpp"
#include "logn/io.hpp"
#include "logn/metrics.hpp"
#include "logn/stats.hpp"
#include "logn/synth.hpp"
#include "logn/trainer.hpp"

namespace logn {

enum class Task { classification, detection };

struct PipelineConfig {
  Task task = Task::classification;
  SynthSpec synth;
  int holdout_per_class = 20;
  // Background rows per foreground row in the holdout split (detection). The
  // training split's ratio models the proposal sampler; the holdout sees every
  // proposal, so it is usually much larger.
  double holdout_bg_multiplier = 20.0;
  int bg_index = 0;                   // detection only
  double oversample_threshold = 0.0;  // 0 disables repeat-factor oversampling
  TrainConfig train;
  std::size_t stats_batch_size = 256;
  double momentum = kDefaultMomentum;
  bool exact_stats = false;
  BetaMode beta_mode = BetaMode::none();
  double sigma_exponent = 1.0;
  double eps = kDefaultEps;
  double tau = 1.0;  // logit-adjustment temperature
  DumpFormat dump_format = DumpFormat::binary;
};

// Every field is written, so the echo reproduces the run exactly.
json config_to_json(const PipelineConfig& config);
// Missing keys take the reference configuration's values for the task.
PipelineConfig config_from_json(const json& j);

// Reference configurations used by the benchmark checks.
PipelineConfig reference_classification_config(std::uint64_t seed = 7);
PipelineConfig reference_detection_config(std::uint64_t seed = 11);

// In-memory results of generation, training and the statistics pass.
struct Benchmark {
  PipelineConfig config;
  Dataset train;
  Dataset holdout;
  TrainResult trained;
  LogitTable train_logits;
  LogitTable holdout_logits;
  RunningStats stats;
  LabelDistribution dist;  // foreground training distribution
};

Dataset generate_training_split(const PipelineConfig& config);
Dataset generate_holdout_split(const PipelineConfig& config);

// Statistics over a training dump per the config (EMA or exact).
RunningStats accumulate_stats(const LogitView& train_logits,
                              const PipelineConfig& config);

Benchmark prepare_benchmark(const PipelineConfig& config);

// Balanced accuracy and groups on `logits` (foreground-only classification).
EvalReport evaluate_classification(const LogitView& logits,
                                   const LabelDistribution& dist);
// Mean proposal-ranking AP after softmax of `logits`.
ApResult evaluate_detection(const LogitView& logits);

LogitTable apply_logit_adjustment(const LogitView& logits,
                                  const LabelDistribution& dist, double tau);

struct PipelineResult {
  EvalReport baseline;
  EvalReport calibrated;
  std::optional<EvalReport> logit_adjusted;  // classification only
  CalibrationParams params;
};

// Runs the whole pipeline, writing every artifact under `out_dir`. Stage
// failures are rethrown as Error prefixed with the stage name.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::filesystem::path& out_dir);

struct SweepRow {
  double momentum = 0.0;
  std::string beta_mode;
  double beta = 0.0;
  double metric = 0.0;  // mean AP (detection) or balanced accuracy
};

// Grid over momentum values and beta modes on fixed train/holdout dumps.
std::vector<SweepRow> sweep(const LogitView& train_logits,
                            const LogitView& holdout_logits,
                            const std::vector<double>& momenta,
                            const std::vector<BetaMode>& modes,
                            std::size_t batch_size, double sigma_exponent,
                            double eps);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace logn
