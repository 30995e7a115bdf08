#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "logn/errors.hpp"
#include "logn/pipeline.hpp"
#include "logn/verify.hpp"

using namespace logn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("logn_pipe_" + std::to_string(rd()));
  }
  ~TempDir() { fs::remove_all(path); }
};

PipelineConfig small_classification() {
  auto c = reference_classification_config(3);
  c.synth.num_classes = 8;
  c.synth.max_count = 120;
  c.holdout_per_class = 10;
  c.train.epochs = 4;
  return c;
}

PipelineConfig small_detection() {
  auto c = reference_detection_config(3);
  c.synth.num_classes = 6;
  c.synth.max_count = 80;
  c.holdout_per_class = 10;
  c.holdout_bg_multiplier = 5.0;
  c.train.epochs = 4;
  c.train.hidden_units = 8;
  return c;
}

}  // namespace

TEST_CASE("config echo round trips") {
  for (auto c : {reference_classification_config(), reference_detection_config(), small_detection()}) {
    const json j = config_to_json(c);
    CHECK(config_to_json(config_from_json(j)) == j);
  }
  // missing keys come from the task's reference config
  auto partial = config_from_json(json{{"task", "detection"}, {"beta_mode", "fg-avg"}});
  CHECK(partial.beta_mode == BetaMode::fg_avg());
  CHECK(partial.train.hidden_units == reference_detection_config().train.hidden_units);
  CHECK_THROWS_AS(config_from_json(json{{"task", "segmentation"}}), DomainError);
  CHECK_THROWS_AS(config_from_json(json{{"beta_mode", 3}}), FormatError);
}

TEST_CASE("pipeline writes every artifact and reruns byte-identically") {
  TempDir a, b;
  for (auto cfg : {small_classification(), small_detection()}) {
    run_pipeline(cfg, a.path);
    run_pipeline(cfg, b.path);
    for (const char* name : {"resolved_config.json", "train.lgtn", "train.json", "holdout.lgtn",
                             "model.json", "train_log.csv", "train_logits.lgtn",
                             "holdout_logits.lgtn", "stats.json", "label_distribution.json",
                             "calibration.json", "holdout_calibrated.lgtn", "eval_report.json",
                             "eval_logn.csv"}) {
      CAPTURE(name);
      REQUIRE(fs::exists(a.path / name));
      CHECK(read_file(a.path / name) == read_file(b.path / name));
    }
    const json echo = json::parse(read_file(a.path / "resolved_config.json"));
    CHECK(config_to_json(config_from_json(echo)) == config_to_json(cfg));
  }
}

TEST_CASE("text dumps are supported end to end") {
  TempDir dir;
  auto cfg = small_detection();
  cfg.dump_format = DumpFormat::ndjson;
  auto r = run_pipeline(cfg, dir.path);
  CHECK(fs::exists(dir.path / "train_logits.ndjson"));
  CHECK(r.calibrated.mean_ap.has_value());
  CHECK(read_dump(dir.path / "holdout_calibrated.ndjson", 0).bg_index() == 0);
}

TEST_CASE("stage failures carry the stage name") {
  TempDir dir;
  auto cfg = small_classification();
  cfg.synth.max_count = 2;
  CHECK_THROWS_WITH_AS(run_pipeline(cfg, dir.path), doctest::Contains("stage 'gen'"), Error);
  cfg = small_classification();
  cfg.train.learning_rate = -1.0;
  CHECK_THROWS_WITH_AS(run_pipeline(cfg, dir.path), doctest::Contains("stage 'train'"), Error);
  cfg = small_classification();
  cfg.beta_mode = BetaMode::bg_mean();
  CHECK_THROWS_WITH_AS(run_pipeline(cfg, dir.path), doctest::Contains("stage 'finalize'"), Error);
}

TEST_CASE("identity calibration leaves logits unchanged up to eps scaling") {
  RunningStats s = RunningStats::empty(4, kDefaultMomentum, 1e-5, 0);
  s.mean.assign(4, 0.0);
  s.var.assign(4, 1.0);
  s.count = 1;
  s.initialized = true;
  auto p = finalize(s, BetaMode::none(), 1.0);
  LogitTable t(4, 0);
  t.push_back(2, std::vector<double>{1.0, -2.0, 3.5, 0.25});
  auto out = apply_logn(t, p);
  for (int c = 0; c < 4; ++c)
    CHECK(out.row(0)[c] == doctest::Approx(t.row(0)[c] / std::sqrt(1.0 + 1e-5)).epsilon(1e-15));
}

TEST_CASE("sweep covers the grid") {
  auto b = prepare_benchmark(small_detection());
  auto rows = sweep(b.train_logits, b.holdout_logits, {0.01, 0.1},
                    {BetaMode::fg_min(), BetaMode::bg_mean(), BetaMode::constant(-1.0)}, 64, 1.0,
                    kDefaultEps);
  CHECK(rows.size() == 6);
  CHECK(rows[2].beta == -1.0);
  CHECK(rows[3].momentum == 0.1);
  const auto csv = sweep_csv(rows);
  CHECK(csv.rfind("momentum,beta_mode,beta,metric\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("reference classification: calibration lifts the rare group") {
  auto b = prepare_benchmark(reference_classification_config());
  auto base = evaluate_classification(b.holdout_logits, b.dist);
  auto logn = evaluate_classification(apply_logn(b.holdout_logits, finalize(b.stats, BetaMode::none())),
                                      b.dist);
  CHECK(*logn.group_accuracy(Group::rare) > *base.group_accuracy(Group::rare));
}

TEST_CASE("reference detection: background dominates and bg-mean collapses AP") {
  auto b = prepare_benchmark(reference_detection_config());
  auto scores = softmax_rows(b.holdout_logits);
  std::vector<double> mass(scores.num_classes(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (int c = 0; c < scores.num_classes(); ++c) mass[c] += scores.row(i)[c];
  for (int c = 1; c < scores.num_classes(); ++c) CHECK(mass[0] > mass[c]);

  auto ap = [&](BetaMode m) {
    return evaluate_detection(apply_logn(b.holdout_logits, finalize(b.stats, m))).mean_ap;
  };
  CHECK(ap(BetaMode::bg_mean()) < ap(BetaMode::fg_min()));
}

TEST_CASE("verification suite passes") {
  auto results = run_verification_suite();
  CHECK(results.size() == 6);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CHECK(r.passed);
    CHECK(r.max_violation <= r.tolerance);
  }
  auto j = verification_report(results);
  CHECK(j["properties"].size() == results.size());
  CHECK(j["properties"][0].contains("max_violation"));
  CHECK(j["properties"][0].contains("trials"));
}

TEST_CASE("partial nested sections keep the task's reference values") {
  auto c = config_from_json(json{{"task", "detection"}, {"synth", {{"num_classes", 6}}},
                                 {"train", {{"epochs", 2}}}});
  const auto ref = reference_detection_config();
  CHECK(c.synth.num_classes == 6);
  CHECK(c.synth.bg_multiplier == ref.synth.bg_multiplier);
  CHECK(c.train.epochs == 2);
  CHECK(c.train.hidden_units == ref.train.hidden_units);
  CHECK(c.train.weight_decay == ref.train.weight_decay);
}
