#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logn/logit_table.hpp"
#include "logn/stats.hpp"

namespace logn {

// How the background calibration scalar is chosen from the running means.
struct BetaMode {
  enum class Kind { fg_min, fg_avg, fg_max, bg_mean, constant, none };

  Kind kind = Kind::fg_min;
  double value = 0.0;  // only for Kind::constant

  static BetaMode fg_min() { return {Kind::fg_min, 0.0}; }
  static BetaMode fg_avg() { return {Kind::fg_avg, 0.0}; }
  static BetaMode fg_max() { return {Kind::fg_max, 0.0}; }
  static BetaMode bg_mean() { return {Kind::bg_mean, 0.0}; }
  static BetaMode constant(double v);
  static BetaMode none() { return {Kind::none, 0.0}; }

  // Accepts fg-min, fg-avg, fg-max, bg-mean, none and const:<v>.
  static BetaMode parse(const std::string& text);
  std::string to_string() const;

  friend bool operator==(const BetaMode&, const BetaMode&) = default;
};

struct CalibrationParams {
  std::vector<double> adj_mean;  // mean - beta on foreground, 0 on background
  std::vector<double> var;       // 1 on background
  double beta = 0.0;
  double eps = kDefaultEps;
  double sigma_exponent = 1.0;
  std::optional<int> bg_index;
  BetaMode mode = BetaMode::none();

  int num_classes() const { return static_cast<int>(adj_mean.size()); }
  // Per-slot divisor (var + eps)^(sigma_exponent / 2).
  std::vector<double> scale() const;
};

// Selects beta from the foreground means, shifts the foreground means by it
// and pins the background slot to mean 0 / variance 1.
CalibrationParams finalize(const RunningStats& stats, BetaMode mode,
                           double sigma_exponent = 1.0);

// Which parts of the normalization are active; used for ablations.
struct Components {
  bool mean = true;
  bool var = true;
  bool beta = true;
};

// finalize() with selected components switched off: a disabled mean leaves
// only the beta shift, a disabled variance uses unit variance, a disabled beta
// uses beta = 0.
CalibrationParams finalize_components(const RunningStats& stats, BetaMode mode,
                                      Components components,
                                      double sigma_exponent = 1.0);

// (x - adj_mean) / (var + eps)^(p/2), elementwise.
std::vector<double> logn_normalize(std::span<const double> logits,
                                   const CalibrationParams& params);

// x * (var + eps)^(p/2) + adj_mean; the exact inverse of logn_normalize.
std::vector<double> online_inverse(std::span<const double> logits,
                                   const CalibrationParams& params);

// x_c - tau * log(n_c / sum n). `logits` are foreground-only.
std::vector<double> logit_adjustment_baseline(std::span<const double> logits,
                                              const LabelDistribution& dist,
                                              double tau = 1.0);

// Max-subtracted softmax.
std::vector<double> softmax_scores(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);

// Batch kernels. The serial versions are the references for the OpenMP ones.
LogitTable apply_logn(const LogitView& records, const CalibrationParams& params);
LogitTable apply_logn_serial(const LogitView& records,
                             const CalibrationParams& params);

LogitTable softmax_rows(const LogitView& records);
LogitTable softmax_rows_serial(const LogitView& records);

}  // namespace logn
