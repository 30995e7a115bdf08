#include "logn/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "logn/errors.hpp"

namespace logn {
namespace {

void check_input(std::span<const double> logits, const CalibrationParams& p) {
  if (logits.size() != p.adj_mean.size()) {
    throw DimensionError("logit width " + std::to_string(logits.size()) +
                         " does not match calibration width " +
                         std::to_string(p.adj_mean.size()));
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("non-finite logit");
  }
}

void check_params(const CalibrationParams& p) {
  if (p.var.size() != p.adj_mean.size()) {
    throw DimensionError("calibration mean/var width mismatch");
  }
  if (!(p.eps > 0.0)) throw DomainError("eps must be positive");
  if (!(p.sigma_exponent > 0.0) || !std::isfinite(p.sigma_exponent)) {
    throw DomainError("sigma exponent must be a positive finite number");
  }
}

}  // namespace

BetaMode BetaMode::constant(double v) {
  if (!std::isfinite(v)) throw DomainError("constant beta must be finite");
  return {Kind::constant, v};
}

BetaMode BetaMode::parse(const std::string& text) {
  if (text == "fg-min") return fg_min();
  if (text == "fg-avg") return fg_avg();
  if (text == "fg-max") return fg_max();
  if (text == "bg-mean") return bg_mean();
  if (text == "none") return none();
  const std::string prefix = "const:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string number = text.substr(prefix.size());
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(number, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != number.size()) {
      throw DomainError("bad beta constant '" + number + "'");
    }
    return constant(v);
  }
  throw DomainError("unknown beta mode '" + text + "'");
}

std::string BetaMode::to_string() const {
  switch (kind) {
    case Kind::fg_min:
      return "fg-min";
    case Kind::fg_avg:
      return "fg-avg";
    case Kind::fg_max:
      return "fg-max";
    case Kind::bg_mean:
      return "bg-mean";
    case Kind::none:
      return "none";
    case Kind::constant: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "const:%.17g", value);
      return buf;
    }
  }
  return "?";
}

std::vector<double> CalibrationParams::scale() const {
  std::vector<double> s(var.size());
  for (std::size_t c = 0; c < var.size(); ++c) {
    s[c] = std::pow(var[c] + eps, 0.5 * sigma_exponent);
  }
  return s;
}

CalibrationParams finalize(const RunningStats& stats, BetaMode mode,
                           double sigma_exponent) {
  return finalize_components(stats, mode, Components{}, sigma_exponent);
}

CalibrationParams finalize_components(const RunningStats& stats, BetaMode mode,
                                      Components components,
                                      double sigma_exponent) {
  if (!stats.initialized) throw StateError("statistics are not initialized");
  if (stats.var.size() != stats.mean.size()) {
    throw DimensionError("statistics mean/var width mismatch");
  }
  const int width = stats.num_classes();
  if (stats.bg_index && (*stats.bg_index < 0 || *stats.bg_index >= width)) {
    throw DimensionError("bg_index outside the class range");
  }
  const auto fg = foreground_slots(width, stats.bg_index);
  if (fg.empty()) throw DimensionError("no foreground classes");

  double beta = 0.0;
  switch (mode.kind) {
    case BetaMode::Kind::fg_min:
    case BetaMode::Kind::fg_max:
    case BetaMode::Kind::fg_avg: {
      double lo = stats.mean[static_cast<std::size_t>(fg.front())];
      double hi = lo;
      double sum = 0.0;
      for (int c : fg) {
        const double m = stats.mean[static_cast<std::size_t>(c)];
        lo = std::min(lo, m);
        hi = std::max(hi, m);
        sum += m;
      }
      beta = mode.kind == BetaMode::Kind::fg_min   ? lo
             : mode.kind == BetaMode::Kind::fg_max ? hi
                                                   : sum / static_cast<double>(fg.size());
      break;
    }
    case BetaMode::Kind::bg_mean:
      if (!stats.bg_index) {
        throw StateError("beta mode bg-mean requires a background index");
      }
      beta = stats.mean[static_cast<std::size_t>(*stats.bg_index)];
      break;
    case BetaMode::Kind::constant:
      beta = mode.value;
      break;
    case BetaMode::Kind::none:
      beta = 0.0;
      break;
  }
  if (!components.beta) beta = 0.0;

  CalibrationParams p;
  p.beta = beta;
  p.eps = stats.eps;
  p.sigma_exponent = sigma_exponent;
  p.bg_index = stats.bg_index;
  p.mode = mode;
  p.adj_mean.resize(static_cast<std::size_t>(width));
  p.var.resize(static_cast<std::size_t>(width));
  for (std::size_t c = 0; c < p.adj_mean.size(); ++c) {
    p.adj_mean[c] = (components.mean ? stats.mean[c] : 0.0) - beta;
    p.var[c] = components.var ? stats.var[c] : 1.0;
  }
  if (stats.bg_index) {
    const auto bg = static_cast<std::size_t>(*stats.bg_index);
    p.adj_mean[bg] = 0.0;
    p.var[bg] = 1.0;
  }
  check_params(p);
  return p;
}

std::vector<double> logn_normalize(std::span<const double> logits,
                                   const CalibrationParams& params) {
  check_params(params);
  check_input(logits, params);
  const auto scale = params.scale();
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = (logits[c] - params.adj_mean[c]) / scale[c];
  }
  return out;
}

std::vector<double> online_inverse(std::span<const double> logits,
                                   const CalibrationParams& params) {
  check_params(params);
  check_input(logits, params);
  const auto scale = params.scale();
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = logits[c] * scale[c] + params.adj_mean[c];
  }
  return out;
}

std::vector<double> logit_adjustment_baseline(std::span<const double> logits,
                                              const LabelDistribution& dist,
                                              double tau) {
  if (logits.size() != dist.counts.size()) {
    throw DimensionError("logit width does not match the label distribution");
  }
  const double total = static_cast<double>(dist.total());
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (dist.counts[c] <= 0) {
      throw DomainError("class " + std::to_string(c) + " has zero count");
    }
    out[c] = logits[c] - tau * std::log(static_cast<double>(dist.counts[c]) / total);
  }
  return out;
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) throw DimensionError("empty logit vector");
  if (out.size() != logits.size()) throw DimensionError("output width mismatch");
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] - top);
    sum += out[c];
  }
  for (double& v : out) v /= sum;
}

std::vector<double> softmax_scores(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  softmax_into(logits, out);
  return out;
}

namespace {

LogitTable empty_like(const LogitView& records) {
  LogitTable out(records.num_classes(), records.bg_index());
  out.labels().assign(records.labels().begin(), records.labels().end());
  out.values().resize(records.values().size());
  return out;
}

}  // namespace

LogitTable apply_logn(const LogitView& records, const CalibrationParams& params) {
  check_params(params);
  if (records.num_classes() != params.num_classes()) {
    throw DimensionError("record width does not match calibration width");
  }
  validate_records(records);
  const auto scale = params.scale();
  LogitTable out = empty_like(records);
  const auto width = static_cast<std::size_t>(records.num_classes());
  const double* in = records.values().data();
  double* dst = out.values().data();
  const auto n = static_cast<std::ptrdiff_t>(records.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * width;
    for (std::size_t c = 0; c < width; ++c) {
      dst[base + c] = (in[base + c] - params.adj_mean[c]) / scale[c];
    }
  }
  return out;
}

LogitTable apply_logn_serial(const LogitView& records,
                             const CalibrationParams& params) {
  LogitTable out(records.num_classes(), records.bg_index());
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(records.label(i), logn_normalize(records.row(i), params));
  }
  return out;
}

LogitTable softmax_rows(const LogitView& records) {
  LogitTable out = empty_like(records);
  const auto width = static_cast<std::size_t>(records.num_classes());
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  std::span<double> dst(out.values());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    softmax_into(records.row(r), dst.subspan(r * width, width));
  }
  return out;
}

LogitTable softmax_rows_serial(const LogitView& records) {
  LogitTable out(records.num_classes(), records.bg_index());
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(records.label(i), softmax_scores(records.row(i)));
  }
  return out;
}

}  // namespace logn
