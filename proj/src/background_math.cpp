#include "logn/background_math.hpp"

#include <cmath>
#include <string>

#include "logn/calibrate.hpp"
#include "logn/errors.hpp"

namespace logn {
namespace {

void require_open_unit(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw DomainError(std::string(name) + " = " + std::to_string(v) +
                      " must lie in the open interval (0, 1)");
  }
}

}  // namespace

std::vector<double> score_with_bg_calibration(std::span<const double> logits,
                                              double beta, int bg_index,
                                              BgShiftForm form) {
  if (bg_index < 0 || static_cast<std::size_t>(bg_index) >= logits.size()) {
    throw DimensionError("bg_index " + std::to_string(bg_index) +
                         " outside the logit vector");
  }
  if (!std::isfinite(beta)) throw DomainError("beta must be finite");
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("non-finite logit");
  }
  std::vector<double> shifted(logits.begin(), logits.end());
  const auto bg = static_cast<std::size_t>(bg_index);
  if (form == BgShiftForm::background_shift) {
    shifted[bg] -= beta;
  } else {
    for (std::size_t c = 0; c < shifted.size(); ++c) {
      if (c != bg) shifted[c] += beta;
    }
  }
  return softmax_scores(shifted);
}

double background_odds(double s_b) {
  require_open_unit(s_b, "s_b");
  return s_b / (1.0 - s_b);
}

double calibrated_log_score(double s_b, double s_f, double beta) {
  require_open_unit(s_b, "s_b");
  require_open_unit(s_f, "s_f");
  return -std::log1p(std::exp(-beta) * background_odds(s_b)) + std::log(s_f);
}

ScoreDecomposition decompose_log_score(double s_b, double s_f, double beta) {
  ScoreDecomposition d;
  d.s_b = s_b;
  d.s_f = s_f;
  d.odds = background_odds(s_b);
  d.log_score = calibrated_log_score(s_b, s_f, beta);
  return d;
}

double changing_rate_k(double delta_sb, double s_b, double s_f, double beta) {
  require_open_unit(s_b, "s_b");
  require_open_unit(s_f, "s_f");
  if (delta_sb == 0.0 || !std::isfinite(delta_sb)) {
    throw DomainError("delta_sb must be a nonzero finite step");
  }
  const double moved = s_b + delta_sb;
  if (!(moved > 0.0)) {
    throw DomainError("s_b + delta_sb = " + std::to_string(moved) +
                      " violates s_b + delta_sb > 0");
  }
  if (!(1.0 - s_b - delta_sb > 0.0)) {
    throw DomainError("1 - s_b - delta_sb = " + std::to_string(1.0 - moved) +
                      " violates 1 - s_b - delta_sb > 0");
  }
  const double w = std::exp(-beta);
  const double odds_step = delta_sb / ((1.0 - s_b) * (1.0 - s_b - delta_sb));
  return -std::log1p(w * odds_step / (1.0 + w * background_odds(s_b))) /
         delta_sb;
}

}  // namespace logn
