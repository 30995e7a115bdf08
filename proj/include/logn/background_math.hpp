#pragma once

// Score-level algebra of background calibration: shifting the background
// logit by -beta is the same as shifting every foreground logit by +beta, and
// the calibrated log-score splits into a background term and a
// foreground-conditional term.

#include <span>
#include <vector>

namespace logn {

enum class BgShiftForm { background_shift, foreground_shift };

// Softmax after applying beta in the chosen form. Both forms return the same
// foreground probabilities.
std::vector<double> score_with_bg_calibration(std::span<const double> logits,
                                              double beta, int bg_index,
                                              BgShiftForm form);

struct ScoreDecomposition {
  double s_b = 0.0;  // background probability
  double s_f = 0.0;  // foreground-conditional probability
  double odds = 0.0;  // B = s_b / (1 - s_b)
  double log_score = 0.0;
};

// B(s_b) = s_b / (1 - s_b). Requires s_b in (0, 1).
double background_odds(double s_b);

// y(s_b, s_f, beta) = log(1 / (1 + e^-beta B(s_b))) + log(s_f).
double calibrated_log_score(double s_b, double s_f, double beta);

ScoreDecomposition decompose_log_score(double s_b, double s_f, double beta);

// Difference quotient of y in s_b over the step delta_sb, in the closed form
//   -1/d * log(1 + e^-beta * (d / ((1-s_b)(1-s_b-d))) / (1 + e^-beta B(s_b))).
// s_f cancels. Throws DomainError naming the violated bound.
double changing_rate_k(double delta_sb, double s_b, double s_f, double beta);

}  // namespace logn
