#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "logn/logit_table.hpp"
#include "logn/stats.hpp"

namespace logn {

struct EvalReport {
  double overall_top1 = 0.0;
  // Indexed by Group; empty when the group has no evaluated class.
  std::array<std::optional<double>, 3> per_group{};
  double balanced_accuracy = 0.0;
  std::vector<double> per_class_recall;  // NaN for classes absent from labels

  std::vector<double> per_class_ap;  // NaN for classes without positives
  std::optional<double> mean_ap;

  // Empty when the ranks are degenerate (constant input).
  std::optional<double> correlation_mean;
  std::optional<double> correlation_var;

  std::optional<double> group_accuracy(Group g) const {
    return per_group[static_cast<std::size_t>(g)];
  }
};

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

// Top-1 accuracy fields. Rows of `logits` are foreground-only over
// dist.num_classes() classes and labels are class indices. Group accuracy is
// the mean recall of the group's classes that occur in `logits`.
EvalReport classify_and_score(const LogitView& logits,
                              const LabelDistribution& dist);

struct ApResult {
  std::vector<double> per_class_ap;  // per foreground ordinal, NaN if no positives
  double mean_ap = 0.0;              // over classes with at least one positive
};

// All-point interpolated AP of ranking items by `scores`, where an item is a
// true positive iff its label equals `positive`. Ties keep input order.
// Requires at least one positive.
double average_precision(std::span<const double> scores,
                         std::span<const std::int32_t> labels,
                         std::int32_t positive);

// Per-foreground-class AP of ranking every proposal by that class's score.
// `scores` rows must be probability vectors (sum 1 within 1e-6).
ApResult proposal_ranking_ap(const LogitView& scores, std::optional<int> bg_index);

// Spearman rank correlation with average ranks for ties. Empty when either
// input is constant.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct StatCorrelation {
  std::optional<double> mean;
  std::optional<double> var;
};

// Rank correlation of the per-class foreground means (and variances) with log
// class counts. Requires at least 3 foreground classes.
StatCorrelation statistic_correlation(const RunningStats& stats,
                                      const LabelDistribution& dist);

}  // namespace logn
