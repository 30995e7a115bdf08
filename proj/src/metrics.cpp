#include "logn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "logn/errors.hpp"

namespace logn {

int argmax(std::span<const double> values) {
  if (values.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t c = 1; c < values.size(); ++c) {
    if (values[c] > values[best]) best = c;
  }
  return static_cast<int>(best);
}

EvalReport classify_and_score(const LogitView& logits,
                              const LabelDistribution& dist) {
  if (logits.empty()) throw DimensionError("no predictions to score");
  const int num_classes = dist.num_classes();
  if (logits.num_classes() != num_classes) {
    throw DimensionError("logit width " + std::to_string(logits.num_classes()) +
                         " does not match " + std::to_string(num_classes) +
                         " classes in the label distribution");
  }
  const auto width = static_cast<std::size_t>(num_classes);
  std::vector<std::int64_t> seen(width, 0), hit(width, 0);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto label = logits.label(i);
    if (label < 0 || label >= num_classes) {
      throw DimensionError("label " + std::to_string(label) + " at row " +
                           std::to_string(i) + " out of range");
    }
    const auto c = static_cast<std::size_t>(label);
    ++seen[c];
    if (argmax(logits.row(i)) == label) {
      ++hit[c];
      ++correct;
    }
  }

  EvalReport report;
  report.overall_top1 = static_cast<double>(correct) / static_cast<double>(logits.size());
  report.per_class_recall.assign(width, std::numeric_limits<double>::quiet_NaN());
  std::array<double, 3> group_sum{};
  std::array<int, 3> group_n{};
  double recall_sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < width; ++c) {
    if (seen[c] == 0) continue;
    const double r = static_cast<double>(hit[c]) / static_cast<double>(seen[c]);
    report.per_class_recall[c] = r;
    recall_sum += r;
    ++present;
    const auto g = static_cast<std::size_t>(dist.group_of[c]);
    group_sum[g] += r;
    ++group_n[g];
  }
  report.balanced_accuracy = recall_sum / present;
  for (std::size_t g = 0; g < 3; ++g) {
    if (group_n[g] > 0) report.per_group[g] = group_sum[g] / group_n[g];
  }
  return report;
}

double average_precision(std::span<const double> scores,
                         std::span<const std::int32_t> labels,
                         std::int32_t positive) {
  if (scores.size() != labels.size()) throw DimensionError("score/label size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto positives = std::count(labels.begin(), labels.end(), positive);
  if (positives == 0) throw DomainError("average precision needs a positive");

  std::vector<double> precision(order.size()), recall(order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == positive) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(positives);
  }
  // Interpolated precision: best precision at any equal-or-higher recall.
  for (std::size_t k = order.size() - 1; k > 0; --k) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

ApResult proposal_ranking_ap(const LogitView& scores, std::optional<int> bg_index) {
  if (scores.empty()) throw DimensionError("no proposals");
  validate_records(scores);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto row = scores.row(i);
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DomainError("row " + std::to_string(i) +
                        " is not a probability vector (sum " + std::to_string(sum) + ")");
    }
  }
  const auto slots = foreground_slots(scores.num_classes(), bg_index);
  const auto counts = [&] {
    std::vector<std::int64_t> c(static_cast<std::size_t>(scores.num_classes()), 0);
    for (auto l : scores.labels()) ++c[static_cast<std::size_t>(l)];
    return c;
  }();

  ApResult result;
  result.per_class_ap.assign(slots.size(), std::numeric_limits<double>::quiet_NaN());
  const auto num_slots = static_cast<std::ptrdiff_t>(slots.size());
#pragma omp parallel
  {
    std::vector<double> column(scores.size());
#pragma omp for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < num_slots; ++k) {
      const auto slot = slots[static_cast<std::size_t>(k)];
      if (counts[static_cast<std::size_t>(slot)] == 0) continue;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        column[i] = scores.row(i)[static_cast<std::size_t>(slot)];
      }
      result.per_class_ap[static_cast<std::size_t>(k)] =
          average_precision(column, scores.labels(), slot);
    }
  }
  // Summed in class order so the mean does not depend on scheduling.
  double sum = 0.0;
  int counted = 0;
  for (double ap : result.per_class_ap) {
    if (std::isnan(ap)) continue;
    sum += ap;
    ++counted;
  }
  if (counted == 0) throw DomainError("no foreground class has a positive proposal");
  result.mean_ap = sum / counted;
  return result;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman inputs differ in length");
  if (a.size() < 2) throw DomainError("spearman needs at least two points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

StatCorrelation statistic_correlation(const RunningStats& stats,
                                      const LabelDistribution& dist) {
  if (!stats.initialized) throw StateError("statistics are not initialized");
  const auto slots = foreground_slots(stats.num_classes(), stats.bg_index);
  if (slots.size() != dist.counts.size()) {
    throw DimensionError("statistics and label distribution disagree on the "
                         "number of foreground classes");
  }
  if (slots.size() < 3) throw DomainError("correlation needs at least 3 classes");
  std::vector<double> mean, var, log_count;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto s = static_cast<std::size_t>(slots[k]);
    mean.push_back(stats.mean[s]);
    var.push_back(stats.var[s]);
    if (dist.counts[k] <= 0) throw DomainError("class with zero count");
    log_count.push_back(std::log(static_cast<double>(dist.counts[k])));
  }
  return {spearman(mean, log_count), spearman(var, log_count)};
}

}  // namespace logn
