#include "logn/stats.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "logn/errors.hpp"

namespace logn {

RunningStats RunningStats::empty(int num_classes, double momentum, double eps,
                                 std::optional<int> bg_index) {
  if (num_classes <= 0) throw DimensionError("num_classes must be positive");
  if (!(momentum > 0.0 && momentum <= 1.0)) {
    throw DomainError("momentum must lie in (0, 1]");
  }
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  RunningStats s;
  s.mean.assign(static_cast<std::size_t>(num_classes), 0.0);
  s.var.assign(static_cast<std::size_t>(num_classes), 0.0);
  s.momentum = momentum;
  s.eps = eps;
  s.bg_index = bg_index;
  return s;
}

BatchMoments batch_moments(const LogitView& batch) {
  if (batch.empty()) throw DimensionError("empty batch");
  ExactAccumulator acc(batch.num_classes());
  acc.add(batch);
  return {acc.mean(), acc.variance(), batch.size()};
}

RunningStats update_ema(RunningStats stats, const LogitView& batch) {
  if (batch.empty()) throw DimensionError("empty batch");
  if (batch.num_classes() != stats.num_classes()) {
    throw DimensionError("batch width " + std::to_string(batch.num_classes()) +
                         " does not match statistics width " +
                         std::to_string(stats.num_classes()));
  }
  validate_records(batch);
  const BatchMoments m = batch_moments(batch);
  if (!stats.initialized) {
    stats.mean = m.mean;
    stats.var = m.var;
    stats.initialized = true;
  } else {
    const double a = stats.momentum;
    for (std::size_t c = 0; c < stats.mean.size(); ++c) {
      stats.mean[c] = (1.0 - a) * stats.mean[c] + a * m.mean[c];
      stats.var[c] = (1.0 - a) * stats.var[c] + a * m.var[c];
    }
  }
  stats.count += m.count;
  return stats;
}

RunningStats ema_pass(const LogitView& records, std::size_t batch_size,
                      double momentum, double eps) {
  if (records.empty()) throw DimensionError("empty stream");
  if (batch_size == 0) throw DomainError("batch_size must be positive");
  auto stats = RunningStats::empty(records.num_classes(), momentum, eps,
                                   records.bg_index());
  for (std::size_t begin = 0; begin < records.size(); begin += batch_size) {
    const std::size_t end = std::min(records.size(), begin + batch_size);
    try {
      stats = update_ema(std::move(stats), records.slice(begin, end));
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(begin + e.record_index(),
                           "record " + std::to_string(begin + e.record_index()) +
                               " has a non-finite logit");
    }
  }
  return stats;
}

ExactAccumulator::ExactAccumulator(int num_classes)
    : mean_(static_cast<std::size_t>(num_classes), 0.0),
      m2_(static_cast<std::size_t>(num_classes), 0.0) {
  if (num_classes <= 0) throw DimensionError("num_classes must be positive");
}

void ExactAccumulator::add(std::span<const double> row) {
  if (row.size() != mean_.size()) throw DimensionError("row width mismatch");
  ++count_;
  const double inv_n = 1.0 / static_cast<double>(count_);
  for (std::size_t c = 0; c < mean_.size(); ++c) {
    const double delta = row[c] - mean_[c];
    mean_[c] += delta * inv_n;
    m2_[c] += delta * (row[c] - mean_[c]);
  }
}

void ExactAccumulator::add(const LogitView& records) {
  if (records.num_classes() != num_classes()) {
    throw DimensionError("record width mismatch");
  }
  for (std::size_t i = 0; i < records.size(); ++i) add(records.row(i));
}

void ExactAccumulator::merge(const ExactAccumulator& other) {
  if (other.mean_.size() != mean_.size()) {
    throw DimensionError("cannot merge accumulators of different width");
  }
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t c = 0; c < mean_.size(); ++c) {
    const double delta = other.mean_[c] - mean_[c];
    mean_[c] += delta * (nb / n);
    m2_[c] += other.m2_[c] + delta * delta * (na * nb / n);
  }
  count_ += other.count_;
}

std::vector<double> ExactAccumulator::variance() const {
  std::vector<double> v(m2_.size(), 0.0);
  if (count_ == 0) return v;
  for (std::size_t c = 0; c < v.size(); ++c) {
    v[c] = std::max(0.0, m2_[c] / static_cast<double>(count_));
  }
  return v;
}

RunningStats ExactAccumulator::to_stats(std::optional<int> bg_index,
                                        double momentum, double eps) const {
  if (count_ == 0) throw StateError("no samples accumulated");
  auto s = RunningStats::empty(num_classes(), momentum, eps, bg_index);
  s.mean = mean_;
  s.var = variance();
  s.count = count_;
  s.initialized = true;
  return s;
}

RunningStats compute_exact(const LogitView& records, double momentum,
                           double eps) {
  if (records.empty()) throw DimensionError("empty stream");
  validate_records(records);
  ExactAccumulator acc(records.num_classes());
  acc.add(records);
  return acc.to_stats(records.bg_index(), momentum, eps);
}

RunningStats compute_exact_parallel(const LogitView& records,
                                    std::size_t shard_size, double momentum,
                                    double eps) {
  if (records.empty()) throw DimensionError("empty stream");
  if (shard_size == 0) throw DomainError("shard_size must be positive");
  validate_records(records);
  const std::size_t num_shards = (records.size() + shard_size - 1) / shard_size;
  std::vector<ExactAccumulator> shards(num_shards,
                                       ExactAccumulator(records.num_classes()));
  const auto n = static_cast<std::ptrdiff_t>(num_shards);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const auto begin = static_cast<std::size_t>(s) * shard_size;
    const auto end = std::min(records.size(), begin + shard_size);
    shards[static_cast<std::size_t>(s)].add(records.slice(begin, end));
  }
  ExactAccumulator total(records.num_classes());
  for (const auto& shard : shards) total.merge(shard);
  return total.to_stats(records.bg_index(), momentum, eps);
}

PositiveOnlyStats positive_only_stats(const LogitView& records, double eps) {
  if (records.empty()) throw DimensionError("empty stream");
  validate_records(records);
  const auto width = static_cast<std::size_t>(records.num_classes());
  std::vector<std::uint64_t> n(width, 0);
  std::vector<double> mean(width, 0.0);
  std::vector<double> m2(width, 0.0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto c = static_cast<std::size_t>(records.label(i));
    const double x = records.row(i)[c];
    ++n[c];
    const double delta = x - mean[c];
    mean[c] += delta / static_cast<double>(n[c]);
    m2[c] += delta * (x - mean[c]);
  }
  PositiveOnlyStats out;
  out.stats = RunningStats::empty(records.num_classes(), kDefaultMomentum, eps,
                                  records.bg_index());
  out.empty.assign(width, false);
  for (std::size_t c = 0; c < width; ++c) {
    if (n[c] == 0) {
      out.empty[c] = true;
      continue;
    }
    out.stats.mean[c] = mean[c];
    out.stats.var[c] = std::max(0.0, m2[c] / static_cast<double>(n[c]));
  }
  out.stats.count = records.size();
  out.stats.initialized = true;
  return out;
}

const char* group_name(Group g) {
  switch (g) {
    case Group::rare:
      return "rare";
    case Group::common:
      return "common";
    case Group::frequent:
      return "frequent";
  }
  return "?";
}

std::int64_t LabelDistribution::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

// Boundary counts fall into the lower group: 1-10 rare, 11-100 common.
Group group_for_count(std::int64_t count, GroupThresholds thresholds) {
  if (count <= thresholds.low) return Group::rare;
  if (count <= thresholds.high) return Group::common;
  return Group::frequent;
}

LabelDistribution label_distribution_from_counts(
    std::vector<std::int64_t> counts, GroupThresholds thresholds) {
  if (thresholds.low > thresholds.high) {
    throw DomainError("low threshold exceeds high threshold");
  }
  LabelDistribution dist;
  dist.thresholds = thresholds;
  dist.group_of.reserve(counts.size());
  for (auto n : counts) {
    if (n < 0) throw DomainError("negative class count");
    dist.group_of.push_back(group_for_count(n, thresholds));
  }
  dist.counts = std::move(counts);
  return dist;
}

LabelDistribution build_label_distribution(std::span<const std::int32_t> labels,
                                           int num_foreground,
                                           GroupThresholds thresholds) {
  if (num_foreground <= 0) throw DimensionError("no foreground classes");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_foreground), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto label = labels[i];
    if (label < 0 || label >= num_foreground) {
      throw DimensionError("label " + std::to_string(label) + " at position " +
                           std::to_string(i) + " is not a foreground index");
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  return label_distribution_from_counts(std::move(counts), thresholds);
}

LabelDistribution foreground_label_distribution(
    std::span<const std::int32_t> slot_labels, int num_classes,
    std::optional<int> bg_index, GroupThresholds thresholds) {
  const auto slots = foreground_slots(num_classes, bg_index);
  std::vector<std::int32_t> ordinal_of(static_cast<std::size_t>(num_classes), -1);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    ordinal_of[static_cast<std::size_t>(slots[k])] = static_cast<std::int32_t>(k);
  }
  std::vector<std::int32_t> ordinals;
  ordinals.reserve(slot_labels.size());
  for (std::size_t i = 0; i < slot_labels.size(); ++i) {
    const auto label = slot_labels[i];
    if (label < 0 || label >= num_classes) {
      throw DimensionError("label " + std::to_string(label) + " at position " +
                           std::to_string(i) + " out of range");
    }
    if (bg_index && label == *bg_index) continue;
    ordinals.push_back(ordinal_of[static_cast<std::size_t>(label)]);
  }
  return build_label_distribution(ordinals, static_cast<int>(slots.size()),
                                  thresholds);
}

}  // namespace logn
