#pragma once

// Per-class logit statistics: the EMA accumulator used by the offline
// statistics pass, the exact streaming (Welford/Chan) accumulator that serves
// as its oracle, positive-only statistics, and label distributions.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "logn/logit_table.hpp"

namespace logn {

inline constexpr double kDefaultMomentum = 0.01;
inline constexpr double kDefaultEps = 1e-5;

struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;
  std::uint64_t count = 0;
  double momentum = kDefaultMomentum;
  double eps = kDefaultEps;
  std::optional<int> bg_index;
  bool initialized = false;

  // Uninitialized stats for `num_classes` slots.
  static RunningStats empty(int num_classes, double momentum = kDefaultMomentum,
                            double eps = kDefaultEps,
                            std::optional<int> bg_index = std::nullopt);

  int num_classes() const { return static_cast<int>(mean.size()); }
};

// Per-column mean and population variance of one batch.
struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> var;
  std::size_t count = 0;
};

BatchMoments batch_moments(const LogitView& batch);

// One EMA step over the full columns of `batch`. The first batch initializes
// the running statistics; later batches blend with weight `stats.momentum`.
// Throws DimensionError on width mismatch and NonFiniteError naming the record.
RunningStats update_ema(RunningStats stats, const LogitView& batch);

// Sequential EMA pass over `records` in consecutive batches of `batch_size`.
RunningStats ema_pass(const LogitView& records, std::size_t batch_size,
                      double momentum = kDefaultMomentum,
                      double eps = kDefaultEps);

// Streaming per-column mean/M2 accumulator. Shards can be combined with
// merge(), which uses the pairwise (Chan et al.) update.
class ExactAccumulator {
 public:
  explicit ExactAccumulator(int num_classes);

  void add(std::span<const double> row);
  void add(const LogitView& records);
  void merge(const ExactAccumulator& other);

  std::uint64_t count() const { return count_; }
  int num_classes() const { return static_cast<int>(mean_.size()); }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double> variance() const;  // population

  RunningStats to_stats(std::optional<int> bg_index,
                        double momentum = kDefaultMomentum,
                        double eps = kDefaultEps) const;

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

// Exact per-class mean and population variance over every record (serial
// reference). Throws DimensionError on an empty stream.
RunningStats compute_exact(const LogitView& records,
                           double momentum = kDefaultMomentum,
                           double eps = kDefaultEps);

// Same result as compute_exact, accumulated on fixed-size shards in parallel
// and merged in shard order; the result does not depend on the thread count.
RunningStats compute_exact_parallel(const LogitView& records,
                                    std::size_t shard_size = 4096,
                                    double momentum = kDefaultMomentum,
                                    double eps = kDefaultEps);

struct PositiveOnlyStats {
  RunningStats stats;
  // empty[c] is true when no record carries label c; its mean/var are 0.
  std::vector<bool> empty;
};

// For class c, accumulates only entry c of records labelled c.
PositiveOnlyStats positive_only_stats(const LogitView& records,
                                      double eps = kDefaultEps);

enum class Group { rare, common, frequent };

const char* group_name(Group g);

struct GroupThresholds {
  std::int64_t low = 10;
  std::int64_t high = 100;
};

// Foreground class counts; ordinal k is the k-th foreground slot.
struct LabelDistribution {
  std::vector<std::int64_t> counts;
  std::vector<Group> group_of;
  GroupThresholds thresholds;

  std::int64_t total() const;
  int num_classes() const { return static_cast<int>(counts.size()); }
};

Group group_for_count(std::int64_t count, GroupThresholds thresholds);

LabelDistribution label_distribution_from_counts(
    std::vector<std::int64_t> counts, GroupThresholds thresholds = {});

// `labels` are foreground ordinals in [0, num_foreground).
LabelDistribution build_label_distribution(std::span<const std::int32_t> labels,
                                           int num_foreground,
                                           GroupThresholds thresholds = {});

// Tallies slot labels of a dump, skipping background, mapped to ordinals.
LabelDistribution foreground_label_distribution(
    std::span<const std::int32_t> slot_labels, int num_classes,
    std::optional<int> bg_index, GroupThresholds thresholds = {});

}  // namespace logn
