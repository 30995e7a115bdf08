#pragma once

// Reproducible long-tail benchmarks: a Gaussian-mixture classification task
// with geometrically decaying class counts, a detection proxy that adds a
// dominant background class, and a simple repeat-factor oversampler.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace logn {

struct SynthSpec {
  int num_classes = 50;  // foreground classes
  int feature_dim = 16;
  int max_count = 500;
  double imbalance_ratio = 100.0;
  double class_sep = 4.0;
  double noise_sigma = 1.0;
  double bg_multiplier = 0.0;  // background samples per foreground sample
  std::uint64_t seed = 0;
};

struct Dataset {
  std::size_t rows = 0;
  int feature_dim = 0;
  int num_classes = 0;  // label slots, background included
  std::optional<int> bg_index;
  std::vector<double> features;  // rows x feature_dim, row-major
  std::vector<std::int32_t> labels;
  SynthSpec spec;

  std::span<const double> row(std::size_t i) const {
    const auto d = static_cast<std::size_t>(feature_dim);
    return std::span<const double>(features).subspan(i * d, d);
  }
  // Number of rows per label slot.
  std::vector<std::int64_t> slot_counts() const;
};

// n_c = round(max_count * ratio^(-c / (C - 1))). Throws DomainError naming the
// first class whose count rounds below 1.
std::vector<std::int64_t> analytic_counts(const SynthSpec& spec);

// Deterministic class centers, one row per foreground class.
std::vector<double> class_centers(const SynthSpec& spec);

// Long-tail training split without background. Rows are shuffled.
Dataset generate_classification(const SynthSpec& spec);

// Long-tail training split plus round(bg_multiplier * foreground) background
// rows drawn around the grand center with 3x the noise. Foreground ordinal k
// occupies slot k, or k + 1 when it is at or after bg_index.
Dataset generate_detection_proxy(const SynthSpec& spec, int bg_index = 0);

// Class-balanced held-out split sharing the training centers: `per_class` rows
// per foreground class, plus round(bg_multiplier * foreground) background rows
// when bg_index is set. A negative bg_multiplier uses the spec's value.
Dataset generate_holdout(const SynthSpec& spec, int per_class,
                         std::optional<int> bg_index = std::nullopt,
                         double bg_multiplier = -1.0);

// Repeats every foreground row of a class whose frequency among foreground
// rows is below threshold_frac, ceil(sqrt(threshold_frac / f_c)) times in
// total. Copies are appended and the result shuffled with `seed`.
Dataset repeat_factor_oversample(const Dataset& dataset, double threshold_frac,
                                 std::uint64_t seed = 0);

// Repeat factor per label slot (1 for background and frequent classes).
std::vector<int> repeat_factors(const Dataset& dataset, double threshold_frac);

}  // namespace logn
