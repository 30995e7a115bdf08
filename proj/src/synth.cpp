#include "logn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "logn/errors.hpp"

namespace logn {
namespace {

// Independent generator streams derived from one seed.
enum class Stream : std::uint64_t { centers = 1, train = 2, holdout = 3, resample = 4 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

void check_spec(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw DomainError("num_classes must be at least 2");
  if (spec.feature_dim < 1) throw DomainError("feature_dim must be positive");
  if (spec.max_count < 1) throw DomainError("max_count must be positive");
  if (!(spec.imbalance_ratio >= 1.0)) {
    throw DomainError("imbalance_ratio must be at least 1");
  }
  if (!(spec.class_sep > 0.0)) throw DomainError("class_sep must be positive");
  if (!(spec.noise_sigma > 0.0)) throw DomainError("noise_sigma must be positive");
  if (!(spec.bg_multiplier >= 0.0)) {
    throw DomainError("bg_multiplier must be nonnegative");
  }
}

int slot_of(int ordinal, std::optional<int> bg_index) {
  return bg_index && ordinal >= *bg_index ? ordinal + 1 : ordinal;
}

std::vector<double> grand_center(const SynthSpec& spec,
                                 const std::vector<double>& centers) {
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  std::vector<double> g(d, 0.0);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (std::size_t j = 0; j < d; ++j) g[j] += centers[c * d + j];
  }
  for (double& v : g) v /= spec.num_classes;
  return g;
}

void append_sample(Dataset& ds, std::span<const double> center, double sigma,
                   std::int32_t label, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (double m : center) ds.features.push_back(m + noise(rng));
  ds.labels.push_back(label);
  ++ds.rows;
}

void shuffle_rows(Dataset& ds, std::mt19937_64& rng) {
  std::vector<std::size_t> order(ds.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto d = static_cast<std::size_t>(ds.feature_dim);
  std::vector<double> features(ds.features.size());
  std::vector<std::int32_t> labels(ds.rows);
  for (std::size_t i = 0; i < ds.rows; ++i) {
    const std::size_t src = order[i];
    std::copy_n(ds.features.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                features.begin() + static_cast<std::ptrdiff_t>(i * d));
    labels[i] = ds.labels[src];
  }
  ds.features = std::move(features);
  ds.labels = std::move(labels);
}

Dataset make_split(const SynthSpec& spec, const std::vector<std::int64_t>& counts,
                   std::int64_t bg_count, std::optional<int> bg_index,
                   Stream stream) {
  const auto centers = class_centers(spec);
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  Dataset ds;
  ds.feature_dim = spec.feature_dim;
  ds.num_classes = spec.num_classes + (bg_index ? 1 : 0);
  ds.bg_index = bg_index;
  ds.spec = spec;
  const std::int64_t fg_total = std::accumulate(counts.begin(), counts.end(),
                                                std::int64_t{0});
  ds.features.reserve(static_cast<std::size_t>(fg_total + bg_count) * d);
  ds.labels.reserve(static_cast<std::size_t>(fg_total + bg_count));

  auto rng = make_rng(spec.seed, stream);
  for (int c = 0; c < spec.num_classes; ++c) {
    std::span<const double> center(centers.data() + c * d, d);
    for (std::int64_t i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      append_sample(ds, center, spec.noise_sigma, slot_of(c, bg_index), rng);
    }
  }
  if (bg_index) {
    const auto g = grand_center(spec, centers);
    for (std::int64_t i = 0; i < bg_count; ++i) {
      append_sample(ds, g, 3.0 * spec.noise_sigma, *bg_index, rng);
    }
  }
  shuffle_rows(ds, rng);
  return ds;
}

}  // namespace

std::vector<std::int64_t> Dataset::slot_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (auto l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

std::vector<std::int64_t> analytic_counts(const SynthSpec& spec) {
  check_spec(spec);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(spec.num_classes));
  for (int c = 0; c < spec.num_classes; ++c) {
    const double exponent = -static_cast<double>(c) / (spec.num_classes - 1);
    const auto n = static_cast<std::int64_t>(
        std::llround(spec.max_count * std::pow(spec.imbalance_ratio, exponent)));
    if (n < 1) {
      throw DomainError("class " + std::to_string(c) +
                        " would receive no samples; lower the imbalance ratio "
                        "or raise max_count");
    }
    counts[static_cast<std::size_t>(c)] = n;
  }
  return counts;
}

std::vector<double> class_centers(const SynthSpec& spec) {
  check_spec(spec);
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  // Two N(0, I/(2d)) points are on average ~1 apart, so class_sep sets the
  // typical pairwise distance.
  const double unit = spec.class_sep / std::sqrt(2.0 * static_cast<double>(d));
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto rng = make_rng(spec.seed, Stream::centers);
  std::vector<double> centers(static_cast<std::size_t>(spec.num_classes) * d);
  for (double& v : centers) v = unit * gauss(rng);
  return centers;
}

Dataset generate_classification(const SynthSpec& spec) {
  if (spec.bg_multiplier != 0.0) {
    throw DomainError("classification data requires bg_multiplier = 0");
  }
  return make_split(spec, analytic_counts(spec), 0, std::nullopt, Stream::train);
}

Dataset generate_detection_proxy(const SynthSpec& spec, int bg_index) {
  if (!(spec.bg_multiplier > 0.0)) {
    throw DomainError("detection proxy requires bg_multiplier > 0");
  }
  if (bg_index < 0 || bg_index > spec.num_classes) {
    throw DomainError("bg_index outside [0, num_classes]");
  }
  const auto counts = analytic_counts(spec);
  const std::int64_t fg = std::accumulate(counts.begin(), counts.end(),
                                          std::int64_t{0});
  const auto bg = static_cast<std::int64_t>(
      std::llround(spec.bg_multiplier * static_cast<double>(fg)));
  return make_split(spec, counts, bg, bg_index, Stream::train);
}

Dataset generate_holdout(const SynthSpec& spec, int per_class,
                         std::optional<int> bg_index, double bg_multiplier) {
  check_spec(spec);
  if (per_class < 1) throw DomainError("per_class must be positive");
  if (bg_index && (*bg_index < 0 || *bg_index > spec.num_classes)) {
    throw DomainError("bg_index outside [0, num_classes]");
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(spec.num_classes),
                                   per_class);
  std::int64_t bg = 0;
  if (bg_index) {
    const double ratio = bg_multiplier < 0.0 ? spec.bg_multiplier : bg_multiplier;
    bg = static_cast<std::int64_t>(
        std::llround(ratio * static_cast<double>(per_class) * spec.num_classes));
  }
  return make_split(spec, counts, bg, bg_index, Stream::holdout);
}

std::vector<int> repeat_factors(const Dataset& dataset, double threshold_frac) {
  if (!(threshold_frac > 0.0 && threshold_frac < 1.0)) {
    throw DomainError("threshold_frac must lie in (0, 1)");
  }
  const auto counts = dataset.slot_counts();
  std::int64_t fg_total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (!dataset.bg_index || static_cast<int>(c) != *dataset.bg_index) {
      fg_total += counts[c];
    }
  }
  std::vector<int> factors(counts.size(), 1);
  if (fg_total == 0) return factors;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (dataset.bg_index && static_cast<int>(c) == *dataset.bg_index) continue;
    if (counts[c] == 0) continue;
    const double f = static_cast<double>(counts[c]) / static_cast<double>(fg_total);
    if (f < threshold_frac) {
      // Absorb rounding in the ratio so exact squares are not bumped up.
      factors[c] = static_cast<int>(
          std::ceil(std::sqrt(threshold_frac / f) - 1e-9));
    }
  }
  return factors;
}

Dataset repeat_factor_oversample(const Dataset& dataset, double threshold_frac,
                                 std::uint64_t seed) {
  const auto factors = repeat_factors(dataset, threshold_frac);
  if (std::all_of(factors.begin(), factors.end(), [](int r) { return r == 1; })) {
    return dataset;
  }
  Dataset out = dataset;
  for (std::size_t i = 0; i < dataset.rows; ++i) {
    const int r = factors[static_cast<std::size_t>(dataset.labels[i])];
    for (int k = 1; k < r; ++k) {
      const auto src = dataset.row(i);
      out.features.insert(out.features.end(), src.begin(), src.end());
      out.labels.push_back(dataset.labels[i]);
      ++out.rows;
    }
  }
  auto rng = make_rng(seed, Stream::resample);
  shuffle_rows(out, rng);
  return out;
}

}  // namespace logn
