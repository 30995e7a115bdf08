#include "logn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "logn/background_math.hpp"
#include "logn/calibrate.hpp"

namespace logn {
namespace {

std::vector<double> random_logits(std::mt19937_64& rng, std::size_t width, double sd) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(width);
  for (double& x : v) x = g(rng);
  return v;
}

PropertyResult finish(std::string name, std::size_t trials, double worst, double tol) {
  return {std::move(name), trials, worst, tol, worst <= tol};
}

}  // namespace

PropertyResult check_bg_shift_equivalence(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(2, 32);
  std::uniform_real_distribution<double> beta(-10.0, 10.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto w = static_cast<std::size_t>(width(rng));
    const auto x = random_logits(rng, w, 4.0);
    const int bg = std::uniform_int_distribution<int>(0, static_cast<int>(w) - 1)(rng);
    const double b = beta(rng);
    const auto a = score_with_bg_calibration(x, b, bg, BgShiftForm::background_shift);
    const auto f = score_with_bg_calibration(x, b, bg, BgShiftForm::foreground_shift);
    for (std::size_t c = 0; c < w; ++c) {
      if (static_cast<int>(c) != bg) worst = std::max(worst, std::abs(a[c] - f[c]));
    }
  }
  return finish("bg_shift_equivalence", trials, worst, 1e-12);
}

PropertyResult check_inverse_composition(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(2, 32);
  std::uniform_real_distribution<double> log_var(std::log(1e-3), std::log(1e3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 5.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto w = static_cast<std::size_t>(width(rng));
    RunningStats stats = RunningStats::empty(static_cast<int>(w));
    for (std::size_t c = 0; c < w; ++c) {
      stats.mean[c] = g(rng);
      stats.var[c] = std::exp(log_var(rng));
    }
    stats.count = 1;
    stats.initialized = true;
    if (unit(rng) < 0.5) {
      stats.bg_index = std::uniform_int_distribution<int>(0, static_cast<int>(w) - 1)(rng);
    }
    const auto params = finalize(stats, BetaMode::constant(g(rng)), 1.0);
    const auto x = random_logits(rng, w, 5.0);
    const auto there = online_inverse(logn_normalize(x, params), params);
    const auto back = logn_normalize(online_inverse(x, params), params);
    double norm = 0.0, err = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      norm = std::max(norm, std::abs(x[c]));
      err = std::max({err, std::abs(there[c] - x[c]), std::abs(back[c] - x[c])});
    }
    worst = std::max(worst, err / norm);
  }
  return finish("inverse_composition", trials, worst, 1e-9);
}

PropertyResult check_decomposition_consistency(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(3, 16);
  std::uniform_real_distribution<double> beta(-6.0, 6.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto w = static_cast<std::size_t>(width(rng));
    const auto x = random_logits(rng, w, 2.0);
    const double b = beta(rng);
    const auto plain = softmax_scores(x);
    const double s_b = plain[0];
    double fg_sum = 0.0;
    for (std::size_t c = 1; c < w; ++c) fg_sum += std::exp(x[c]);
    const auto calibrated = score_with_bg_calibration(x, b, 0, BgShiftForm::background_shift);
    for (std::size_t c = 1; c < w; ++c) {
      const double s_f = std::exp(x[c]) / fg_sum;
      const auto d = decompose_log_score(s_b, s_f, b);
      worst = std::max(worst, std::abs(d.log_score - std::log(calibrated[c])));
    }
  }
  return finish("decomposition_consistency", trials, worst, 1e-10);
}

PropertyResult check_changing_rate_inequality() {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t trials = 0;
  for (int i = 1; i <= 19; ++i) {
    const double s_b = 0.05 * i;
    for (double delta : {-0.05, -0.01, 0.01, 0.05}) {
      const double moved = s_b + delta;
      if (!(moved > 0.0 && moved < 1.0)) continue;
      const double k0 = std::abs(changing_rate_k(delta, s_b, 0.5, 0.0));
      for (double beta : {-3.0, -2.0, -1.0}) {
        const double kb = std::abs(changing_rate_k(delta, s_b, 0.5, beta));
        worst = std::max(worst, k0 - kb);
        ++trials;
      }
    }
  }
  PropertyResult r{"changing_rate_inequality", trials, worst, 0.0, worst < 0.0};
  return r;
}

PropertyResult check_odds_monotone() {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t trials = 0;
  double prev = background_odds(0.001);
  for (int i = 2; i < 1000; ++i) {
    const double b = background_odds(0.001 * i);
    worst = std::max(worst, prev - b);
    prev = b;
    ++trials;
  }
  return {"odds_monotone", trials, worst, 0.0, worst < 0.0};
}

PropertyResult check_negative_beta_limit(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const auto x = random_logits(rng, 8, 2.0);
    double prev_bg_score = -1.0;
    std::vector<double> prev_scores;
    for (double beta : {0.0, -2.0, -4.0, -8.0}) {
      const auto s = score_with_bg_calibration(x, beta, 0, BgShiftForm::background_shift);
      if (!prev_scores.empty()) {
        worst = std::max(worst, prev_bg_score - s[0]);
        for (std::size_t c = 1; c < s.size(); ++c) {
          worst = std::max(worst, s[c] - prev_scores[c]);
        }
      }
      prev_scores = s;
      prev_bg_score = s[0];
    }
  }
  return {"negative_beta_limit", trials, worst, 0.0, worst < 0.0};
}

std::vector<PropertyResult> run_verification_suite(std::uint64_t seed) {
  return {check_bg_shift_equivalence(10000, seed),
          check_inverse_composition(1000, seed + 1),
          check_decomposition_consistency(1000, seed + 2),
          check_changing_rate_inequality(),
          check_odds_monotone(),
          check_negative_beta_limit(1000, seed + 3)};
}

json verification_report(const std::vector<PropertyResult>& results) {
  json props = json::array();
  bool all = true;
  for (const auto& r : results) {
    props.push_back({{"property", r.name},
                     {"trials", r.trials},
                     {"max_violation", r.max_violation},
                     {"tolerance", r.tolerance},
                     {"passed", r.passed}});
    all = all && r.passed;
  }
  return {{"passed", all}, {"properties", props}};
}

}  // namespace logn
