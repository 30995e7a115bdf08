#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "logn/io.hpp"

namespace logn {

struct PropertyResult {
  std::string name;
  std::size_t trials = 0;
  double max_violation = 0.0;  // worst observed deviation; <= tolerance passes
  double tolerance = 0.0;
  bool passed = false;
};

// Randomized identity and inequality checks of the calibration algebra.
PropertyResult check_bg_shift_equivalence(std::size_t trials, std::uint64_t seed);
PropertyResult check_inverse_composition(std::size_t trials, std::uint64_t seed);
PropertyResult check_decomposition_consistency(std::size_t trials, std::uint64_t seed);
// Violation is max(|k(beta = 0)| - |k(beta)|) over the grid; must be < 0.
PropertyResult check_changing_rate_inequality();
PropertyResult check_odds_monotone();
PropertyResult check_negative_beta_limit(std::size_t trials, std::uint64_t seed);

std::vector<PropertyResult> run_verification_suite(std::uint64_t seed = 2022);

json verification_report(const std::vector<PropertyResult>& results);

}  // namespace logn
