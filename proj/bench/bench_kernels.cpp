// Serial reference vs OpenMP timing for the batch kernels.
// usage: bench_kernels [rows] [classes] [repeats]

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "logn/calibrate.hpp"
#include "logn/stats.hpp"
#include "logn/trainer.hpp"

using namespace logn;

namespace {

double best_of(int repeats, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void row(const char* name, double serial, double parallel, double diff) {
  std::printf("%-16s %10.2f %10.2f %8.2fx %10.3g\n", name, serial * 1e3, parallel * 1e3,
              serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t rows = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200000;
  const int C = argc > 2 ? std::atoi(argv[2]) : 51;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 5;

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  LogitTable t(C, 0);
  t.reserve(rows);
  std::vector<double> r(C);
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto& v : r) v = n(rng);
    t.push_back(static_cast<std::int32_t>(rng() % C), r);
  }

  std::printf("rows %zu, classes %d, threads %d, best of %d\n", rows, C, omp_get_max_threads(),
              repeats);
  std::printf("%-16s %10s %10s %9s %10s\n", "kernel", "serial ms", "omp ms", "speedup", "max diff");

  const CalibrationParams p = finalize(compute_exact(t), BetaMode::fg_min());
  LogitTable a, b;
  const double ts = best_of(repeats, [&] { a = apply_logn_serial(t, p); });
  const double tp = best_of(repeats, [&] { b = apply_logn(t, p); });
  row("apply_logn", ts, tp, max_diff(a.values(), b.values()));

  const double ss = best_of(repeats, [&] { a = softmax_rows_serial(t); });
  const double sp = best_of(repeats, [&] { b = softmax_rows(t); });
  row("softmax_rows", ss, sp, max_diff(a.values(), b.values()));

  RunningStats e1, e2;
  const double es = best_of(repeats, [&] { e1 = compute_exact(t); });
  const double ep = best_of(repeats, [&] { e2 = compute_exact_parallel(t); });
  row("compute_exact", es, ep, std::max(max_diff(e1.mean, e2.mean), max_diff(e1.var, e2.var)));

  Dataset ds;
  ds.feature_dim = 16;
  ds.num_classes = C;
  ds.bg_index = 0;
  ds.rows = rows / 4;
  for (std::size_t i = 0; i < ds.rows * 16; ++i) ds.features.push_back(n(rng));
  ds.labels.assign(ds.rows, 0);
  Model m = Model::zeros(16, 64, C);
  for (std::size_t k = 0; k < m.parameter_count(); ++k) m.parameter(k) = 0.1 * n(rng);
  const double ps = best_of(repeats, [&] { a = predict_logits_serial(m, ds); });
  const double pp = best_of(repeats, [&] { b = predict_logits(m, ds); });
  row("predict_logits", ps, pp, max_diff(a.values(), b.values()));
  return 0;
}
