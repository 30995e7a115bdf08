#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "logn/errors.hpp"
#include "logn/stats.hpp"
#include "logn/synth.hpp"
#include "test_util.hpp"

using namespace logn;

namespace {

// Textbook two-pass mean and population variance per column.
void two_pass(const LogitTable& t, std::vector<double>& mean, std::vector<double>& var) {
  const int C = t.num_classes();
  mean.assign(C, 0.0);
  var.assign(C, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (int c = 0; c < C; ++c) mean[c] += t.row(i)[c];
  for (auto& m : mean) m /= static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    for (int c = 0; c < C; ++c) {
      const double d = t.row(i)[c] - mean[c];
      var[c] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(t.size());
}

}  // namespace

TEST_CASE("first EMA batch initializes to the batch moments") {
  auto t = testutil::random_table(17, 4, std::nullopt, 3);
  auto s = update_ema(RunningStats::empty(4, 0.3), t);
  std::vector<double> m, v;
  two_pass(t, m, v);
  CHECK(s.initialized);
  CHECK(s.count == 17);
  for (int c = 0; c < 4; ++c) {
    CHECK(s.mean[c] == doctest::Approx(m[c]).epsilon(1e-14));
    CHECK(s.var[c] == doctest::Approx(v[c]).epsilon(1e-14));
  }
}

TEST_CASE("EMA blends with the momentum weight") {
  auto a = testutil::table({{0, {0.0, 2.0}}, {1, {2.0, 2.0}}});
  auto b = testutil::table({{0, {4.0, 0.0}}, {1, {4.0, 0.0}}});
  auto s = update_ema(update_ema(RunningStats::empty(2, 0.25), a), b);
  CHECK(s.mean[0] == doctest::Approx(0.75 * 1.0 + 0.25 * 4.0));
  CHECK(s.var[0] == doctest::Approx(0.75 * 1.0));
  CHECK(s.mean[1] == doctest::Approx(0.75 * 2.0));
  CHECK(s.count == 4);
}

TEST_CASE("identical batches are an EMA fixed point") {
  auto t = testutil::random_table(30, 5, std::nullopt, 11);
  for (double m : {0.01, 0.5, 1.0}) {
    auto s1 = update_ema(RunningStats::empty(5, m), t);
    auto s2 = update_ema(s1, t);
    for (int c = 0; c < 5; ++c) {
      CHECK(s2.mean[c] == doctest::Approx(s1.mean[c]).epsilon(1e-14));
      CHECK(s2.var[c] == doctest::Approx(s1.var[c]).epsilon(1e-14));
    }
  }
}

TEST_CASE("repeating a batch converges monotonically in max-norm") {
  auto first = testutil::random_table(20, 6, std::nullopt, 1, 5.0);
  auto target = testutil::random_table(20, 6, std::nullopt, 2);
  auto bm = batch_moments(target);
  auto s = update_ema(RunningStats::empty(6, 0.1), first);
  double prev = std::numeric_limits<double>::infinity();
  double start = 0.0;
  for (int c = 0; c < 6; ++c)
    start = std::max({start, std::abs(s.mean[c] - bm.mean[c]), std::abs(s.var[c] - bm.var[c])});
  for (int k = 0; k < 50; ++k) {
    s = update_ema(s, target);
    double d = 0.0;
    for (int c = 0; c < 6; ++c)
      d = std::max({d, std::abs(s.mean[c] - bm.mean[c]), std::abs(s.var[c] - bm.var[c])});
    CHECK(d <= prev);
    prev = d;
  }
  // each step shrinks the gap by exactly (1 - m)
  CHECK(prev <= start * std::pow(0.9, 50) * (1.0 + 1e-9));
}

TEST_CASE("momentum 1 reproduces the latest batch") {
  auto a = testutil::random_table(10, 3, std::nullopt, 5);
  auto b = testutil::random_table(12, 3, std::nullopt, 6);
  auto s = update_ema(update_ema(RunningStats::empty(3, 1.0), a), b);
  auto bm = batch_moments(b);
  for (int c = 0; c < 3; ++c) {
    CHECK(s.mean[c] == bm.mean[c]);
    CHECK(s.var[c] == bm.var[c]);
  }
}

TEST_CASE("update_ema rejects bad input") {
  auto s = RunningStats::empty(3);
  auto narrow = testutil::table({{0, {1.0, 2.0}}});
  CHECK_THROWS_AS(update_ema(s, narrow), DimensionError);

  auto t = testutil::table({{0, {1.0, 2.0, 3.0}}, {1, {1.0, NAN, 3.0}}});
  try {
    update_ema(s, t);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.record_index() == 1);
  }

  // ema_pass reports indices relative to the whole stream
  auto big = testutil::random_table(40, 3, std::nullopt, 9);
  big.mutable_row(33)[2] = INFINITY;
  try {
    ema_pass(big, 8);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.record_index() == 33);
  }
  CHECK_THROWS_AS(RunningStats::empty(3, 0.0), DomainError);
  CHECK_THROWS_AS(RunningStats::empty(3, 1.5), DomainError);
}

TEST_CASE("compute_exact on hand examples") {
  auto s = compute_exact(testutil::table({{0, {1.0, 3.0}}, {1, {3.0, 1.0}}}));
  CHECK(s.mean == std::vector<double>{2.0, 2.0});
  CHECK(s.var == std::vector<double>{1.0, 1.0});
  CHECK(s.count == 2);

  auto k = compute_exact(testutil::table({{0, {0.1, -7.0}}, {0, {0.1, -7.0}}, {1, {0.1, -7.0}}}));
  CHECK(k.var[0] == 0.0);
  CHECK(k.var[1] == 0.0);

  CHECK_THROWS_AS(compute_exact(LogitTable(2)), DimensionError);
}

TEST_CASE("compute_exact agrees with the two-pass oracle") {
  auto t = testutil::random_table(1000, 8, 0, 21, 3.0, 10.0);
  auto s = compute_exact(t);
  std::vector<double> m, v;
  two_pass(t, m, v);
  for (int c = 0; c < 8; ++c) {
    CHECK(std::abs(s.mean[c] - m[c]) <= 1e-10 * std::abs(m[c]));
    CHECK(std::abs(s.var[c] - v[c]) <= 1e-10 * v[c]);
  }
  CHECK(s.count == 1000);
  CHECK(s.bg_index == 0);
}

TEST_CASE("compute_exact is permutation invariant") {
  auto t = testutil::random_table(500, 5, std::nullopt, 4, 2.0, -3.0);
  auto s = compute_exact(t);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    LogitTable p(5);
    for (auto i : idx) p.push_back(t.label(i), t.row(i));
    auto q = compute_exact(p);
    for (int c = 0; c < 5; ++c) {
      CHECK(q.mean[c] == doctest::Approx(s.mean[c]).epsilon(1e-9));
      CHECK(q.var[c] == doctest::Approx(s.var[c]).epsilon(1e-9));
    }
  }
}

TEST_CASE("variance is zero exactly for constant columns") {
  auto t = testutil::random_table(50, 3, std::nullopt, 3);
  for (std::size_t i = 0; i < t.size(); ++i) t.mutable_row(i)[1] = 2.5;
  auto s = compute_exact(t);
  CHECK(s.var[0] > 0.0);
  CHECK(s.var[1] == 0.0);
  CHECK(s.var[2] > 0.0);
}

TEST_CASE("sharded merge matches the serial pass") {
  auto t = testutil::random_table(10007, 6, 0, 31);
  auto s = compute_exact(t);
  for (std::size_t shard : {1u, 7u, 4096u, 20000u}) {
    auto p = compute_exact_parallel(t, shard);
    CHECK(p.count == s.count);
    for (int c = 0; c < 6; ++c) {
      CHECK(p.mean[c] == doctest::Approx(s.mean[c]).epsilon(1e-12));
      CHECK(p.var[c] == doctest::Approx(s.var[c]).epsilon(1e-12));
    }
  }
  // merge with an empty accumulator is a no-op
  ExactAccumulator a(6), empty(6);
  a.add(t);
  a.merge(empty);
  CHECK(a.count() == t.size());
  empty.merge(a);
  CHECK(empty.mean() == a.mean());
}

TEST_CASE("positive-only statistics select the own-class entry") {
  auto t = testutil::table({{0, {5.0, -1.0}}, {1, {-2.0, 4.0}}});
  auto p = positive_only_stats(t);
  CHECK(p.stats.mean == std::vector<double>{5.0, 4.0});
  CHECK(p.empty == std::vector<bool>{false, false});
  CHECK(compute_exact(t).mean == std::vector<double>{1.5, 1.5});

  auto missing = testutil::table({{0, {1.0, 2.0, 3.0}}, {0, {3.0, 2.0, 1.0}}});
  auto q = positive_only_stats(missing);
  CHECK(q.empty == std::vector<bool>{false, true, true});
  CHECK(q.stats.mean[0] == 2.0);
  CHECK(q.stats.var[0] == 1.0);
  CHECK(q.stats.mean[1] == 0.0);
}

TEST_CASE("positive-only equals exact on constant rows") {
  // Every row is constant and appears once under each label, so the entries
  // positive-only sees for class c are exactly column c.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  LogitTable all(4);
  for (int i = 0; i < 400; ++i) {
    const std::vector<double> row(4, n(rng));
    for (int c = 0; c < 4; ++c) all.push_back(c, row);
  }
  auto p = positive_only_stats(all);
  auto e = compute_exact(all);
  for (int c = 0; c < 4; ++c) {
    CHECK(p.stats.mean[c] == doctest::Approx(e.mean[c]).epsilon(1e-12));
    CHECK(p.stats.var[c] == doctest::Approx(e.var[c]).epsilon(1e-12));
  }
}

TEST_CASE("label grouping boundaries") {
  auto d = label_distribution_from_counts({100, 10, 1});
  CHECK(d.group_of == std::vector<Group>{Group::common, Group::rare, Group::rare});
  CHECK(d.total() == 111);
  CHECK(group_for_count(11, {}) == Group::common);
  CHECK(group_for_count(101, {}) == Group::frequent);

  auto f = label_distribution_from_counts({500, 200, 101});
  for (auto g : f.group_of) CHECK(g == Group::frequent);

  std::vector<std::int32_t> labels{0, 1, 1, 2, 2, 2};
  auto b = build_label_distribution(labels, 3);
  CHECK(b.counts == std::vector<std::int64_t>{1, 2, 3});
  std::vector<std::int32_t> bad{0, 3};
  CHECK_THROWS_WITH_AS(build_label_distribution(bad, 3), doctest::Contains("label 3"),
                       DimensionError);
}

TEST_CASE("group sizes follow the analytic counts") {
  SynthSpec spec;
  spec.num_classes = 20;
  spec.max_count = 500;
  spec.imbalance_ratio = 100.0;
  spec.feature_dim = 2;
  auto ds = generate_classification(spec);
  auto dist = build_label_distribution(ds.labels, 20);
  auto counts = analytic_counts(spec);
  CHECK(dist.counts == counts);
  int rare = 0, common = 0, freq = 0;
  for (auto n : counts) (n <= 10 ? rare : n <= 100 ? common : freq)++;
  int r2 = 0, c2 = 0, f2 = 0;
  for (auto g : dist.group_of) (g == Group::rare ? r2 : g == Group::common ? c2 : f2)++;
  CHECK(r2 == rare);
  CHECK(c2 == common);
  CHECK(f2 == freq);
}

TEST_CASE("foreground distribution skips the background slot") {
  std::vector<std::int32_t> slots{0, 0, 1, 2, 2, 0};
  auto d = foreground_label_distribution(slots, 3, 0);
  CHECK(d.counts == std::vector<std::int64_t>{1, 2});
  auto last = foreground_label_distribution(slots, 3, 2);
  CHECK(last.counts == std::vector<std::int64_t>{3, 1});
}
