#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "logn/calibrate.hpp"
#include "logn/errors.hpp"
#include "logn/metrics.hpp"
#include "test_util.hpp"

using namespace logn;

namespace {

LogitTable one_hot_predictions(const std::vector<int>& labels, const std::vector<int>& preds,
                               int C) {
  LogitTable t(C);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<double> row(C, 0.0);
    row[preds[i]] = 1.0;
    t.push_back(labels[i], row);
  }
  return t;
}

// Reference AP: mean over positives of precision at each positive's rank,
// with interpolation applied as a running max from the bottom.
double ap_oracle(std::vector<double> scores, std::vector<int> labels, int positive) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<double> prec_at_pos;
  int tp = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (labels[idx[k]] == positive) {
      ++tp;
      prec_at_pos.push_back(static_cast<double>(tp) / (k + 1));
    }
  }
  for (std::size_t k = prec_at_pos.size(); k-- > 1;)
    prec_at_pos[k - 1] = std::max(prec_at_pos[k - 1], prec_at_pos[k]);
  return std::accumulate(prec_at_pos.begin(), prec_at_pos.end(), 0.0) / prec_at_pos.size();
}

}  // namespace

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(argmax(std::vector<double>{0.0, 0.0}) == 0);
  CHECK_THROWS_AS(argmax(std::vector<double>{}), DimensionError);
}

TEST_CASE("perfect predictions score one everywhere") {
  auto dist = label_distribution_from_counts({100, 10, 1});
  std::vector<int> labels{0, 1, 2, 2, 1, 0};
  auto r = classify_and_score(one_hot_predictions(labels, labels, 3), dist);
  CHECK(r.overall_top1 == 1.0);
  CHECK(r.balanced_accuracy == 1.0);
  CHECK(r.group_accuracy(Group::rare) == 1.0);
  CHECK(r.group_accuracy(Group::common) == 1.0);
  CHECK_FALSE(r.group_accuracy(Group::frequent).has_value());
}

TEST_CASE("constant head prediction gives one third balanced accuracy") {
  auto dist = label_distribution_from_counts({100, 10, 1});
  std::vector<int> labels{0, 0, 0, 0, 1, 1, 2};
  auto r = classify_and_score(one_hot_predictions(labels, std::vector<int>(7, 0), 3), dist);
  CHECK(r.balanced_accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(r.overall_top1 == doctest::Approx(4.0 / 7.0));
  CHECK(r.per_class_recall == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(r.group_accuracy(Group::common) == 1.0);
  CHECK(r.group_accuracy(Group::rare) == 0.0);
}

TEST_CASE("classify_and_score errors") {
  auto dist = label_distribution_from_counts({5, 5});
  CHECK_THROWS_AS(classify_and_score(LogitTable(2), dist), DimensionError);
  auto bad = testutil::table({{2, {0.0, 1.0}}});
  CHECK_THROWS_AS(classify_and_score(bad, dist), DimensionError);
  auto wide = testutil::table({{0, {0.0, 1.0, 2.0}}});
  CHECK_THROWS_AS(classify_and_score(wide, dist), DimensionError);
}

TEST_CASE("balanced accuracy is invariant under class relabeling") {
  std::mt19937_64 rng(4);
  const int C = 6;
  auto dist = label_distribution_from_counts({300, 120, 60, 20, 8, 2});
  auto t = testutil::random_table(600, C, std::nullopt, 19, 1.0);
  auto base = classify_and_score(t, dist);

  std::vector<int> perm(C);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  LogitTable p(C);
  std::vector<double> row(C);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (int c = 0; c < C; ++c) row[perm[c]] = t.row(i)[c];
    p.push_back(perm[t.label(i)], row);
  }
  std::vector<std::int64_t> counts(C);
  for (int c = 0; c < C; ++c) counts[perm[c]] = dist.counts[c];
  auto r = classify_and_score(p, label_distribution_from_counts(counts));
  CHECK(r.balanced_accuracy == doctest::Approx(base.balanced_accuracy).epsilon(1e-14));
  CHECK(r.overall_top1 == base.overall_top1);
  for (int c = 0; c < C; ++c)
    CHECK(r.per_class_recall[perm[c]] == base.per_class_recall[c]);
  for (auto g : {Group::rare, Group::common, Group::frequent})
    CHECK(r.group_accuracy(g).value() == doctest::Approx(base.group_accuracy(g).value()));
}

TEST_CASE("group accuracies aggregate to balanced accuracy") {
  auto dist = label_distribution_from_counts({300, 120, 60, 20, 8, 2, 1});
  auto t = testutil::random_table(700, 7, std::nullopt, 23, 1.0);
  auto r = classify_and_score(t, dist);
  double sum = 0.0;
  int n = 0;
  for (auto g : {Group::rare, Group::common, Group::frequent}) {
    const auto k = std::count(dist.group_of.begin(), dist.group_of.end(), g);
    if (auto a = r.group_accuracy(g)) {
      sum += *a * k;
      n += static_cast<int>(k);
    }
  }
  CHECK(sum / n == doctest::Approx(r.balanced_accuracy).epsilon(1e-14));
}

TEST_CASE("average precision basics") {
  std::vector<std::int32_t> labels{1, 1, 0, 0};
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.2, 0.1}, labels, 1) == 1.0);

  // one positive at rank k
  for (int k = 1; k <= 6; ++k) {
    std::vector<double> s(6);
    std::vector<std::int32_t> l(6, 0);
    for (int i = 0; i < 6; ++i) s[i] = 6 - i;
    l[k - 1] = 3;
    CHECK(average_precision(s, l, 3) == doctest::Approx(1.0 / k));
  }
  CHECK_THROWS_AS(average_precision(std::vector<double>{0.1}, std::vector<std::int32_t>{0}, 1),
                  DomainError);
}

TEST_CASE("average precision matches the reference on random rankings") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 60);
    std::vector<double> s(n);
    std::vector<int> l(n);
    std::vector<std::int32_t> l32(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::round(u(rng) * 10.0) / 10.0;  // plenty of ties
      l[i] = l32[i] = u(rng) < 0.3 ? 1 : 0;
    }
    l[0] = l32[0] = 1;
    CHECK(average_precision(s, l32, 1) == doctest::Approx(ap_oracle(s, l, 1)).epsilon(1e-12));
  }
}

TEST_CASE("AP is invariant under increasing transforms of the score column") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(200);
  std::vector<std::int32_t> l(200);
  for (int i = 0; i < 200; ++i) {
    s[i] = n(rng);
    l[i] = rng() % 4 == 0;
  }
  const double ap = average_precision(s, l, 1);
  std::vector<double> t(200);
  for (int i = 0; i < 200; ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
  CHECK(average_precision(t, l, 1) == ap);
}

TEST_CASE("proposal ranking AP") {
  // three proposals, background slot 0
  auto scores = testutil::table({{1, {0.1, 0.8, 0.1}}, {2, {0.2, 0.2, 0.6}}, {0, {0.7, 0.2, 0.1}}},
                                0);
  auto r = proposal_ranking_ap(scores, 0);
  CHECK(r.per_class_ap == std::vector<double>{1.0, 1.0});
  CHECK(r.mean_ap == 1.0);

  // a class without positives is skipped in the mean
  auto partial = testutil::table({{1, {0.1, 0.8, 0.1}}, {0, {0.2, 0.3, 0.5}}}, 0);
  auto p = proposal_ranking_ap(partial, 0);
  CHECK(std::isnan(p.per_class_ap[1]));
  CHECK(p.mean_ap == 1.0);

  auto unnormalized = testutil::table({{1, {0.5, 0.8, 0.1}}}, 0);
  CHECK_THROWS_AS(proposal_ranking_ap(unnormalized, 0), DomainError);
  auto only_bg = testutil::table({{0, {0.5, 0.3, 0.2}}}, 0);
  CHECK_THROWS_AS(proposal_ranking_ap(only_bg, 0), DomainError);
}

TEST_CASE("proposal ranking AP is deterministic across runs") {
  auto t = softmax_rows(testutil::random_table(3000, 9, 0, 41, 1.5));
  auto a = proposal_ranking_ap(t, 0);
  auto b = proposal_ranking_ap(t, 0);
  CHECK(a.mean_ap == b.mean_ap);
  for (std::size_t k = 0; k < a.per_class_ap.size(); ++k) {
    std::vector<double> col(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) col[i] = t.row(i)[k + 1];
    CHECK(a.per_class_ap[k] == average_precision(col, t.labels(), static_cast<int>(k + 1)));
  }
}

TEST_CASE("spearman") {
  std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(spearman(a, std::vector<double>{2, 4, 8, 16, 32}) == 1.0);
  CHECK(spearman(a, std::vector<double>{5, 4, 3, 2, 1}) == -1.0);
  CHECK_FALSE(spearman(a, std::vector<double>(5, 1.0)).has_value());
  // ties take the average rank: ranks {1.5, 1.5, 3} vs {1, 2, 3}
  CHECK(*spearman(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 3}) ==
        doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("statistic correlation") {
  auto dist = label_distribution_from_counts({100, 40, 10, 3});
  RunningStats s = RunningStats::empty(5, kDefaultMomentum, kDefaultEps, 0);
  s.mean = {9.0, 4.0, 3.0, 1.0, -2.0};
  s.var = {1.0, 0.5, 2.0, 1.0, 3.0};
  s.count = 1;
  s.initialized = true;
  auto c = statistic_correlation(s, dist);
  CHECK(c.mean == 1.0);
  CHECK(c.var == doctest::Approx(-0.8));

  s.mean = {9.0, 1.0, 1.0, 1.0, 1.0};
  CHECK_FALSE(statistic_correlation(s, dist).mean.has_value());

  auto small = label_distribution_from_counts({10, 3});
  RunningStats t = RunningStats::empty(2);
  t.initialized = true;
  t.count = 1;
  CHECK_THROWS_AS(statistic_correlation(t, small), DomainError);
  CHECK_THROWS_AS(statistic_correlation(RunningStats::empty(5, kDefaultMomentum, kDefaultEps, 0), dist),
                  StateError);
}
