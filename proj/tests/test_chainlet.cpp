#include "chainrisk/chainlet.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

using namespace chainrisk;

namespace {

TxRecord tx(std::int64_t in, std::int64_t out, std::int64_t amount) { return {1420070400, in, out, amount}; }

const Date kDay = parse_date("2015-01-01");

std::vector<TxRecord> random_txs(std::size_t n, std::uint64_t seed, int max_count = 30) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, max_count);
  std::uniform_int_distribution<std::int64_t> amount(0, 5'000'000'000LL);
  std::vector<TxRecord> txs;
  for (std::size_t i = 0; i < n; ++i) txs.push_back(tx(count(rng), count(rng), amount(rng)));
  return txs;
}

// Single pass over raw transactions using only the set definitions.
ExtremeFeatureRow brute_force_features(const std::vector<TxRecord>& txs, int N, double price) {
  double left_sat = 0, right_sat = 0, total_sat = 0;
  std::int64_t left = 0, right = 0;
  for (const auto& t : txs) {
    const bool is_left = t.n_inputs >= N;
    const bool is_right = !is_left && t.n_outputs >= N;
    total_sat += static_cast<double>(t.amount);
    if (is_left) {
      ++left;
      left_sat += static_cast<double>(t.amount);
    }
    if (is_right) {
      ++right;
      right_sat += static_cast<double>(t.amount);
    }
  }
  ExtremeFeatureRow r;
  r.O_l = left;
  r.O_r = right;
  r.A_l = left_sat * price / 1e8;
  r.A_r = right_sat * price / 1e8;
  r.O_x = txs.empty() ? 0.0 : static_cast<double>(left + right) / static_cast<double>(txs.size());
  r.A_x = total_sat == 0 ? 0.0 : (left_sat + right_sat) / total_sat;
  return r;
}

} // namespace

TEST(Classify, PaperExamples) {
  EXPECT_EQ(classify(tx(3, 1, 0), 20), (ChainletClass{3, 1}));
  EXPECT_EQ(classify(tx(25, 2, 0), 20), (ChainletClass{20, 2}));
  EXPECT_EQ(classify(tx(1, 1, 0), 20), (ChainletClass{1, 1}));
  EXPECT_EQ(classify(tx(2, 400, 0), 20), (ChainletClass{2, 20}));
}

TEST(Classify, Errors) {
  EXPECT_THROW(classify(tx(0, 1, 0), 20), ClassificationError);
  EXPECT_THROW(classify(tx(1, 0, 0), 20), ClassificationError);
  EXPECT_THROW(classify(tx(1, 1, 0), 1), ClassificationError);
}

TEST(Classify, ClampingIsMonotoneAndSaturates) {
  for (int N : {2, 5, 20}) {
    int prev = 0;
    for (int in = 1; in <= 3 * N; ++in) {
      const int i = classify(tx(in, 1, 0), N).i;
      EXPECT_GE(i, prev);
      EXPECT_LE(i, N);
      prev = i;
    }
    EXPECT_EQ(prev, N);
  }
}

TEST(BuildMatrix, EmptyAndSingle) {
  const auto empty = build_matrix(kDay, {}, 20);
  EXPECT_EQ(empty.total_occurrences(), 0);
  EXPECT_EQ(empty.total_amount(), 0);
  EXPECT_EQ(empty.dim(), 20);

  const std::vector<TxRecord> one{tx(3, 1, 150000)};
  const auto m = build_matrix(kDay, one, 20);
  EXPECT_EQ(m.occurrence(3, 1), 1);
  EXPECT_EQ(m.amount(3, 1), 150000);
  EXPECT_EQ(m.total_occurrences(), 1);
  EXPECT_EQ(m.total_amount(), 150000);
}

TEST(BuildMatrix, MatchesPerTransactionTallies) {
  const auto txs = random_txs(100, 11);
  const int N = 20;
  const auto m = build_matrix(kDay, txs, N);
  std::vector<std::int64_t> occ(N * N, 0), amo(N * N, 0);
  std::int64_t sat = 0;
  for (const auto& t : txs) {
    const auto i = std::min<std::int64_t>(t.n_inputs, N), j = std::min<std::int64_t>(t.n_outputs, N);
    occ[(i - 1) * N + (j - 1)] += 1;
    amo[(i - 1) * N + (j - 1)] += t.amount;
    sat += t.amount;
  }
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j) {
      EXPECT_EQ(m.occurrence(i, j), occ[(i - 1) * N + (j - 1)]);
      EXPECT_EQ(m.amount(i, j), amo[(i - 1) * N + (j - 1)]);
    }
  EXPECT_EQ(m.total_occurrences(), 100);
  EXPECT_EQ(m.total_amount(), sat);
}

TEST(ExtremeSets, Cardinalities) {
  const auto s = extreme_sets(20);
  EXPECT_EQ(s.left.size(), 20u);
  EXPECT_EQ(s.right.size(), 19u);
  const std::set<ChainletClass> l(s.left.begin(), s.left.end()), r(s.right.begin(), s.right.end());
  EXPECT_TRUE(l.contains({20, 20}));
  EXPECT_FALSE(r.contains({20, 20}));
  std::set<ChainletClass> u = l;
  u.insert(r.begin(), r.end());
  EXPECT_EQ(u.size(), 39u);
}

TEST(ExtremeSets, SmallestCase) {
  const auto s = extreme_sets(2);
  EXPECT_EQ(s.left, (std::vector<ChainletClass>{{2, 1}, {2, 2}}));
  EXPECT_EQ(s.right, (std::vector<ChainletClass>{{1, 2}}));
}

TEST(ExtremeSets, PartitionOfCells) {
  for (int N : {2, 3, 20}) {
    const auto s = extreme_sets(N);
    const std::set<ChainletClass> l(s.left.begin(), s.left.end()), r(s.right.begin(), s.right.end());
    for (int i = 1; i <= N; ++i)
      for (int j = 1; j <= N; ++j) {
        const ChainletClass c{i, j};
        const int memberships = int(l.contains(c)) + int(r.contains(c));
        EXPECT_LE(memberships, 1);
        const auto kind = extreme_kind(c, N);
        EXPECT_EQ(kind == ExtremeKind::Left, l.contains(c));
        EXPECT_EQ(kind == ExtremeKind::Right, r.contains(c));
      }
  }
}

TEST(ExtremeFeatures, AmountRatioWorkedExample) {
  ChainletMatrix m(kDay, 20);
  m.add({20, 3}, 200'000);
  m.add({2, 2}, 1'800'000);
  const auto f = extreme_features(m, 400.0);
  EXPECT_EQ(f.A_x, 0.1);
  EXPECT_DOUBLE_EQ(f.A_l, 200'000 * 400.0 / 1e8);
  EXPECT_EQ(f.O_l, 1);
  EXPECT_EQ(f.O_r, 0);
  EXPECT_DOUBLE_EQ(f.O_x, 0.5);
}

TEST(ExtremeFeatures, NoExtremeMass) {
  ChainletMatrix m(kDay, 20);
  m.add({1, 1}, 10);
  m.add({19, 19}, 10);
  const auto f = extreme_features(m, 1000.0);
  EXPECT_EQ(f.A_x, 0.0);
  EXPECT_EQ(f.O_x, 0.0);
  EXPECT_EQ(f.A_l, 0.0);
  EXPECT_EQ(f.A_r, 0.0);
}

TEST(ExtremeFeatures, ZeroActivityDay) {
  const auto f = extreme_features(ChainletMatrix(kDay, 20), 100.0);
  EXPECT_EQ(f.A_x, 0.0);
  EXPECT_EQ(f.O_x, 0.0);
  ChainletMatrix zero_amount(kDay, 20);
  zero_amount.add({20, 1}, 0);
  const auto g = extreme_features(zero_amount, 100.0);
  EXPECT_EQ(g.A_x, 0.0);
  EXPECT_EQ(g.O_x, 1.0);
}

TEST(ExtremeFeatures, RandomFiveByFiveMatchesDoubleLoop) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> occ(0, 50), sat(1, 1'000'000);
  const int N = 5;
  DatedGrid o{kDay, N, {}}, a{kDay, N, {}};
  for (int c = 0; c < N * N; ++c) {
    const auto k = occ(rng);
    o.values.push_back(k);
    a.values.push_back(k == 0 ? 0 : k * sat(rng));
  }
  const auto m = ChainletMatrix::from_grids(o, a);
  const double price = 321.5;
  const auto f = extreme_features(m, price);
  double ol = 0, orr = 0, al = 0, ar = 0, tot_o = 0, tot_a = 0;
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j) {
      tot_o += double(o.at(i, j));
      tot_a += double(a.at(i, j));
      if (i == N) {
        ol += double(o.at(i, j));
        al += double(a.at(i, j));
      } else if (j == N) {
        orr += double(o.at(i, j));
        ar += double(a.at(i, j));
      }
    }
  EXPECT_EQ(double(f.O_l), ol);
  EXPECT_EQ(double(f.O_r), orr);
  EXPECT_NEAR(f.A_l, al * price / 1e8, 1e-9 * std::max(1.0, f.A_l));
  EXPECT_NEAR(f.A_r, ar * price / 1e8, 1e-9 * std::max(1.0, f.A_r));
  EXPECT_NEAR(f.O_x, (ol + orr) / tot_o, 1e-15);
  EXPECT_NEAR(f.A_x, (al + ar) / tot_a, 1e-15);
}

TEST(ExtremeFeatures, EquivalentToSinglePassOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto txs = random_txs(1000, seed, 25);
    const auto m = build_matrix(kDay, txs, 20);
    const auto f = extreme_features(m, 987.25);
    const auto g = brute_force_features(txs, 20, 987.25);
    EXPECT_EQ(f.O_l, g.O_l);
    EXPECT_EQ(f.O_r, g.O_r);
    EXPECT_NEAR(f.O_x, g.O_x, 1e-15);
    EXPECT_NEAR(f.A_x, g.A_x, 1e-12);
    EXPECT_NEAR(f.A_l, g.A_l, 1e-9 * std::max(1.0, g.A_l));
    EXPECT_NEAR(f.A_r, g.A_r, 1e-9 * std::max(1.0, g.A_r));
    EXPECT_GE(f.A_x, 0.0);
    EXPECT_LE(f.A_x, 1.0);
    EXPECT_GE(f.O_x, 0.0);
    EXPECT_LE(f.O_x, 1.0);
  }
}

TEST(ExtremeFeatures, ScaleInvariance) {
  auto txs = random_txs(300, 3, 25);
  for (auto& t : txs) t.amount = t.amount / 1000;
  const auto f = extreme_features(build_matrix(kDay, txs, 20), 500.0);
  for (auto& t : txs) t.amount *= 7;
  const auto g = extreme_features(build_matrix(kDay, txs, 20), 500.0);
  EXPECT_NEAR(g.A_x, f.A_x, 1e-14);
  EXPECT_EQ(g.O_x, f.O_x);
  EXPECT_NEAR(g.A_l, 7 * f.A_l, 1e-9 * g.A_l);
  EXPECT_NEAR(g.A_r, 7 * f.A_r, 1e-9 * g.A_r);
}

TEST(Matrix, FromGridsValidatesZeroImpliesZero) {
  DatedGrid o{kDay, 2, {0, 1, 0, 0}}, a{kDay, 2, {5, 1, 0, 0}};
  EXPECT_THROW(ChainletMatrix::from_grids(o, a), ValidationError);
  DatedGrid b{kDay + std::chrono::days{1}, 2, {0, 1, 0, 0}};
  EXPECT_THROW(ChainletMatrix::from_grids(o, b), std::exception);
}

TEST(FeatureSeries, DatesPreservedAndOrdered) {
  std::vector<ChainletMatrix> ms;
  PriceSeries prices;
  for (int d = 2; d >= 0; --d) {
    ChainletMatrix m(kDay + std::chrono::days{d}, 20);
    m.add({20, 1}, 100);
    m.add({1, 1}, 100);
    ms.push_back(m);
  }
  for (int d = 0; d < 3; ++d) {
    prices.dates.push_back(kDay + std::chrono::days{d});
    prices.close.push_back(100.0);
  }
  const auto rows = feature_series(ms, prices);
  ASSERT_EQ(rows.size(), 3u);
  for (int d = 0; d < 3; ++d) {
    EXPECT_EQ(rows[d].date, kDay + std::chrono::days{d});
    EXPECT_EQ(rows[d].A_x, 0.5);
    EXPECT_EQ(rows[d].A_l, rows[0].A_l);
  }
}

TEST(FeatureSeries, MissingPriceNamesDate) {
  std::vector<ChainletMatrix> ms{ChainletMatrix(kDay, 20), ChainletMatrix(kDay + std::chrono::days{1}, 20)};
  PriceSeries prices;
  prices.dates = {kDay};
  prices.close = {100.0};
  try {
    feature_series(ms, prices);
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    ASSERT_EQ(e.missing().size(), 1u);
    EXPECT_EQ(e.missing()[0], kDay + std::chrono::days{1});
    EXPECT_NE(std::string(e.what()).find("2015-01-02"), std::string::npos);
  }
}

TEST(FeatureCsv, RoundTripAtFullPrecision) {
  ExtremeFeatureRow r{kDay, 1.0 / 3.0, 2.5e7, 0.123456789012345678, 17, 3, 0.2};
  std::ostringstream out;
  write_feature_csv(out, std::vector<ExtremeFeatureRow>{r});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "date,A_l,A_r,A_x,O_l,O_r,O_x");
  std::istringstream in(out.str());
  const auto back = load_feature_csv(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].date, r.date);
  EXPECT_EQ(back[0].A_l, r.A_l);
  EXPECT_EQ(back[0].A_r, r.A_r);
  EXPECT_EQ(back[0].A_x, r.A_x);
  EXPECT_EQ(back[0].O_l, r.O_l);
  EXPECT_EQ(back[0].O_r, r.O_r);
  EXPECT_EQ(back[0].O_x, r.O_x);
}

TEST(Threshold, PercentileHelper) {
  std::vector<TxRecord> txs;
  for (int k = 1; k <= 100; ++k) txs.push_back(tx(k, 1, 1));
  EXPECT_DOUBLE_EQ(threshold_percentile(txs, 20), 0.19);
  EXPECT_DOUBLE_EQ(threshold_percentile(txs, 101), 1.0);
  EXPECT_EQ(threshold_for_percentile(txs, 0.19), 20);
  EXPECT_GE(threshold_percentile(txs, threshold_for_percentile(txs, 0.975)), 0.975);
}
