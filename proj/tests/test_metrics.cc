#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "metric_oracles.h"
#include "tgn/metrics.h"

namespace tgn {
namespace {

using testing::oracle_average_precision;
using testing::oracle_roc_auc;

double ap(std::vector<double> s, std::vector<int> y) {
  return average_precision(s, y);
}
double auc(std::vector<double> s, std::vector<int> y) { return roc_auc(s, y); }

TEST(MetricsTest, AveragePrecisionPrefixExample) {
  EXPECT_NEAR(ap({0.9, 0.8, 0.1}, {1, 0, 1}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
}

TEST(MetricsTest, PositivesRankedFirstGiveOne) {
  EXPECT_DOUBLE_EQ(ap({5, 4, 3, 2, 1}, {1, 1, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(auc({5, 4, 3, 2, 1}, {1, 1, 0, 0, 0}), 1.0);
}

TEST(MetricsTest, AucPairwiseExample) {
  EXPECT_DOUBLE_EQ(auc({0.9, 0.4, 0.6, 0.1}, {1, 0, 1, 0}), 1.0);
}

TEST(MetricsTest, ConstantScoresGiveHalfAuc) {
  EXPECT_DOUBLE_EQ(auc({0.3, 0.3, 0.3, 0.3}, {1, 0, 0, 1}), 0.5);
  // One tie group: precision is the positive rate.
  EXPECT_DOUBLE_EQ(ap({0.3, 0.3, 0.3, 0.3}, {1, 0, 0, 0}), 0.25);
}

TEST(MetricsTest, ReversedRankingGivesZeroAuc) {
  EXPECT_DOUBLE_EQ(auc({1, 2, 3}, {1, 0, 0}), 0.0);
  EXPECT_NEAR(ap({1, 2, 3}, {1, 0, 0}), 1.0 / 3.0, 1e-15);
}

TEST(MetricsTest, RejectsUndefinedInputs) {
  EXPECT_THROW(ap({0.1, 0.2}, {0, 0}), std::invalid_argument);
  EXPECT_THROW(auc({0.1, 0.2}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(auc({0.1, 0.2}, {0, 0}), std::invalid_argument);
  EXPECT_THROW(ap({0.1}, {1, 0}), std::invalid_argument);
  EXPECT_THROW(ap({0.1, 0.2}, {1, 2}), std::invalid_argument);
  EXPECT_THROW(ap({}, {}), std::invalid_argument);
}

// Every tie pattern up to length 8, plus shuffled copies to cover item order.
TEST(MetricsTest, MatchesOraclesOnEveryRankingPatternUpToEight) {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int n = 1; n <= 8; ++n) {
    testing::for_each_ranking_pattern(
        n, [&](const std::vector<double>& s, const std::vector<int>& y) {
          const int pos = std::accumulate(y.begin(), y.end(), 0);
          std::vector<std::size_t> perm(s.size());
          std::iota(perm.begin(), perm.end(), std::size_t{0});
          std::shuffle(perm.begin(), perm.end(), rng);
          std::vector<double> ps(s.size());
          std::vector<int> py(s.size());
          for (std::size_t i = 0; i < perm.size(); ++i) {
            ps[i] = s[perm[i]];
            py[i] = y[perm[i]];
          }
          if (pos > 0) {
            const double want = oracle_average_precision(s, y);
            ASSERT_NEAR(average_precision(s, y), want, 1e-12);
            ASSERT_NEAR(average_precision(ps, py), want, 1e-12);
          }
          if (pos > 0 && pos < n) {
            const double want = oracle_roc_auc(s, y);
            ASSERT_NEAR(roc_auc(s, y), want, 1e-12);
            ASSERT_NEAR(roc_auc(ps, py), want, 1e-12);
          }
          ++checked;
        });
  }
  EXPECT_GT(checked, 10000);
}

// Raw enumeration without the pattern argument: every score tuple over
// {0..n-1} with every labeling.
TEST(MetricsTest, MatchesOraclesOnAllSmallScoreTuples) {
  for (int n = 1; n <= 5; ++n) {
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    while (true) {
      std::vector<double> s(digits.begin(), digits.end());
      for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (mask >> i) & 1;
        ASSERT_NEAR(average_precision(s, y), oracle_average_precision(s, y), 1e-12);
        if (mask != (1 << n) - 1) {
          ASSERT_NEAR(roc_auc(s, y), oracle_roc_auc(s, y), 1e-12);
        }
      }
      int i = 0;
      while (i < n && ++digits[static_cast<std::size_t>(i)] == n) {
        digits[static_cast<std::size_t>(i)] = 0;
        ++i;
      }
      if (i == n) break;
    }
  }
}

TEST(MetricsTest, StaysInUnitIntervalOnRandomLists) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 50;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(u(rng) * 10.0) / 10.0;
      y[i] = u(rng) < 0.5;
    }
    y[0] = 1;
    y[1] = 0;
    const double a = average_precision(s, y);
    const double r = roc_auc(s, y);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    EXPECT_NEAR(a, oracle_average_precision(s, y), 1e-12);
    EXPECT_NEAR(r, oracle_roc_auc(s, y), 1e-12);
  }
}

}  // namespace
}  // namespace tgn
