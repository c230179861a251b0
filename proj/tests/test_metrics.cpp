#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "tasksel/errors.hpp"
#include "tasksel/metrics.hpp"

using namespace tasksel;

TEST(Spearman, PerfectAndReversedRankings) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(spearman(x, x), 1.0);
  const std::vector<double> rev{3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(x, rev), -1.0);
}

TEST(Spearman, SingleSwappedPair) {
  // d^2 = 0 + 1 + 1 over n = 3: 1 - 6*2/(3*8) = 0.5
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{1, 3, 2};
  EXPECT_DOUBLE_EQ(spearman(a, b), 0.5);
}

TEST(Spearman, AverageRanksForTies) {
  // x ranks (1.5, 1.5, 3), y ranks (1, 2, 3): correlation sqrt(3)/2
  const std::vector<double> x{1, 1, 2};
  const std::vector<double> y{1, 2, 3};
  EXPECT_NEAR(spearman(x, y), std::sqrt(3.0) / 2.0, 1e-15);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  const std::vector<double> x{0.3, -1.2, 2.5, 0.9, 0.1};
  const std::vector<double> y{1.0, 0.4, 0.6, 2.2, -0.5};
  std::vector<double> ex(x.size()), cubey(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ex[i] = std::exp(x[i]);
    cubey[i] = y[i] * y[i] * y[i];
  }
  EXPECT_DOUBLE_EQ(spearman(x, y), spearman(ex, cubey));
}

TEST(Spearman, UndefinedCases) {
  const std::vector<double> constant{2, 2, 2};
  const std::vector<double> varying{1, 2, 3};
  EXPECT_THROW(spearman(constant, varying), undefined_correlation_error);
  EXPECT_THROW(spearman(varying, constant), undefined_correlation_error);
  const std::vector<double> one{1};
  EXPECT_THROW(spearman(one, one), undefined_correlation_error);
  const std::vector<double> empty;
  EXPECT_THROW(spearman(empty, empty), undefined_correlation_error);
}

TEST(Spearman, RejectsBadInput) {
  const std::vector<double> x{1, 2};
  const std::vector<double> y{1, 2, 3};
  EXPECT_THROW(spearman(x, y), invalid_parameter_error);
  const std::vector<double> with_nan{1, std::nan("")};
  const std::vector<double> fine{1, 2};
  EXPECT_THROW(spearman(with_nan, fine), invalid_parameter_error);
}

namespace {
constexpr TransferLabel P = TransferLabel::positive;
constexpr TransferLabel N = TransferLabel::negative;
}  // namespace

TEST(F1Minority, PerfectPrediction) {
  const std::vector<TransferLabel> labels{P, N, N, P};
  EXPECT_DOUBLE_EQ(f1_minority(labels, labels), 1.0);
}

TEST(F1Minority, ConfusionMatrixArithmetic) {
  // minority = positive; tp=1, fp=1, fn=0: precision 1/2, recall 1, F1 2/3
  const std::vector<TransferLabel> actual{P, N, N, N};
  const std::vector<TransferLabel> predicted{P, P, N, N};
  EXPECT_DOUBLE_EQ(f1_minority(predicted, actual), 2.0 / 3.0);
}

TEST(F1Minority, MinorityNeverPredictedGivesZero) {
  const std::vector<TransferLabel> actual{P, N, N, N};
  const std::vector<TransferLabel> predicted{N, N, N, N};
  EXPECT_DOUBLE_EQ(f1_minority(predicted, actual), 0.0);
}

TEST(F1Minority, TieCountsPositiveAsMinority) {
  // two of each: scoring follows the positive class
  const std::vector<TransferLabel> actual{P, P, N, N};
  const std::vector<TransferLabel> predicted{P, N, N, N};
  // tp=1, fp=0, fn=1: precision 1, recall 1/2, F1 2/3
  EXPECT_DOUBLE_EQ(f1_minority(predicted, actual), 2.0 / 3.0);
}

TEST(F1Minority, NegativeMinority) {
  const std::vector<TransferLabel> actual{P, P, P, N};
  const std::vector<TransferLabel> predicted{P, P, N, N};
  // minority = negative; tp=1, fp=1, fn=0: F1 2/3
  EXPECT_DOUBLE_EQ(f1_minority(predicted, actual), 2.0 / 3.0);
}

TEST(F1Minority, RejectsBadInput) {
  const std::vector<TransferLabel> two{P, N};
  const std::vector<TransferLabel> three{P, N, N};
  EXPECT_THROW(f1_minority(two, three), invalid_parameter_error);
  const std::vector<TransferLabel> empty;
  EXPECT_THROW(f1_minority(empty, empty), invalid_parameter_error);
}

TEST(Mse, KnownValues) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_DOUBLE_EQ(mse(a, a), 0.0);
  const std::vector<double> zeros{0, 0};
  const std::vector<double> ones{1, 1};
  EXPECT_DOUBLE_EQ(mse(zeros, ones), 1.0);
  const std::vector<double> x{1, 2};
  const std::vector<double> y{2, 4};
  EXPECT_DOUBLE_EQ(mse(x, y), 2.5);
}

TEST(Mse, RejectsBadInput) {
  const std::vector<double> x{1, 2};
  const std::vector<double> y{1};
  EXPECT_THROW(mse(x, y), invalid_parameter_error);
  const std::vector<double> empty;
  EXPECT_THROW(mse(empty, empty), invalid_parameter_error);
  const std::vector<double> inf{1, std::numeric_limits<double>::infinity()};
  const std::vector<double> fine{1, 2};
  EXPECT_THROW(mse(inf, fine), invalid_parameter_error);
}
