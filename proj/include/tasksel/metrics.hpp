#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tasksel/errors.hpp"

namespace tasksel {

enum class TransferLabel : int { positive = 1, negative = 0 };

namespace detail {

inline void check_paired(std::span<const double> a, std::span<const double> b,
                         const char* who) {
  if (a.size() != b.size())
    throw invalid_parameter_error(std::string(who) + ": length mismatch (" +
                                  std::to_string(a.size()) + " vs " +
                                  std::to_string(b.size()) + ")");
  for (double x : a)
    if (!std::isfinite(x))
      throw invalid_parameter_error(std::string(who) + ": non-finite value");
  for (double x : b)
    if (!std::isfinite(x))
      throw invalid_parameter_error(std::string(who) + ": non-finite value");
}

/// Fractional ranks (1-based), ties get the average rank of their run.
inline std::vector<double> fractional_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace detail

/// Spearman rank correlation with average-tie ranks. Throws
/// undefined_correlation_error when either side is constant or there are
/// fewer than two points.
inline double spearman(std::span<const double> predicted,
                       std::span<const double> actual) {
  detail::check_paired(predicted, actual, "spearman");
  const std::size_t n = predicted.size();
  if (n < 2)
    throw undefined_correlation_error("spearman: need at least 2 points, got " +
                                      std::to_string(n));
  const std::vector<double> rp = detail::fractional_ranks(predicted);
  const std::vector<double> ra = detail::fractional_ranks(actual);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rp[i] - mean;
    const double dy = ra[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw undefined_correlation_error("spearman: undefined for a constant series");
  return sxy / std::sqrt(sxx * syy);
}

/// F1 of the minority class. The minority class is the less frequent label in
/// true_labels; a tie counts positive as the minority. Zero true positives
/// give F1 = 0.
inline double f1_minority(std::span<const TransferLabel> predicted,
                          std::span<const TransferLabel> actual) {
  if (predicted.size() != actual.size())
    throw invalid_parameter_error("f1_minority: length mismatch (" +
                                  std::to_string(predicted.size()) + " vs " +
                                  std::to_string(actual.size()) + ")");
  if (actual.empty())
    throw invalid_parameter_error("f1_minority: empty label set");
  std::int64_t pos = 0;
  for (TransferLabel l : actual)
    if (l == TransferLabel::positive) ++pos;
  const std::int64_t neg = static_cast<std::int64_t>(actual.size()) - pos;
  const TransferLabel minority =
      (pos <= neg) ? TransferLabel::positive : TransferLabel::negative;
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const bool p = predicted[i] == minority;
    const bool a = actual[i] == minority;
    tp += p && a;
    fp += p && !a;
    fn += !p && a;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

/// Mean squared error between paired series.
inline double mse(std::span<const double> predicted, std::span<const double> actual) {
  detail::check_paired(predicted, actual, "mse");
  if (predicted.empty())
    throw invalid_parameter_error("mse: empty series");
  double s = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    s += d * d;
  }
  return s / static_cast<double>(predicted.size());
}

}  // namespace tasksel
