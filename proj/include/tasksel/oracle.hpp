#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/parallel.hpp"
#include "tasksel/surrogate.hpp"
#include "tasksel/synthworld.hpp"

namespace tasksel {

/// Brute-force subset enumeration refuses beyond this many evaluations.
inline constexpr std::uint64_t kExhaustiveGuard = std::uint64_t{1} << 22;
/// Population-surrogate enumeration refuses beyond this many evaluations.
inline constexpr std::uint64_t kPopulationGuard = 200000;

struct ExhaustiveReport {
  Subset best;
  double best_value = 0.0;
  double stl_value = 0.0;   // evaluate of the empty subset
  double full_value = 0.0;  // evaluate of the full task set
  // every enumerated subset with its value, sizes ascending, lexicographic
  // within a size
  std::vector<std::pair<Subset, double>> table;
};

namespace detail {

inline std::uint64_t enumeration_count(int k, int max_alpha) {
  std::uint64_t total = 0;
  for (int a = 0; a <= max_alpha; ++a) {
    std::uint64_t c;
    try {
      c = binomial(k, a);
    } catch (const invalid_parameter_error&) {
      return std::numeric_limits<std::uint64_t>::max();  // overflow: way past any guard
    }
    if (total > std::numeric_limits<std::uint64_t>::max() - c)
      return std::numeric_limits<std::uint64_t>::max();
    total += c;
  }
  return total;
}

}  // namespace detail

/// Evaluates every subset of {1..k} with size <= max_alpha (default: all
/// sizes) and returns the best, the target-only value, and the full-set
/// value. Refuses with a size estimate when the enumeration would exceed
/// 2^22 evaluations. The first minimizer in enumeration order wins ties.
inline ExhaustiveReport exhaustive_search(
    const std::function<double(const Subset&)>& evaluate, int k,
    int max_alpha = -1, int workers = 1) {
  if (!evaluate) throw invalid_parameter_error("exhaustive_search: evaluate is empty");
  if (k < 0) throw invalid_parameter_error("exhaustive_search: k must be >= 0");
  if (max_alpha < 0 || max_alpha > k) max_alpha = k;
  const std::uint64_t total = detail::enumeration_count(k, max_alpha);
  if (total > kExhaustiveGuard)
    throw invalid_parameter_error(
        "exhaustive_search: enumeration of " +
        (total == std::numeric_limits<std::uint64_t>::max()
             ? std::string("more than 2^64")
             : std::to_string(total)) +
        " subsets exceeds the guard of " + std::to_string(kExhaustiveGuard));

  std::vector<Subset> scope;
  scope.reserve(static_cast<std::size_t>(total));
  for (int a = 0; a <= max_alpha; ++a) {
    auto level = enumerate_all_subsets(k, a);
    for (auto& s : level) scope.push_back(std::move(s));
  }

  ExhaustiveReport r;
  r.table.resize(scope.size());
  parallel_for(static_cast<std::int64_t>(scope.size()), workers, [&](std::int64_t i) {
    const auto idx = static_cast<std::size_t>(i);
    r.table[idx] = {scope[idx], evaluate(scope[idx])};
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < r.table.size(); ++i)
    if (r.table[i].second < r.table[best].second) best = i;
  r.best = r.table[best].first;
  r.best_value = r.table[best].second;
  r.stl_value = r.table.front().second;  // size-0 subset enumerates first

  if (max_alpha == k) {
    r.full_value = r.table.back().second;
  } else {
    std::vector<TaskId> all(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) all[static_cast<std::size_t>(i)] = i + 1;
    r.full_value = evaluate(Subset(std::move(all)));
  }
  return r;
}

/// theta* of the population least-squares problem: the covariance inverse
/// applied to the exact per-task mean of f over all alpha-subsets containing
/// the task. Exact up to rounding because the enumeration average IS the
/// expectation under uniform sampling.
inline Eigen::VectorXd population_theta(
    const std::function<double(const Subset&)>& evaluate, int k, int alpha,
    int workers = 1) {
  if (!evaluate) throw invalid_parameter_error("population_theta: evaluate is empty");
  detail::check_k_alpha(k, alpha);
  const std::uint64_t count = binomial(k, alpha);
  if (count > kPopulationGuard)
    throw invalid_parameter_error("population_theta: C(" + std::to_string(k) + "," +
                                  std::to_string(alpha) + ") = " +
                                  std::to_string(count) + " exceeds the guard of " +
                                  std::to_string(kPopulationGuard));
  const auto coeffs = population_covariance_inverse_coefficients(k, alpha);

  const std::vector<Subset> all = enumerate_all_subsets(k, alpha);
  std::vector<double> values(all.size());
  parallel_for(static_cast<std::int64_t>(all.size()), workers,
               [&](std::int64_t i) {
                 values[static_cast<std::size_t>(i)] =
                     evaluate(all[static_cast<std::size_t>(i)]);
               });

  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (TaskId t : all[i].members()) b[t - 1] += values[i];
  b /= static_cast<double>(count);

  const double total = b.sum();
  Eigen::VectorXd theta(k);
  for (int i = 0; i < k; ++i)
    theta[i] = coeffs.identity_coeff * b[i] + coeffs.rank_one_coeff * total;
  return theta;
}

/// Largest deviation, over task pairs, between the fitted score gap
/// theta_i - theta_j and its closed-form finite-sample estimate
/// c1 * (v_i - v_j) / n, where c1 is the identity coefficient of the
/// covariance inverse. Zero (to rounding) when the design enumerates all
/// alpha-subsets an equal number of times; shrinks as O(n^-1/2) under
/// uniform sampling.
inline double gap_lemma_residual(const SurrogateModel& model,
                                 const DesignMatrix& design,
                                 std::span<const double> values) {
  if (model.k != design.cols)
    throw invalid_parameter_error("gap_lemma_residual: model k does not match design");
  if (model.alpha < 1)
    throw invalid_parameter_error(
        "gap_lemma_residual: design rows must share one subset size");
  if (model.alpha >= model.k)
    throw invalid_parameter_error("gap_lemma_residual: needs alpha < k");
  const auto coeffs =
      population_covariance_inverse_coefficients(model.k, model.alpha);
  const Eigen::VectorXd v = task_vector(design, values);
  const double scale = coeffs.identity_coeff / static_cast<double>(design.rows);
  double worst = 0.0;
  for (int i = 0; i < model.k; ++i)
    for (int j = i + 1; j < model.k; ++j) {
      const double gap_fit = model.theta[i] - model.theta[j];
      const double gap_closed = scale * (v[i] - v[j]);
      worst = std::max(worst, std::abs(gap_fit - gap_closed));
    }
  return worst;
}

struct SeparationResult {
  bool separated = false;
  bool vacuous = false;   // no good tasks or no bad tasks to compare
  double margin = 0.0;    // min bad score - max good score
  double max_good = 0.0;
  double min_bad = 0.0;
};

/// Checks that every good task scores strictly below every bad task under the
/// fitted surrogate.
inline SeparationResult separation_check(const SyntheticWorld& world,
                                         const SurrogateModel& model) {
  if (model.k != world.params.k)
    throw invalid_parameter_error("separation_check: model k " +
                                  std::to_string(model.k) + " does not match world k " +
                                  std::to_string(world.params.k));
  SeparationResult r;
  double max_good = -std::numeric_limits<double>::infinity();
  double min_bad = std::numeric_limits<double>::infinity();
  int goods = 0, bads = 0;
  for (int i = 1; i <= model.k; ++i) {
    const double s = model.theta[i - 1];
    if (world.is_good(i)) {
      ++goods;
      max_good = std::max(max_good, s);
    } else {
      ++bads;
      min_bad = std::min(min_bad, s);
    }
  }
  if (goods == 0 || bads == 0) {
    r.vacuous = true;
    r.separated = true;
    r.margin = std::numeric_limits<double>::quiet_NaN();
    r.max_good = goods ? max_good : std::numeric_limits<double>::quiet_NaN();
    r.min_bad = bads ? min_bad : std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.max_good = max_good;
  r.min_bad = min_bad;
  r.margin = min_bad - max_good;
  r.separated = max_good < min_bad;
  return r;
}

}  // namespace tasksel
