#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/metrics.hpp"
#include "tasksel/parallel.hpp"

namespace tasksel {

namespace detail {
inline std::string fmt_gamma(double g) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%g", g);
  return std::string(buf, static_cast<std::size_t>(len));
}
}  // namespace detail
using detail::fmt_gamma;

/// Tasks whose score is strictly below gamma. Scores come out of the fitted
/// surrogate: lower means the task helps the target more.
inline Subset select_tasks(const Eigen::VectorXd& scores, double gamma) {
  if (!std::isfinite(gamma))
    throw invalid_parameter_error("select_tasks: gamma must be finite");
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (!std::isfinite(scores[i]))
      throw invalid_parameter_error("select_tasks: non-finite score at task " +
                                    std::to_string(i + 1));
  std::vector<TaskId> picked;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores[i] < gamma) picked.push_back(static_cast<TaskId>(i + 1));
  return Subset(std::move(picked));
}

/// The canonical threshold grid: -0.5 to 0.5 in steps of 0.1.
inline std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  g.reserve(11);
  for (int i = -5; i <= 5; ++i) g.push_back(static_cast<double>(i) / 10.0);
  return g;
}

struct GridSearchResult {
  double gamma = 0.0;
  Subset selected;
  double value = 0.0;            // evaluate(selected)
  std::int64_t evaluations = 0;  // distinct subsets actually evaluated
};

/// Evaluates each distinct subset induced by the grid thresholds and returns
/// the minimizer. Duplicate-inducing thresholds are evaluated once. Ties are
/// broken toward fewer selected tasks, then toward the smaller gamma; the
/// returned gamma is the smallest grid point inducing the winning subset.
inline GridSearchResult grid_search_gamma(
    const Eigen::VectorXd& scores,
    const std::function<double(const Subset&)>& evaluate,
    const std::vector<double>& grid, int workers = 1) {
  if (grid.empty())
    throw invalid_parameter_error("grid_search_gamma: empty grid");
  if (!evaluate)
    throw invalid_parameter_error("grid_search_gamma: evaluate is empty");

  // distinct induced subsets, each with the smallest gamma that induces it
  std::map<Subset, double> first_gamma;
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  for (double g : sorted_grid) {
    Subset s = select_tasks(scores, g);
    first_gamma.emplace(s, g);  // keeps the first (smallest) gamma
  }

  std::vector<std::pair<Subset, double>> candidates(first_gamma.begin(),
                                                    first_gamma.end());
  std::vector<double> values(candidates.size());
  std::vector<std::exception_ptr> failures(candidates.size());
  parallel_for(static_cast<std::int64_t>(candidates.size()), workers,
               [&](std::int64_t i) {
                 const auto idx = static_cast<std::size_t>(i);
                 try {
                   values[idx] = evaluate(candidates[idx].first);
                 } catch (...) {
                   failures[idx] = std::current_exception();
                 }
               });
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!failures[i]) continue;
    // surface the gamma while keeping the original error nested for callers
    // that map failure kinds
    try {
      std::rethrow_exception(failures[i]);
    } catch (const std::exception& e) {
      std::throw_with_nested(
          evaluation_error("grid_search_gamma: evaluate failed at gamma=" +
                               fmt_gamma(candidates[i].second) + ": " + e.what(),
                           candidates[i].second));
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const bool better =
        values[i] < values[best] ||
        (values[i] == values[best] &&
         (candidates[i].first.size() < candidates[best].first.size() ||
          (candidates[i].first.size() == candidates[best].first.size() &&
           candidates[i].second < candidates[best].second)));
    if (better) best = i;
  }
  GridSearchResult r;
  r.gamma = candidates[best].second;
  r.selected = candidates[best].first;
  r.value = values[best];
  r.evaluations = static_cast<std::int64_t>(candidates.size());
  return r;
}

/// A source task (or subset) transfers positively iff training with it beats
/// the target-only baseline: value strictly below stl_value.
inline TransferLabel classify_transfer(double value, double stl_value) {
  if (!std::isfinite(value) || !std::isfinite(stl_value))
    throw invalid_parameter_error("classify_transfer: non-finite input");
  return value < stl_value ? TransferLabel::positive : TransferLabel::negative;
}

}  // namespace tasksel
