#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/metrics.hpp"
#include "tasksel/parallel.hpp"

namespace tasksel {

/// Additive set-function surrogate: g(S) = sum of theta over the members of S.
struct SurrogateModel {
  int k = 0;
  int alpha = 0;  // uniform subset size of the training rows; 0 if mixed
  std::int64_t n = 0;
  std::uint64_t seed = 0;  // provenance: sampling seed of the training design
  double train_mse = 0.0;
  double condition = 0.0;  // eigenvalue ratio of the normal-equations matrix
  Eigen::VectorXd theta;
};

struct FitOptions {
  double ridge = 0.0;      // >= 0; added to the normal-equations diagonal
  std::uint64_t seed = 0;  // recorded in the model, not used numerically
  int workers = 1;
};

struct HoldoutDiagnostics {
  double holdout_mse = 0.0;
  double spearman_rho = 0.0;
  bool spearman_defined = false;
};

namespace detail {

// Accumulation runs over fixed-size row blocks. Block partials are reduced in
// block order, so results are bit-identical for any worker count.
inline constexpr std::int64_t kFitBlock = 8192;

inline void check_fit_inputs(const DesignMatrix& design,
                             std::span<const double> values) {
  if (design.rows < 1)
    throw invalid_parameter_error("fit: design has no rows");
  if (design.cols < 1)
    throw invalid_parameter_error("fit: design has no columns");
  if (static_cast<std::int64_t>(values.size()) != design.rows)
    throw invalid_parameter_error(
        "fit: values length " + std::to_string(values.size()) +
        " does not match design rows " + std::to_string(design.rows));
  for (double v : values)
    if (!std::isfinite(v))
      throw invalid_parameter_error("fit: non-finite performance value");
}

/// v = I^T f accumulated per block, blocks combined in index order.
inline Eigen::VectorXd accumulate_task_vector(const DesignMatrix& design,
                                              std::span<const double> values,
                                              int workers) {
  const std::int64_t nblocks = (design.rows + kFitBlock - 1) / kFitBlock;
  std::vector<Eigen::VectorXd> partial(
      static_cast<std::size_t>(nblocks),
      Eigen::VectorXd::Zero(design.cols));
  parallel_for(nblocks, workers, [&](std::int64_t b) {
    Eigen::VectorXd& acc = partial[static_cast<std::size_t>(b)];
    const std::int64_t lo = b * kFitBlock;
    const std::int64_t hi = std::min(design.rows, lo + kFitBlock);
    for (std::int64_t i = lo; i < hi; ++i)
      for (TaskId t : design.row_members[static_cast<std::size_t>(i)])
        acc[t - 1] += values[static_cast<std::size_t>(i)];
  });
  Eigen::VectorXd v = Eigen::VectorXd::Zero(design.cols);
  for (const auto& p : partial) v += p;
  return v;
}

/// G = I^T I in exact 64-bit integer counts. Order of accumulation is
/// irrelevant for integers, so blocks merge under a mutex.
inline Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>
accumulate_gram(const DesignMatrix& design, int workers) {
  using GramInt = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
  GramInt gram = GramInt::Zero(design.cols, design.cols);
  std::mutex merge;
  const std::int64_t nblocks = (design.rows + kFitBlock - 1) / kFitBlock;
  parallel_for(nblocks, workers, [&](std::int64_t b) {
    GramInt local = GramInt::Zero(design.cols, design.cols);
    const std::int64_t lo = b * kFitBlock;
    const std::int64_t hi = std::min(design.rows, lo + kFitBlock);
    for (std::int64_t i = lo; i < hi; ++i) {
      const auto& m = design.row_members[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t c = a; c < m.size(); ++c)
          ++local(m[a] - 1, m[c] - 1);
    }
    std::lock_guard<std::mutex> g(merge);
    gram += local;
  });
  for (int a = 0; a < design.cols; ++a)
    for (int c = a + 1; c < design.cols; ++c) gram(c, a) = gram(a, c);
  return gram;
}

inline double accumulate_train_mse(const DesignMatrix& design,
                                   std::span<const double> values,
                                   const Eigen::VectorXd& theta, int workers) {
  const std::int64_t nblocks = (design.rows + kFitBlock - 1) / kFitBlock;
  std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
  parallel_for(nblocks, workers, [&](std::int64_t b) {
    double acc = 0.0;
    const std::int64_t lo = b * kFitBlock;
    const std::int64_t hi = std::min(design.rows, lo + kFitBlock);
    for (std::int64_t i = lo; i < hi; ++i) {
      double pred = 0.0;
      for (TaskId t : design.row_members[static_cast<std::size_t>(i)])
        pred += theta[t - 1];
      const double r = pred - values[static_cast<std::size_t>(i)];
      acc += r * r;
    }
    partial[static_cast<std::size_t>(b)] = acc;
  });
  double sse = 0.0;
  for (double p : partial) sse += p;
  return sse / static_cast<double>(design.rows);
}

}  // namespace detail

/// v = I^T f: per task, the sum of measured values over the rows containing it.
inline Eigen::VectorXd task_vector(const DesignMatrix& design,
                                   std::span<const double> values,
                                   int workers = 1) {
  detail::check_fit_inputs(design, values);
  return detail::accumulate_task_vector(design, values, workers);
}

/// Least-squares fit of the additive surrogate via the normal equations
/// (I^T I + ridge) theta = I^T f, solved by LDLT with one step of iterative
/// refinement. Throws singular_design_error (naming the offending columns)
/// when the normal-equations matrix is numerically rank deficient.
inline SurrogateModel fit(const DesignMatrix& design,
                          std::span<const double> values,
                          const FitOptions& opts = {}) {
  detail::check_fit_inputs(design, values);
  if (opts.ridge < 0.0 || !std::isfinite(opts.ridge))
    throw invalid_parameter_error("fit: ridge must be finite and >= 0");
  const int k = design.cols;

  const auto gram = detail::accumulate_gram(design, opts.workers);
  const Eigen::VectorXd v =
      detail::accumulate_task_vector(design, values, opts.workers);

  Eigen::MatrixXd a = gram.template cast<double>();
  for (int j = 0; j < k; ++j) a(j, j) += opts.ridge;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success)
    throw singular_design_error("fit: eigen decomposition failed");
  const double lam_max = eig.eigenvalues().maxCoeff();
  const double lam_min = eig.eigenvalues().minCoeff();
  const double tol = lam_max * 1e-10;
  if (lam_max <= 0.0 || lam_min <= tol) {
    std::string cols;
    for (int j = 0; j < k; ++j)
      if (gram(j, j) == 0) cols += (cols.empty() ? "" : ",") + std::to_string(j + 1);
    if (cols.empty()) {
      // name the columns loading on the null space
      for (int e = 0; e < k; ++e) {
        if (eig.eigenvalues()[e] > tol) continue;
        for (int j = 0; j < k; ++j)
          if (std::abs(eig.eigenvectors()(j, e)) > 1e-8 &&
              cols.find(std::to_string(j + 1)) == std::string::npos)
            cols += (cols.empty() ? "" : ",") + std::to_string(j + 1);
      }
    }
    std::string msg = "fit: normal-equations matrix is singular; columns {" +
                      cols + "} are not identifiable";
    if (design.rows < k)
      msg += " (n=" + std::to_string(design.rows) +
             " rows cannot identify k=" + std::to_string(k) + " tasks)";
    throw singular_design_error(msg);
  }

  Eigen::LDLT<Eigen::MatrixXd> solver(a);
  Eigen::VectorXd theta = solver.solve(v);
  theta += solver.solve(v - a * theta);  // one refinement step

  SurrogateModel m;
  m.k = k;
  m.n = design.rows;
  m.seed = opts.seed;
  m.theta = theta;
  m.condition = lam_max / lam_min;
  int alpha = design.row_sum(0);
  for (std::int64_t i = 1; i < design.rows && alpha != 0; ++i)
    if (design.row_sum(i) != alpha) alpha = 0;
  m.alpha = alpha;
  m.train_mse = detail::accumulate_train_mse(design, values, theta, opts.workers);
  return m;
}

/// g(S): sum of the model's scores over the subset members. predict({}) = 0.
inline double predict(const SurrogateModel& model, const Subset& subset) {
  if (model.theta.size() != model.k)
    throw invalid_parameter_error("predict: model theta length does not match k");
  if (subset.max_id() > model.k)
    throw invalid_parameter_error("predict: subset contains task id " +
                                  std::to_string(subset.max_id()) +
                                  " > k=" + std::to_string(model.k));
  double s = 0.0;
  for (TaskId t : subset.members()) s += model.theta[t - 1];
  return s;
}

/// Exact covariance of the indicator vector of a uniform alpha-subset of k
/// tasks (second-moment matrix E[1_S 1_S^T]): alpha/k on the diagonal,
/// alpha(alpha-1)/(k(k-1)) off it.
inline Eigen::MatrixXd population_covariance(int k, int alpha) {
  detail::check_k_alpha(k, alpha);
  const double diag = static_cast<double>(alpha) / static_cast<double>(k);
  const double off =
      (k >= 2) ? static_cast<double>(alpha) * (alpha - 1) /
                     (static_cast<double>(k) * (k - 1))
               : 0.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, off);
  for (int j = 0; j < k; ++j) m(j, j) = diag;
  return m;
}

/// Identity and rank-one coefficients of the covariance inverse:
/// inverse = identity_coeff * Id + rank_one_coeff * ee^T.
struct CovarianceInverseCoefficients {
  double identity_coeff = 0.0;
  double rank_one_coeff = 0.0;
};

inline CovarianceInverseCoefficients population_covariance_inverse_coefficients(
    int k, int alpha) {
  detail::check_k_alpha(k, alpha);
  if (alpha == k)
    throw singular_design_error(
        "population covariance is singular for alpha = k (rank one)");
  const double kd = k, ad = alpha;
  return {kd * (kd - 1.0) / (ad * (kd - ad)),
          -kd * (ad - 1.0) / (ad * ad * (kd - ad))};
}

/// Closed-form inverse of population_covariance(k, alpha), obtained by the
/// Sherman-Morrison identity applied to its diagonal-plus-rank-one form.
inline Eigen::MatrixXd population_covariance_inverse(int k, int alpha) {
  const auto c = population_covariance_inverse_coefficients(k, alpha);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, c.rank_one_coeff);
  for (int j = 0; j < k; ++j) m(j, j) += c.identity_coeff;
  return m;
}

/// Holdout MSE plus rank agreement between predicted and measured values.
/// Spearman is reported as undefined (flag false) for a single record or a
/// constant series; the MSE is still returned.
inline HoldoutDiagnostics holdout_diagnostics(
    const SurrogateModel& model, const std::vector<PerformanceRecord>& holdout) {
  if (holdout.empty())
    throw invalid_parameter_error("holdout_diagnostics: empty holdout");
  std::vector<double> pred, actual;
  pred.reserve(holdout.size());
  actual.reserve(holdout.size());
  for (const auto& r : holdout) {
    pred.push_back(predict(model, r.subset));
    actual.push_back(r.value);
  }
  HoldoutDiagnostics d;
  d.holdout_mse = mse(pred, actual);
  try {
    d.spearman_rho = spearman(pred, actual);
    d.spearman_defined = true;
  } catch (const undefined_correlation_error&) {
    d.spearman_rho = std::numeric_limits<double>::quiet_NaN();
    d.spearman_defined = false;
  }
  return d;
}

/// Builds the design from record subsets and fits.
inline SurrogateModel fit_from_records(const std::vector<PerformanceRecord>& records,
                                       int k, const FitOptions& opts = {}) {
  std::vector<Subset> subsets;
  std::vector<double> values;
  subsets.reserve(records.size());
  values.reserve(records.size());
  for (const auto& r : records) {
    subsets.push_back(r.subset);
    values.push_back(r.value);
  }
  return fit(indicator_matrix(subsets, k), values, opts);
}

}  // namespace tasksel
