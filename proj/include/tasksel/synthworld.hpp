#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/prng.hpp"

namespace tasksel {

/// Linear-Gaussian multitask world. Task 0 is the target; source tasks 1..k
/// are "good" (coefficients within distance a of the target's) or "bad"
/// (at distance at least b). Features and label noise are standard normal.
struct WorldParams {
  int k = 0;             // source tasks
  int p = 0;             // feature dimension
  std::int64_t d = 0;    // training rows per task (d >= p)
  std::int64_t m = 0;    // target validation rows
  double a = 0.0;        // good radius: ||beta_i - beta_0|| in (0, a] (0 if a = 0)
  double b = 0.0;        // bad radius: ||beta_i - beta_0|| in [b, 2b)
  double frac_good = 0.0;
  double sigma = 0.0;    // label noise scale
  double beta_scale = 1.0;
  std::uint64_t seed = 0;

  int good_count() const {
    return static_cast<int>(std::floor(frac_good * static_cast<double>(k) + 1e-9));
  }
};

inline void validate(const WorldParams& w) {
  if (w.k < 1) throw invalid_parameter_error("world: k must be >= 1");
  if (w.p < 1) throw invalid_parameter_error("world: p must be >= 1");
  if (w.d < w.p)
    throw invalid_parameter_error(
        "world: d must be >= p (target-only fit is underdetermined otherwise); d=" +
        std::to_string(w.d) + ", p=" + std::to_string(w.p));
  if (w.m < 1) throw invalid_parameter_error("world: m must be >= 1");
  if (!(w.a >= 0.0) || !std::isfinite(w.a))
    throw invalid_parameter_error("world: a must be finite and >= 0");
  if (!(w.b > w.a) || !std::isfinite(w.b))
    throw invalid_parameter_error("world: b must be finite and > a");
  if (!(w.frac_good >= 0.0 && w.frac_good <= 1.0))
    throw invalid_parameter_error("world: frac_good must be in [0, 1]");
  if (!(w.sigma >= 0.0) || !std::isfinite(w.sigma))
    throw invalid_parameter_error("world: sigma must be finite and >= 0");
  if (!(w.beta_scale > 0.0) || !std::isfinite(w.beta_scale))
    throw invalid_parameter_error("world: beta_scale must be finite and > 0");
}

struct SyntheticWorld {
  WorldParams params;
  std::vector<Eigen::VectorXd> beta;  // k+1 vectors, index 0 = target
  std::vector<Eigen::MatrixXd> x;     // k+1 matrices, d x p
  std::vector<Eigen::VectorXd> y;     // k+1 vectors, length d
  Eigen::MatrixXd x_val;              // m x p, target distribution
  Eigen::VectorXd y_val;              // length m
  std::vector<char> good;             // k flags, good[i-1] for task i
  // full-data Gram blocks, precomputed once per world
  std::vector<Eigen::MatrixXd> gram;  // k+1 of X^T X
  std::vector<Eigen::VectorXd> xty;   // k+1 of X^T y

  bool is_good(TaskId i) const { return good[static_cast<std::size_t>(i - 1)] != 0; }

  Subset good_subset() const {
    std::vector<TaskId> ids;
    for (int i = 1; i <= params.k; ++i)
      if (is_good(i)) ids.push_back(i);
    return Subset(std::move(ids));
  }
};

namespace detail {

inline Eigen::VectorXd gaussian_vector(Prng& g, std::int64_t n) {
  Eigen::VectorXd v(n);
  for (std::int64_t i = 0; i < n; ++i) v[i] = g.gaussian();
  return v;
}

/// Unit direction; redraws on a numerically zero vector (probability ~0).
inline Eigen::VectorXd unit_direction(Prng& g, int p) {
  for (;;) {
    Eigen::VectorXd v = gaussian_vector(g, p);
    const double nrm = v.norm();
    if (nrm > 1e-12) return v / nrm;
  }
}

inline Eigen::MatrixXd gaussian_matrix(Prng& g, std::int64_t rows, std::int64_t cols) {
  Eigen::MatrixXd m(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) m(r, c) = g.gaussian();
  return m;
}

}  // namespace detail

/// Builds the world deterministically from params.seed. Tasks 1..good_count()
/// are good, the rest bad. Good coefficient offsets have norm a*(1-u) with
/// u ~ U[0,1) (so in (0, a], or exactly 0 when a = 0); bad offsets have norm
/// b*(1+u), in [b, 2b).
inline SyntheticWorld generate_world(const WorldParams& params) {
  validate(params);
  SyntheticWorld w;
  w.params = params;
  const int k = params.k, p = params.p;
  const std::int64_t d = params.d, m = params.m;
  const std::uint64_t seed = params.seed;

  w.beta.resize(static_cast<std::size_t>(k) + 1);
  {
    Prng g = Prng::stream(seed, StreamTag::world_beta, 0);
    w.beta[0] = detail::unit_direction(g, p) * params.beta_scale;
  }
  const int goods = params.good_count();
  w.good.assign(static_cast<std::size_t>(k), 0);
  for (int i = 1; i <= k; ++i) {
    Prng g = Prng::stream(seed, StreamTag::world_beta, static_cast<std::uint64_t>(i));
    const Eigen::VectorXd dir = detail::unit_direction(g, p);
    const double u = g.unit();
    const bool is_good = i <= goods;
    const double r = is_good ? params.a * (1.0 - u) : params.b * (1.0 + u);
    w.beta[static_cast<std::size_t>(i)] = w.beta[0] + r * dir;
    w.good[static_cast<std::size_t>(i - 1)] = is_good ? 1 : 0;
  }

  w.x.resize(static_cast<std::size_t>(k) + 1);
  w.y.resize(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    Prng gf = Prng::stream(seed, StreamTag::world_features, static_cast<std::uint64_t>(i));
    Prng gn = Prng::stream(seed, StreamTag::world_noise, static_cast<std::uint64_t>(i));
    auto& xi = w.x[static_cast<std::size_t>(i)];
    xi = detail::gaussian_matrix(gf, d, p);
    w.y[static_cast<std::size_t>(i)] =
        xi * w.beta[static_cast<std::size_t>(i)] +
        params.sigma * detail::gaussian_vector(gn, d);
  }
  {
    Prng gf = Prng::stream(seed, StreamTag::world_val_features, 0);
    Prng gn = Prng::stream(seed, StreamTag::world_val_noise, 0);
    w.x_val = detail::gaussian_matrix(gf, m, p);
    w.y_val = w.x_val * w.beta[0] + params.sigma * detail::gaussian_vector(gn, m);
  }

  w.gram.resize(static_cast<std::size_t>(k) + 1);
  w.xty.resize(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    const auto& xi = w.x[static_cast<std::size_t>(i)];
    w.gram[static_cast<std::size_t>(i)] = xi.transpose() * xi;
    w.xty[static_cast<std::size_t>(i)] = xi.transpose() * w.y[static_cast<std::size_t>(i)];
  }
  return w;
}

namespace detail {

inline void check_world_subset(const SyntheticWorld& w, const Subset& subset) {
  if (subset.max_id() > w.params.k)
    throw invalid_parameter_error("subset contains task id " +
                                  std::to_string(subset.max_id()) + " > k=" +
                                  std::to_string(w.params.k));
}

/// Pooled least squares over the target task plus the subset's tasks, using
/// the first `rows` training rows of each. rows == d takes the precomputed
/// full-data Gram blocks, so the undownsampled path is byte-stable.
inline Eigen::VectorXd pooled_fit_rows(const SyntheticWorld& w, const Subset& subset,
                                       std::int64_t rows) {
  check_world_subset(w, subset);
  const std::int64_t d = w.params.d;
  if (rows < 1 || rows > d)
    throw invalid_parameter_error("pooled fit: rows must be in [1, d]");
  const int p = w.params.p;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(p);
  auto add_task = [&](int i) {
    const auto idx = static_cast<std::size_t>(i);
    if (rows == d) {
      g += w.gram[idx];
      h += w.xty[idx];
    } else {
      const auto xt = w.x[idx].topRows(rows);
      g += xt.transpose() * xt;
      h += xt.transpose() * w.y[idx].head(rows);
    }
  };
  add_task(0);
  for (TaskId t : subset.members()) add_task(t);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  if (eig.info() != Eigen::Success)
    throw singular_design_error("pooled fit: eigen decomposition failed");
  const double lam_max = eig.eigenvalues().maxCoeff();
  if (lam_max <= 0.0 || eig.eigenvalues().minCoeff() <= lam_max * 1e-12)
    throw singular_design_error("pooled fit: feature Gram matrix is singular for subset " +
                                subset.str());
  Eigen::LDLT<Eigen::MatrixXd> solver(g);
  Eigen::VectorXd b = solver.solve(h);
  b += solver.solve(h - g * b);
  return b;
}

}  // namespace detail

/// Hard-parameter-sharing fit: one coefficient vector solving least squares on
/// the pooled rows of the target task and every task in the subset.
inline Eigen::VectorXd pooled_fit(const SyntheticWorld& w, const Subset& subset) {
  return detail::pooled_fit_rows(w, subset, w.params.d);
}

/// Target validation MSE after pooled training with the subset. downsample in
/// (0, 1] keeps the first ceil(downsample * d) rows of every pooled task.
inline double evaluate_f(const SyntheticWorld& w, const Subset& subset,
                         double downsample = 1.0) {
  if (!(downsample > 0.0 && downsample <= 1.0))
    throw invalid_parameter_error("evaluate_f: downsample must be in (0, 1]");
  const std::int64_t d = w.params.d;
  // guard the integer boundary: 0.4 * 500 must give 200 rows, not 201
  const double target = downsample * static_cast<double>(d);
  const std::int64_t rows =
      static_cast<std::int64_t>(std::ceil(target - 1e-9 * static_cast<double>(d)));
  const std::int64_t pooled_rows = rows * (subset.size() + 1);
  if (pooled_rows < w.params.p)
    throw invalid_parameter_error(
        "evaluate_f: downsample leaves " + std::to_string(pooled_rows) +
        " pooled rows, fewer than p=" + std::to_string(w.params.p));
  const Eigen::VectorXd b = detail::pooled_fit_rows(w, subset, rows);
  return (w.x_val * b - w.y_val).squaredNorm() /
         static_cast<double>(w.params.m);
}

/// f of the empty subset: the target trained alone on its full data.
inline double stl_baseline(const SyntheticWorld& w) {
  return evaluate_f(w, Subset{}, 1.0);
}

}  // namespace tasksel
