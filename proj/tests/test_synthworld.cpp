#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "support.hpp"
#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/synthworld.hpp"

using namespace tasksel;
using tasksel::testing::ids;

namespace {

WorldParams golden_params() {
  WorldParams p;
  p.k = 10;
  p.p = 5;
  p.d = 100;
  p.m = 200;
  p.a = 0.1;
  p.b = 2.0;
  p.frac_good = 0.5;
  p.sigma = 0.1;
  p.beta_scale = 1.0;
  p.seed = 42;
  return p;
}

}  // namespace

TEST(WorldParams, GoodCountFloorsFractionTimesK) {
  WorldParams p = golden_params();
  EXPECT_EQ(p.good_count(), 5);
  p.k = 20;
  EXPECT_EQ(p.good_count(), 10);
  p.k = 3;
  p.frac_good = 2.0 / 3.0;
  EXPECT_EQ(p.good_count(), 2);
  p.frac_good = 1.0;
  EXPECT_EQ(p.good_count(), 3);
  p.frac_good = 0.0;
  EXPECT_EQ(p.good_count(), 0);
}

TEST(WorldParams, ValidateRejectsEachViolation) {
  const WorldParams base = golden_params();
  EXPECT_NO_THROW(validate(base));
  auto broken = [&](auto mutate) {
    WorldParams p = base;
    mutate(p);
    EXPECT_THROW(validate(p), invalid_parameter_error);
  };
  broken([](WorldParams& p) { p.k = 0; });
  broken([](WorldParams& p) { p.p = 0; });
  broken([](WorldParams& p) { p.d = p.p - 1; });
  broken([](WorldParams& p) { p.m = 0; });
  broken([](WorldParams& p) { p.a = -0.1; });
  broken([](WorldParams& p) { p.b = p.a; });
  broken([](WorldParams& p) { p.b = 0.05; });
  broken([](WorldParams& p) { p.frac_good = 1.5; });
  broken([](WorldParams& p) { p.frac_good = -0.1; });
  broken([](WorldParams& p) { p.sigma = -1.0; });
  broken([](WorldParams& p) { p.beta_scale = 0.0; });
}

TEST(GenerateWorld, ShapesAndLabelPrefix) {
  const SyntheticWorld w = generate_world(golden_params());
  ASSERT_EQ(w.beta.size(), 11u);
  ASSERT_EQ(w.x.size(), 11u);
  ASSERT_EQ(w.y.size(), 11u);
  for (int i = 0; i <= 10; ++i) {
    EXPECT_EQ(w.x[static_cast<std::size_t>(i)].rows(), 100);
    EXPECT_EQ(w.x[static_cast<std::size_t>(i)].cols(), 5);
    EXPECT_EQ(w.y[static_cast<std::size_t>(i)].size(), 100);
    EXPECT_EQ(w.beta[static_cast<std::size_t>(i)].size(), 5);
  }
  EXPECT_EQ(w.x_val.rows(), 200);
  EXPECT_EQ(w.x_val.cols(), 5);
  EXPECT_EQ(w.y_val.size(), 200);
  // tasks 1..good_count are the good ones
  for (int i = 1; i <= 5; ++i) EXPECT_TRUE(w.is_good(i));
  for (int i = 6; i <= 10; ++i) EXPECT_FALSE(w.is_good(i));
  EXPECT_EQ(w.good_subset(), ids({1, 2, 3, 4, 5}));
}

TEST(GenerateWorld, OffsetNormsLandInTheirBands) {
  const SyntheticWorld w = generate_world(golden_params());
  EXPECT_NEAR(w.beta[0].norm(), 1.0, 1e-12);
  for (int i = 1; i <= 10; ++i) {
    const double r = (w.beta[static_cast<std::size_t>(i)] - w.beta[0]).norm();
    if (w.is_good(i)) {
      EXPECT_GT(r, 0.0) << "task " << i;
      EXPECT_LE(r, 0.1 + 1e-12) << "task " << i;
    } else {
      EXPECT_GE(r, 2.0 - 1e-12) << "task " << i;
      EXPECT_LT(r, 4.0) << "task " << i;
    }
  }
}

TEST(GenerateWorld, DeterministicInSeed) {
  const SyntheticWorld a = generate_world(golden_params());
  const SyntheticWorld b = generate_world(golden_params());
  for (int i = 0; i <= 10; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    EXPECT_EQ(a.beta[idx], b.beta[idx]);
    EXPECT_EQ(a.x[idx], b.x[idx]);
    EXPECT_EQ(a.y[idx], b.y[idx]);
  }
  EXPECT_EQ(a.y_val, b.y_val);

  WorldParams other = golden_params();
  other.seed = 43;
  const SyntheticWorld c = generate_world(other);
  EXPECT_NE((a.beta[0] - c.beta[0]).norm(), 0.0);
  EXPECT_NE((a.y_val - c.y_val).norm(), 0.0);
}

TEST(PooledFit, NoiselessWorldRecoversTargetCoefficients) {
  WorldParams p = golden_params();
  p.sigma = 0.0;
  const SyntheticWorld w = generate_world(p);
  const Eigen::VectorXd b = pooled_fit(w, Subset{});
  EXPECT_LE((b - w.beta[0]).norm(), 1e-10);
  EXPECT_LE(stl_baseline(w), 1e-20);
}

TEST(EvaluateF, NoiseFloorNearSigmaSquared) {
  const SyntheticWorld w = generate_world(golden_params());
  const double stl = stl_baseline(w);
  EXPECT_GT(stl, 0.5 * 0.01);
  EXPECT_LT(stl, 3.0 * 0.01);
}

TEST(EvaluateF, GoodTasksBeatBadTasks) {
  const SyntheticWorld w = generate_world(golden_params());
  double worst_good = 0.0, best_bad = 1e300;
  for (int i = 1; i <= 10; ++i) {
    const double f = evaluate_f(w, Subset({i}));
    if (w.is_good(i))
      worst_good = std::max(worst_good, f);
    else
      best_bad = std::min(best_bad, f);
  }
  EXPECT_LT(worst_good, best_bad);
  EXPECT_GT(best_bad, 10.0 * worst_good);
}

TEST(EvaluateF, GoldenRegressionValues) {
  // frozen outputs of this exact world; any drift in the generator, the
  // pooled solver, or the rng streams shows up here
  const SyntheticWorld w = generate_world(golden_params());
  EXPECT_DOUBLE_EQ(evaluate_f(w, ids({1, 2})), 0.011910644765696192);
  EXPECT_DOUBLE_EQ(stl_baseline(w), 0.01230484926442247);
  EXPECT_DOUBLE_EQ(evaluate_f(w, ids({1, 2}), 0.5), 0.012266519750393287);
  EXPECT_DOUBLE_EQ(evaluate_f(w, ids({9, 10})), 2.4144576800190767);
}

TEST(EvaluateF, DownsampleRowCountAvoidsFloatBoundary) {
  const SyntheticWorld w = generate_world(golden_params());
  // 0.2 * 100 is 20.0000000000000011 in floating point; the row count must
  // still be 20, which equals the hand-built 20-row pooled fit bit for bit
  const Subset s = ids({1});
  const Eigen::VectorXd b = detail::pooled_fit_rows(w, s, 20);
  const double manual =
      (w.x_val * b - w.y_val).squaredNorm() / static_cast<double>(w.params.m);
  EXPECT_EQ(evaluate_f(w, s, 0.2), manual);
}

TEST(EvaluateF, DownsampleValidation) {
  const SyntheticWorld w = generate_world(golden_params());
  EXPECT_THROW(evaluate_f(w, Subset{}, 0.0), invalid_parameter_error);
  EXPECT_THROW(evaluate_f(w, Subset{}, 1.0001), invalid_parameter_error);
  EXPECT_THROW(evaluate_f(w, Subset{}, -0.5), invalid_parameter_error);
  EXPECT_THROW(evaluate_f(w, ids({11})), invalid_parameter_error);
}

TEST(EvaluateF, RefusesWhenPooledRowsCannotIdentifyCoefficients) {
  WorldParams p = golden_params();
  p.k = 2;
  p.p = 10;
  p.d = 10;
  const SyntheticWorld w = generate_world(p);
  // 5 pooled rows for 10 coefficients
  EXPECT_THROW(evaluate_f(w, Subset{}, 0.5), invalid_parameter_error);
  // two tasks at half rows give exactly 10 pooled rows
  EXPECT_NO_THROW(evaluate_f(w, ids({1}), 0.5));
}

TEST(EvaluateF, FullDownsampleMatchesDefault) {
  const SyntheticWorld w = generate_world(golden_params());
  EXPECT_EQ(evaluate_f(w, ids({1, 2}), 1.0), evaluate_f(w, ids({1, 2})));
}
