// End-to-end acceptance: statistical and exactness guarantees of the whole
// stack, run across many seeds with thresholds and wall-clock budgets pinned.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <vector>

#include "support.hpp"
#include "tasksel/tasksel.hpp"

using namespace tasksel;
using tasksel::testing::hash_f;
using tasksel::testing::ids;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double spectral_norm(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// The benchmark world family used by the separation and ranking studies.
WorldParams family_world(int k, std::uint64_t seed) {
  WorldParams w;
  w.k = k;
  w.p = 10;
  w.d = 500;
  w.m = 500;
  w.a = 0.1;
  w.b = 2.0;
  w.frac_good = 0.5;
  w.sigma = 0.1;
  w.beta_scale = 1.0;
  w.seed = seed;
  return w;
}

RunConfig separation_config(std::uint64_t seed, double downsample) {
  RunConfig c;
  c.k = 20;
  c.alpha = 5;
  c.n = 400;
  c.seed = seed;
  c.holdout_n = 2;
  c.downsample = downsample;
  c.world = family_world(20, seed);
  return c;
}

std::filesystem::path fresh_dir(const char* name) {
  const auto d = std::filesystem::temp_directory_path() /
                 (std::string("tasksel_acceptance_") + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Acceptance, ExactRecoveryOfAdditivePerformance) {
  // k = 50 tasks, size-5 subsets, n = k + 50 random draws: least squares on an
  // exactly additive f returns the per-task contributions to 1e-8.
  Stopwatch sw;
  const int k = 50, alpha = 5;
  const std::int64_t n = k + 50;
  const auto subsets = sample_subsets(k, alpha, n, 2024);
  Prng g = Prng::stream(2024, StreamTag::world_beta, 1);
  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) w[i] = 2.0 * g.unit() - 1.0;
  std::vector<double> values;
  values.reserve(subsets.size());
  for (const auto& s : subsets) {
    double f = 0.0;
    for (TaskId t : s.members()) f += w[t - 1];
    values.push_back(f);
  }
  const SurrogateModel m = fit(indicator_matrix(subsets, k), values);
  const double err = (m.theta - w).lpNorm<Eigen::Infinity>();
  std::cout << "recovery error " << err << "\n";
  EXPECT_LE(err, 1e-8);
  EXPECT_LT(sw.seconds(), 1.0);
}

TEST(Acceptance, SubsetCovarianceClosedFormAndEmpiricalDecay) {
  Stopwatch sw;
  // closed form equals the exhaustive enumeration average for every k <= 12
  for (int k = 2; k <= 12; ++k) {
    for (int alpha = 1; alpha <= k; ++alpha) {
      Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(k, k);
      const auto all = enumerate_all_subsets(k, alpha);
      for (const auto& s : all)
        for (TaskId a : s.members())
          for (TaskId b : s.members()) avg(a - 1, b - 1) += 1.0;
      avg /= static_cast<double>(all.size());
      EXPECT_LE((avg - population_covariance(k, alpha)).lpNorm<Eigen::Infinity>(),
                1e-12)
          << "k=" << k << " alpha=" << alpha;
      if (alpha < k) {
        const Eigen::MatrixXd product =
            population_covariance(k, alpha) * population_covariance_inverse(k, alpha);
        EXPECT_LE(
            (product - Eigen::MatrixXd::Identity(k, k)).lpNorm<Eigen::Infinity>(),
            1e-10)
            << "k=" << k << " alpha=" << alpha;
      } else {
        EXPECT_THROW(population_covariance_inverse(k, alpha), singular_design_error);
      }
    }
  }

  // the empirical second-moment matrix converges at the n^-1/2 rate:
  // quadrupling n halves the spectral error, within 50 percent slack
  const int k = 20, alpha = 5;
  const Eigen::MatrixXd exact = population_covariance(k, alpha);
  auto gram_error = [&](std::int64_t n, std::uint64_t seed) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    for (const auto& s : sample_subsets(k, alpha, n, seed))
      for (TaskId a : s.members())
        for (TaskId b : s.members()) gram(a - 1, b - 1) += 1.0;
    gram /= static_cast<double>(n);
    return spectral_norm(gram - exact);
  };
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    ratios.push_back(gram_error(40000, seed) / gram_error(10000, seed));
  const double med = median(ratios);
  std::cout << "gram error ratio (4n vs n) median " << med << "\n";
  EXPECT_GE(med, 0.25);
  EXPECT_LE(med, 0.75);
  EXPECT_LT(sw.seconds(), 30.0);
}

TEST(Acceptance, ScoreGapClosedFormResidual) {
  Stopwatch sw;
  const int k = 8, alpha = 3;
  // complete enumeration: the fitted score gaps equal the closed-form
  // task-sum gaps exactly
  {
    const auto subsets = enumerate_all_subsets(k, alpha);
    std::vector<double> values;
    for (const auto& s : subsets) values.push_back(hash_f(s));
    const auto design = indicator_matrix(subsets, k);
    const SurrogateModel m = fit(design, values);
    const double residual = gap_lemma_residual(m, design, values);
    std::cout << "enumeration residual " << residual << "\n";
    EXPECT_LE(residual, 1e-10);
  }
  // random designs: the residual decays as the sample grows
  auto residual_at = [&](std::int64_t n, std::uint64_t seed) {
    const auto subsets = sample_subsets(k, alpha, n, seed);
    std::vector<double> values;
    for (const auto& s : subsets) values.push_back(hash_f(s));
    const auto design = indicator_matrix(subsets, k);
    return gap_lemma_residual(fit(design, values), design, values);
  };
  std::vector<double> small, large;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    small.push_back(residual_at(1500, seed));
    large.push_back(residual_at(6000, seed));
  }
  const double ratio = median(large) / median(small);
  std::cout << "residual median ratio (4n vs n) " << ratio << "\n";
  EXPECT_LE(ratio, 0.7);
  EXPECT_LT(sw.seconds(), 30.0);
}

TEST(Acceptance, ScoresSeparateGoodFromBadTasks) {
  Stopwatch sw;
  int separated_and_exact = 0, separated_only = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RunConfig c = separation_config(seed, 1.0);
    const RunRecord rec = run_pipeline(c);
    if (!rec.separation.separated) continue;
    ++separated_only;
    const Subset goods = generate_world(c.world).good_subset();
    bool exact = false;
    for (double g : default_gamma_grid())
      if (select_tasks(rec.model.theta, g) == goods) exact = true;
    if (exact) ++separated_and_exact;
  }
  std::cout << "separated " << separated_only << "/20, with exact threshold "
            << separated_and_exact << "/20\n";
  EXPECT_GE(separated_and_exact, 18);
  EXPECT_LT(sw.seconds(), 120.0);
}

TEST(Acceptance, SurrogateRanksHeldOutSubsets) {
  // n = 8k sampled subsets at k = 25. The world uses a high feature dimension
  // so that subset performances are close to additive in their members;
  // the rank correlation then measures sample efficiency, not model bias.
  Stopwatch sw;
  int hits = 0;
  std::vector<double> rhos;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RunConfig c;
    c.k = 25;
    c.alpha = 5;
    c.n = 200;
    c.seed = seed;
    c.holdout_n = 100;
    c.world.k = 25;
    c.world.p = 100;
    c.world.d = 200;
    c.world.m = 2000;
    c.world.a = 0.1;
    c.world.b = 1.0;
    c.world.frac_good = 0.5;
    c.world.sigma = 0.5;
    c.world.beta_scale = 1.0;
    c.world.seed = seed;
    const RunRecord rec = run_pipeline(c);
    ASSERT_TRUE(rec.have_diagnostics);
    ASSERT_TRUE(rec.diagnostics.spearman_defined);
    rhos.push_back(rec.diagnostics.spearman_rho);
    if (rec.diagnostics.spearman_rho >= 0.8) ++hits;
  }
  std::cout << "rank correlation >= 0.8 in " << hits << "/20 seeds (median "
            << median(rhos) << ")\n";
  EXPECT_GE(hits, 15);
  EXPECT_LT(sw.seconds(), 120.0);
}

TEST(Acceptance, SurrogateClassifiesTransferSign) {
  // High feature dimension with mild bad tasks: subsets mix positive and
  // negative transfer, and the surrogate must call the sign of held-out
  // subsets well enough for a 0.75 minority-class F1.
  Stopwatch sw;
  std::vector<double> f1s;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RunConfig c;
    c.k = 25;
    c.alpha = 5;
    c.n = 200;
    c.seed = seed;
    c.holdout_n = 100;
    c.world.k = 25;
    c.world.p = 100;
    c.world.d = 200;
    c.world.m = 2000;
    c.world.a = 0.1;
    c.world.b = 1.0;
    c.world.frac_good = 0.5;
    c.world.sigma = 0.5;
    c.world.beta_scale = 1.0;
    c.world.seed = seed;
    const RunRecord rec = run_pipeline(c);
    ASSERT_EQ(rec.holdout.size(), 100u);
    ASSERT_TRUE(std::isfinite(rec.stl_f));
    std::vector<TransferLabel> actual, predicted;
    for (const auto& h : rec.holdout) {
      actual.push_back(classify_transfer(h.value, rec.stl_f));
      predicted.push_back(classify_transfer(predict(rec.model, h.subset), rec.stl_f));
    }
    f1s.push_back(f1_minority(predicted, actual));
  }
  const double med = median(f1s);
  std::cout << "minority F1 median " << med << "\n";
  EXPECT_GE(med, 0.75);
  EXPECT_LT(sw.seconds(), 120.0);
}

TEST(Acceptance, SelectionApproachesTheExhaustiveOptimum) {
  Stopwatch sw;
  int beats_baselines = 0, near_optimum = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunConfig c;
    c.k = 10;
    c.alpha = 3;
    c.n = 80;
    c.seed = seed;
    c.holdout_n = 2;
    c.world = family_world(10, seed);
    c.world.a = 0.05;
    const RunRecord rec = run_pipeline(c);

    const SyntheticWorld world = generate_world(c.world);
    const ExhaustiveReport best = exhaustive_search(
        [&](const Subset& s) { return evaluate_f(world, s, 1.0); }, 10);

    if (rec.final_f <= std::min(rec.naive_all_f, rec.stl_f)) ++beats_baselines;
    const double gap = rec.naive_all_f - best.best_value;
    if (rec.final_f - best.best_value <= 0.1 * gap) ++near_optimum;
  }
  std::cout << "beats both baselines " << beats_baselines
            << "/10, within 10% of the optimum gap " << near_optimum << "/10\n";
  EXPECT_GE(beats_baselines, 9);
  EXPECT_GE(near_optimum, 8);
  EXPECT_LT(sw.seconds(), 300.0);
}

TEST(Acceptance, SeparationSurvivesDownsampledMeasurements) {
  Stopwatch sw;
  int separated = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RunConfig c = separation_config(seed, 0.4);
    const RunRecord rec = run_pipeline(c);
    if (rec.separation.separated) ++separated;
  }
  std::cout << "downsampled separation " << separated << "/20\n";
  EXPECT_GE(separated, 16);
  EXPECT_LT(sw.seconds(), 120.0);
}

TEST(Acceptance, ExternalProtocolAndBitExactReruns) {
  Stopwatch sw;
  // an external run measured by the size-echo stub has exactly additive
  // f(S) = |S|, so every fitted score is 1
  {
    const auto dir = fresh_dir("echo");
    RunConfig c;
    c.mode = RunMode::external;
    c.k = 8;
    c.alpha = 3;
    c.n = 60;
    c.seed = 5;
    c.holdout_n = 10;
    c.responses_path = (dir / "responses.tsv").string();
    c.candidates_out = (dir / "candidates.tsv").string();
    std::vector<OracleResponse> responses;
    for (const auto& r : derive_requests(c))
      responses.push_back(
          {r.id, static_cast<double>(r.tasks.size()), true, ""});
    write_responses(responses, c.responses_path);
    const RunRecord rec = run_pipeline(c);
    double err = 0.0;
    for (int i = 0; i < 8; ++i)
      err = std::max(err, std::abs(rec.model.theta[i] - 1.0));
    std::cout << "echo oracle score error " << err << "\n";
    EXPECT_LE(err, 1e-8);
  }

  // re-executing any synthetic config with the same seed reproduces the
  // scores, the selection, and the final values bit for bit
  std::vector<RunConfig> configs;
  {
    RunConfig c;
    c.k = 12;
    c.alpha = 4;
    c.n = 150;
    c.seed = 77;
    c.holdout_n = 20;
    c.world = family_world(12, 77);
    c.world.p = 6;
    c.world.d = 40;
    c.world.m = 60;
    configs.push_back(c);
    c.alpha = 2;
    c.downsample = 0.5;
    c.seed = 3;
    c.world.seed = 3;
    configs.push_back(c);
    c.ridge = 0.01;
    c.gamma_grid = {-0.2, 0.0, 0.2};
    configs.push_back(c);
  }
  for (const auto& c : configs) {
    const RunRecord a = run_pipeline(c);
    const RunRecord b = run_pipeline(c);
    for (int i = 0; i < c.k; ++i) EXPECT_EQ(a.model.theta[i], b.model.theta[i]);
    EXPECT_EQ(a.selection.selected, b.selection.selected);
    EXPECT_EQ(a.selection.gamma, b.selection.gamma);
    EXPECT_EQ(a.final_f, b.final_f);
    EXPECT_EQ(a.stl_f, b.stl_f);
    EXPECT_EQ(a.naive_all_f, b.naive_all_f);
    EXPECT_EQ(serialize_run_record(a, true), serialize_run_record(b, true));
  }
  EXPECT_LT(sw.seconds(), 10.0);
}
