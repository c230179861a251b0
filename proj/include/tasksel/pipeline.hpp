#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/extoracle.hpp"
#include "tasksel/io.hpp"
#include "tasksel/oracle.hpp"
#include "tasksel/selection.hpp"
#include "tasksel/surrogate.hpp"
#include "tasksel/synthworld.hpp"

namespace tasksel {

enum class RunMode { synthetic, external };

/// Everything a run needs. Synthetic mode measures f in the generated world;
/// external mode reads measurements from oracle protocol files keyed to the
/// deterministic request derivation (ids 1..n are training subsets, ids
/// n+1..n+holdout_n the holdout).
struct RunConfig {
  RunMode mode = RunMode::synthetic;
  int k = 0;
  int alpha = 0;  // must be < k: the full set gives a rank-one design
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::int64_t holdout_n = 100;  // >= 2 so rank diagnostics stay defined
  double downsample = 1.0;       // applied to training and holdout measurements
  double ridge = 0.0;
  int workers = 1;
  bool compute_floor = false;  // population-surrogate floor (synthetic, enumerable)
  std::vector<double> gamma_grid;  // empty means default_gamma_grid()

  WorldParams world;  // synthetic mode; world.k and world.seed are resolved

  std::string output_dir;  // empty: no persistence
  std::string responses_path;            // external: train + holdout measurements
  std::string candidate_responses_path;  // external: second-phase measurements
  std::string candidates_out;            // external: where to emit candidate requests
};

struct Timings {
  double sample_ms = 0, eval_ms = 0, fit_ms = 0, select_ms = 0, final_ms = 0;
};

struct RunRecord {
  RunConfig config;
  SurrogateModel model;
  HoldoutDiagnostics diagnostics;
  bool have_diagnostics = false;
  std::vector<PerformanceRecord> holdout;
  GridSearchResult selection;
  bool selection_pending = false;
  std::string eval_source;  // "synthetic-validation" or "external-measurements"
  double final_f = std::numeric_limits<double>::quiet_NaN();
  double stl_f = std::numeric_limits<double>::quiet_NaN();
  double naive_all_f = std::numeric_limits<double>::quiet_NaN();
  double linear_floor = std::numeric_limits<double>::quiet_NaN();
  SeparationResult separation;
  bool have_separation = false;
  std::vector<std::string> warnings;
  Timings timings;
};

inline void validate(const RunConfig& c) {
  if (c.k < 1) throw invalid_parameter_error("run: k must be >= 1");
  if (c.alpha < 1 || c.alpha >= c.k)
    throw invalid_parameter_error(
        "run: alpha must satisfy 1 <= alpha < k (alpha = k gives a rank-one "
        "design); alpha=" +
        std::to_string(c.alpha) + ", k=" + std::to_string(c.k));
  if (c.n < 1) throw invalid_parameter_error("run: n must be >= 1");
  if (c.holdout_n < 2)
    throw invalid_parameter_error("run: holdout_n must be >= 2, got " +
                                  std::to_string(c.holdout_n));
  if (!(c.downsample > 0.0 && c.downsample <= 1.0))
    throw invalid_parameter_error("run: downsample must be in (0, 1]");
  if (c.ridge < 0.0 || !std::isfinite(c.ridge))
    throw invalid_parameter_error("run: ridge must be finite and >= 0");
  if (c.workers < 1) throw invalid_parameter_error("run: workers must be >= 1");
  for (double g : c.gamma_grid)
    if (!std::isfinite(g))
      throw invalid_parameter_error("run: gamma grid has a non-finite entry");
  if (c.mode == RunMode::synthetic) {
    if (c.world.k != c.k)
      throw invalid_parameter_error("run: world.k must equal k");
    validate(c.world);
  } else {
    if (c.responses_path.empty())
      throw invalid_parameter_error("run: external mode needs responses_path");
  }
}

/// Candidate subsets for selection: every distinct subset the gamma grid can
/// induce from the scores, plus the empty and full sets (for the baselines).
/// Returned in deterministic lexicographic order. This list defines the
/// request ids (1-based, in order) of the external candidate batch.
inline std::vector<Subset> pipeline_candidate_subsets(
    const Eigen::VectorXd& scores, const std::vector<double>& grid, int k) {
  std::set<Subset> out;
  for (double g : grid) out.insert(select_tasks(scores, g));
  out.insert(Subset{});
  std::vector<TaskId> all(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) all[static_cast<std::size_t>(i)] = i + 1;
  out.insert(Subset(std::move(all)));
  return std::vector<Subset>(out.begin(), out.end());
}

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

}  // namespace detail

/// The training and holdout subsets a config implies. Pure function of
/// (seed, k, alpha, n, holdout_n): training draw i uses one counter stream,
/// holdout draw j an independently tagged one, so the two never collide.
struct SampledSubsets {
  std::vector<Subset> train;
  std::vector<Subset> holdout;
};

inline SampledSubsets derive_subsets(const RunConfig& c) {
  SampledSubsets s;
  s.train = sample_subsets(c.k, c.alpha, c.n, c.seed, StreamTag::subset_draw);
  s.holdout =
      sample_subsets(c.k, c.alpha, c.holdout_n, c.seed, StreamTag::holdout_draw);
  return s;
}

/// The oracle requests a config implies: train ids 1..n, holdout ids
/// n+1..n+holdout_n, all at the config's downsample.
inline std::vector<OracleRequest> derive_requests(const RunConfig& c) {
  const SampledSubsets s = derive_subsets(c);
  std::vector<OracleRequest> out;
  out.reserve(s.train.size() + s.holdout.size());
  std::int64_t id = 0;
  for (const auto& sub : s.train)
    out.push_back({++id, sub, c.downsample, "train"});
  for (const auto& sub : s.holdout)
    out.push_back({++id, sub, c.downsample, "holdout"});
  return out;
}

namespace detail {

struct Measurements {
  std::vector<PerformanceRecord> train;
  std::vector<PerformanceRecord> holdout;
};

inline Measurements measure_synthetic(const RunConfig& c, const SyntheticWorld& world,
                                      const SampledSubsets& subsets) {
  Measurements m;
  m.train.resize(subsets.train.size());
  m.holdout.resize(subsets.holdout.size());
  parallel_for(static_cast<std::int64_t>(subsets.train.size()), c.workers,
               [&](std::int64_t i) {
                 const auto idx = static_cast<std::size_t>(i);
                 m.train[idx] = {subsets.train[idx],
                                 evaluate_f(world, subsets.train[idx], c.downsample),
                                 "synthetic"};
               });
  parallel_for(static_cast<std::int64_t>(subsets.holdout.size()), c.workers,
               [&](std::int64_t i) {
                 const auto idx = static_cast<std::size_t>(i);
                 m.holdout[idx] = {subsets.holdout[idx],
                                   evaluate_f(world, subsets.holdout[idx], c.downsample),
                                   "synthetic"};
               });
  return m;
}

inline Measurements measure_external(const RunConfig& c,
                                     const std::vector<OracleRequest>& requests,
                                     std::vector<std::string>& warnings) {
  const MatchResult match = read_responses(c.responses_path, requests);
  if (!match.done)
    warnings.push_back("responses file has no #done marker; using partial batch");
  if (!match.failed_ids.empty() || !match.missing_ids.empty()) {
    std::string w = "dropped measurements:";
    for (auto id : match.failed_ids) w += " failed#" + std::to_string(id);
    for (auto id : match.missing_ids) w += " missing#" + std::to_string(id);
    warnings.push_back(w);
  }
  Measurements m;
  for (std::size_t i = 0; i < match.records.size(); ++i) {
    // request ids 1..n are the training rows, the rest holdout
    const std::int64_t id = parse_int64(
        std::string_view(match.records[i].oracle_id).substr(
            match.records[i].oracle_id.find('#') + 1));
    if (id <= c.n)
      m.train.push_back(match.records[i]);
    else
      m.holdout.push_back(match.records[i]);
  }
  if (m.train.empty())
    throw invalid_parameter_error("run: no usable training measurements");
  return m;
}

}  // namespace detail

/// End-to-end: sample, measure, fit, diagnose, select by grid search, report
/// final values against the target-only and all-tasks baselines.
inline RunRecord run_pipeline(const RunConfig& config) {
  validate(config);
  RunRecord rec;
  rec.config = config;
  const auto grid =
      config.gamma_grid.empty() ? default_gamma_grid() : config.gamma_grid;

  auto t0 = std::chrono::steady_clock::now();
  const SampledSubsets subsets = derive_subsets(config);
  rec.timings.sample_ms = detail::ms_since(t0);

  std::optional<SyntheticWorld> world;
  detail::Measurements meas;
  t0 = std::chrono::steady_clock::now();
  if (config.mode == RunMode::synthetic) {
    world = generate_world(config.world);
    meas = detail::measure_synthetic(config, *world, subsets);
    rec.eval_source = "synthetic-validation";
  } else {
    meas = detail::measure_external(config, derive_requests(config), rec.warnings);
    rec.eval_source = "external-measurements";
  }
  rec.timings.eval_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  FitOptions fopts;
  fopts.ridge = config.ridge;
  fopts.seed = config.seed;
  fopts.workers = config.workers;
  rec.model = fit_from_records(meas.train, config.k, fopts);
  rec.timings.fit_ms = detail::ms_since(t0);

  rec.holdout = meas.holdout;
  if (!rec.holdout.empty()) {
    rec.diagnostics = holdout_diagnostics(rec.model, rec.holdout);
    rec.have_diagnostics = true;
  } else {
    rec.warnings.push_back("no holdout measurements; diagnostics skipped");
  }

  if (config.mode == RunMode::synthetic) {
    rec.separation = separation_check(*world, rec.model);
    rec.have_separation = true;
    if (config.compute_floor && !rec.holdout.empty() &&
        binomial(config.k, config.alpha) <= kPopulationGuard) {
      const Eigen::VectorXd pop_theta = population_theta(
          [&](const Subset& s) { return evaluate_f(*world, s, config.downsample); },
          config.k, config.alpha, config.workers);
      SurrogateModel pop = rec.model;
      pop.theta = pop_theta;
      rec.linear_floor = holdout_diagnostics(pop, rec.holdout).holdout_mse;
    }
  }

  t0 = std::chrono::steady_clock::now();
  if (config.mode == RunMode::synthetic) {
    const auto evaluate = [&](const Subset& s) { return evaluate_f(*world, s, 1.0); };
    rec.selection = grid_search_gamma(rec.model.theta, evaluate, grid, config.workers);
    rec.timings.select_ms = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    rec.final_f = rec.selection.value;
    rec.stl_f = evaluate(Subset{});
    std::vector<TaskId> all(static_cast<std::size_t>(config.k));
    for (int i = 0; i < config.k; ++i) all[static_cast<std::size_t>(i)] = i + 1;
    rec.naive_all_f = evaluate(Subset(std::move(all)));
    rec.timings.final_ms = detail::ms_since(t0);
  } else {
    const std::vector<Subset> candidates =
        pipeline_candidate_subsets(rec.model.theta, grid, config.k);
    if (config.candidate_responses_path.empty()) {
      // phase one: hand the candidate list to the external trainer
      std::string out_path = config.candidates_out;
      if (out_path.empty()) {
        if (config.output_dir.empty())
          throw invalid_parameter_error(
              "run: external mode needs candidates_out or output_dir to emit "
              "candidate requests");
        out_path =
            (std::filesystem::path(config.output_dir) / "candidates.tsv").string();
      }
      const auto parent = std::filesystem::path(out_path).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      write_requests(candidates, out_path, 1.0, "candidate");
      rec.selection_pending = true;
      rec.warnings.push_back("selection pending: candidate requests written to " +
                             out_path + "; rerun with candidate_responses");
      rec.timings.select_ms = detail::ms_since(t0);
    } else {
      std::vector<OracleRequest> creqs;
      creqs.reserve(candidates.size());
      std::int64_t id = 0;
      for (const auto& s : candidates) creqs.push_back({++id, s, 1.0, "candidate"});
      const MatchResult cmatch =
          read_responses(config.candidate_responses_path, creqs, "candidate");
      std::map<Subset, double> value_of;
      for (const auto& r : cmatch.records) value_of.emplace(r.subset, r.value);
      const auto evaluate = [&](const Subset& s) {
        const auto it = value_of.find(s);
        if (it == value_of.end())
          throw protocol_error("candidate measurement missing for subset " + s.str());
        return it->second;
      };
      rec.selection =
          grid_search_gamma(rec.model.theta, evaluate, grid, /*workers=*/1);
      rec.timings.select_ms = detail::ms_since(t0);

      t0 = std::chrono::steady_clock::now();
      rec.final_f = rec.selection.value;
      const auto stl_it = value_of.find(Subset{});
      if (stl_it != value_of.end()) {
        rec.stl_f = stl_it->second;
      } else {
        rec.warnings.push_back("target-only candidate measurement unavailable");
      }
      std::vector<TaskId> all(static_cast<std::size_t>(config.k));
      for (int i = 0; i < config.k; ++i) all[static_cast<std::size_t>(i)] = i + 1;
      const auto full_it = value_of.find(Subset(std::move(all)));
      if (full_it != value_of.end()) {
        rec.naive_all_f = full_it->second;
      } else {
        rec.warnings.push_back("all-tasks candidate measurement unavailable");
      }
      rec.timings.final_ms = detail::ms_since(t0);
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Run record serialization

namespace detail {

inline std::string serialize_config_body(const RunConfig& c, bool for_hash) {
  std::string out;
  out += std::string("mode ") +
         (c.mode == RunMode::synthetic ? "synthetic" : "external") + '\n';
  out += "k " + std::to_string(c.k) + '\n';
  out += "alpha " + std::to_string(c.alpha) + '\n';
  out += "n " + std::to_string(c.n) + '\n';
  out += "seed " + std::to_string(c.seed) + '\n';
  out += "holdout_n " + std::to_string(c.holdout_n) + '\n';
  out += "downsample " + fmt_double(c.downsample) + '\n';
  out += "ridge " + fmt_double(c.ridge) + '\n';
  out += "workers " + std::to_string(c.workers) + '\n';
  out += std::string("floor ") + (c.compute_floor ? "1" : "0") + '\n';
  std::string grid;
  for (double g : (c.gamma_grid.empty() ? default_gamma_grid() : c.gamma_grid)) {
    if (!grid.empty()) grid += ',';
    grid += fmt_double(g);
  }
  out += "gamma_grid " + grid + '\n';
  if (c.mode == RunMode::synthetic) {
    out += "world_p " + std::to_string(c.world.p) + '\n';
    out += "world_d " + std::to_string(c.world.d) + '\n';
    out += "world_m " + std::to_string(c.world.m) + '\n';
    out += "world_a " + fmt_double(c.world.a) + '\n';
    out += "world_b " + fmt_double(c.world.b) + '\n';
    out += "world_frac_good " + fmt_double(c.world.frac_good) + '\n';
    out += "world_sigma " + fmt_double(c.world.sigma) + '\n';
    out += "world_beta_scale " + fmt_double(c.world.beta_scale) + '\n';
    out += "world_seed " + std::to_string(c.world.seed) + '\n';
  }
  if (!for_hash) {
    if (!c.output_dir.empty()) out += "output_dir " + c.output_dir + '\n';
    if (!c.responses_path.empty()) out += "responses " + c.responses_path + '\n';
    if (!c.candidate_responses_path.empty())
      out += "candidate_responses " + c.candidate_responses_path + '\n';
    if (!c.candidates_out.empty()) out += "candidates_out " + c.candidates_out + '\n';
  }
  return out;
}

}  // namespace detail

/// Serializes a run. With for_hash set, volatile content (timings, file
/// paths) is left out so the text is identical across reruns of the same
/// configured computation.
inline std::string serialize_run_record(const RunRecord& r, bool for_hash = false) {
  std::string out(kRunTag);
  out += "\n[config]\n";
  out += detail::serialize_config_body(r.config, for_hash);
  out += "[model]\n";
  out += serialize_model(r.model);
  if (r.have_diagnostics) {
    out += "[diagnostics]\n";
    out += "holdout_mse " + fmt_double(r.diagnostics.holdout_mse) + '\n';
    out += "spearman_rho " + fmt_double(r.diagnostics.spearman_rho) + '\n';
    out += std::string("spearman_defined ") +
           (r.diagnostics.spearman_defined ? "1" : "0") + '\n';
  }
  out += "[selection]\n";
  out += std::string("pending ") + (r.selection_pending ? "1" : "0") + '\n';
  if (!r.selection_pending) {
    out += "gamma " + fmt_double(r.selection.gamma) + '\n';
    std::string tasks;
    for (TaskId t : r.selection.selected.members()) {
      if (!tasks.empty()) tasks += ' ';
      tasks += std::to_string(t);
    }
    out += "tasks " + tasks + '\n';
    out += "value " + fmt_double(r.selection.value) + '\n';
    out += "evaluations " + std::to_string(r.selection.evaluations) + '\n';
  }
  out += "eval_source " + r.eval_source + '\n';
  out += "[final]\n";
  out += "final_f " + fmt_double(r.final_f) + '\n';
  out += "stl_f " + fmt_double(r.stl_f) + '\n';
  out += "naive_all_f " + fmt_double(r.naive_all_f) + '\n';
  out += "linear_floor " + fmt_double(r.linear_floor) + '\n';
  if (r.have_separation) {
    out += "[separation]\n";
    out += std::string("separated ") + (r.separation.separated ? "1" : "0") + '\n';
    out += std::string("vacuous ") + (r.separation.vacuous ? "1" : "0") + '\n';
    out += "margin " + fmt_double(r.separation.margin) + '\n';
    out += "max_good " + fmt_double(r.separation.max_good) + '\n';
    out += "min_bad " + fmt_double(r.separation.min_bad) + '\n';
  }
  out += "[holdout]\n";
  for (std::size_t i = 0; i < r.holdout.size(); ++i) {
    out += std::to_string(i + 1);
    out += '\t';
    const auto& m = r.holdout[i].subset.members();
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j) out += ' ';
      out += std::to_string(m[j]);
    }
    out += '\t';
    out += fmt_double(r.holdout[i].value);
    out += '\n';
  }
  if (!r.warnings.empty()) {
    out += "[warnings]\n";
    for (const auto& w : r.warnings) out += w + '\n';
  }
  if (!for_hash) {
    out += "[timings]\n";
    out += "sample_ms " + fmt_double(r.timings.sample_ms) + '\n';
    out += "eval_ms " + fmt_double(r.timings.eval_ms) + '\n';
    out += "fit_ms " + fmt_double(r.timings.fit_ms) + '\n';
    out += "select_ms " + fmt_double(r.timings.select_ms) + '\n';
    out += "final_ms " + fmt_double(r.timings.final_ms) + '\n';
  }
  return out;
}

/// Identifies a run by its deterministic content.
inline std::string run_hash(const RunRecord& r) {
  return hex16(fnv1a64(serialize_run_record(r, /*for_hash=*/true)));
}

inline RunRecord deserialize_run_record(std::string_view content);

/// Writes record.tsv, config.cfg and model.tsv under
/// output_dir/run_<content-hash>/ and returns that directory.
inline std::filesystem::path persist_run(const RunRecord& r) {
  if (r.config.output_dir.empty())
    throw invalid_parameter_error("persist_run: config has no output_dir");
  const std::filesystem::path dir =
      std::filesystem::path(r.config.output_dir) / ("run_" + run_hash(r));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw io_error("cannot create " + dir.string() + ": " + ec.message());
  atomic_write_file(dir / "record.tsv", serialize_run_record(r));
  atomic_write_file(dir / "config.cfg",
                    detail::serialize_config_body(r.config, /*for_hash=*/false));
  save_model(r.model, dir / "model.tsv");
  return dir;
}

// ---------------------------------------------------------------------------
// Config assembly from key-value text (config files and CLI overrides)

inline std::vector<double> parse_gamma_grid(std::string_view csv) {
  std::vector<double> out;
  for (std::string_view tok : split(csv, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(parse_double(tok));
  }
  if (out.empty()) throw invalid_parameter_error("gamma grid is empty");
  return out;
}

/// Builds a RunConfig from merged key-value pairs (later pairs override
/// earlier ones). Unknown keys are rejected.
inline RunConfig build_run_config(
    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::map<std::string, std::string> merged;
  for (const auto& [k, v] : kv) merged[k] = v;
  auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = merged.find(key);
    if (it == merged.end()) return std::nullopt;
    std::string v = it->second;
    merged.erase(it);
    return v;
  };
  RunConfig c;
  try {
    if (auto v = take("mode")) {
      if (*v == "synthetic")
        c.mode = RunMode::synthetic;
      else if (*v == "external")
        c.mode = RunMode::external;
      else
        throw invalid_parameter_error("mode must be synthetic or external, got '" +
                                      *v + "'");
    }
    if (auto v = take("k")) c.k = static_cast<int>(parse_int64(*v));
    if (auto v = take("alpha")) c.alpha = static_cast<int>(parse_int64(*v));
    if (auto v = take("n")) c.n = parse_int64(*v);
    if (auto v = take("seed")) c.seed = parse_uint64(*v);
    if (auto v = take("holdout_n")) c.holdout_n = parse_int64(*v);
    if (auto v = take("downsample")) c.downsample = parse_double(*v);
    if (auto v = take("ridge")) c.ridge = parse_double(*v);
    if (auto v = take("workers")) c.workers = static_cast<int>(parse_int64(*v));
    if (auto v = take("floor")) c.compute_floor = parse_int64(*v) != 0;
    if (auto v = take("gamma_grid")) c.gamma_grid = parse_gamma_grid(*v);
    c.world.k = c.k;
    c.world.seed = c.seed;
    c.world.p = 10;
    c.world.d = 500;
    c.world.m = 500;
    c.world.a = 0.1;
    c.world.b = 2.0;
    c.world.frac_good = 0.5;
    c.world.sigma = 0.1;
    c.world.beta_scale = 1.0;
    if (auto v = take("world_p")) c.world.p = static_cast<int>(parse_int64(*v));
    if (auto v = take("world_d")) c.world.d = parse_int64(*v);
    if (auto v = take("world_m")) c.world.m = parse_int64(*v);
    if (auto v = take("world_a")) c.world.a = parse_double(*v);
    if (auto v = take("world_b")) c.world.b = parse_double(*v);
    if (auto v = take("world_frac_good")) c.world.frac_good = parse_double(*v);
    if (auto v = take("world_sigma")) c.world.sigma = parse_double(*v);
    if (auto v = take("world_beta_scale")) c.world.beta_scale = parse_double(*v);
    if (auto v = take("world_seed")) c.world.seed = parse_uint64(*v);
    if (auto v = take("output_dir")) c.output_dir = *v;
    if (auto v = take("responses")) c.responses_path = *v;
    if (auto v = take("candidate_responses")) c.candidate_responses_path = *v;
    if (auto v = take("candidates_out")) c.candidates_out = *v;
  } catch (const parse_error& e) {
    throw invalid_parameter_error(std::string("config: ") + e.what());
  }
  if (!merged.empty())
    throw invalid_parameter_error("config: unknown key '" + merged.begin()->first +
                                  "'");
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Run record parsing

inline RunRecord deserialize_run_record(std::string_view content) {
  const auto lines = split(content, '\n');
  if (lines.empty() || trim(lines[0]) != kRunTag)
    throw parse_error("not a run record (expected leading '" + std::string(kRunTag) +
                          "')",
                      1);
  // carve into sections
  std::vector<std::pair<std::string, std::string>> sections;
  std::string current;
  std::string body;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view t = trim(lines[i]);
    if (!t.empty() && t.front() == '[' && t.back() == ']') {
      if (!current.empty()) sections.emplace_back(current, body);
      current = std::string(t.substr(1, t.size() - 2));
      body.clear();
    } else {
      body += std::string(lines[i]);
      body += '\n';
    }
  }
  if (!current.empty()) sections.emplace_back(current, body);

  RunRecord r;
  bool got_config = false, got_model = false;
  for (const auto& [name, text] : sections) {
    if (name == "config") {
      r.config = build_run_config(parse_kv(text));
      got_config = true;
    } else if (name == "model") {
      r.model = deserialize_model(text);
      got_model = true;
    } else if (name == "diagnostics") {
      detail::KvReader kv(parse_kv(text));
      r.diagnostics.holdout_mse = parse_double(kv.take("holdout_mse"));
      r.diagnostics.spearman_rho = parse_double(kv.take("spearman_rho"));
      r.diagnostics.spearman_defined = parse_int64(kv.take("spearman_defined")) != 0;
      r.have_diagnostics = true;
    } else if (name == "selection") {
      detail::KvReader kv(parse_kv(text));
      r.selection_pending = parse_int64(kv.take("pending")) != 0;
      if (!r.selection_pending) {
        r.selection.gamma = parse_double(kv.take("gamma"));
        std::vector<TaskId> ids;
        for (std::string_view tok : split(kv.take("tasks"), ' ')) {
          tok = trim(tok);
          if (!tok.empty()) ids.push_back(static_cast<TaskId>(parse_int64(tok)));
        }
        r.selection.selected = Subset(std::move(ids));
        r.selection.value = parse_double(kv.take("value"));
        r.selection.evaluations = parse_int64(kv.take("evaluations"));
      }
      r.eval_source = kv.take_or("eval_source", "");
    } else if (name == "final") {
      detail::KvReader kv(parse_kv(text));
      r.final_f = parse_double(kv.take("final_f"));
      r.stl_f = parse_double(kv.take("stl_f"));
      r.naive_all_f = parse_double(kv.take("naive_all_f"));
      r.linear_floor = parse_double(kv.take("linear_floor"));
    } else if (name == "separation") {
      detail::KvReader kv(parse_kv(text));
      r.separation.separated = parse_int64(kv.take("separated")) != 0;
      r.separation.vacuous = parse_int64(kv.take("vacuous")) != 0;
      r.separation.margin = parse_double(kv.take("margin"));
      r.separation.max_good = parse_double(kv.take("max_good"));
      r.separation.min_bad = parse_double(kv.take("min_bad"));
      r.have_separation = true;
    } else if (name == "holdout") {
      long line_no = 0;
      for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        if (trim(raw).empty()) continue;
        const auto fields = split(raw, '\t');
        if (fields.size() != 3)
          throw parse_error("holdout row needs id, tasks, value", line_no);
        std::vector<TaskId> ids;
        for (std::string_view tok : split(trim(fields[1]), ' ')) {
          tok = trim(tok);
          if (!tok.empty()) ids.push_back(static_cast<TaskId>(parse_int64(tok)));
        }
        r.holdout.push_back(
            {Subset(std::move(ids)), parse_double(trim(fields[2]), line_no), "record"});
      }
    } else if (name == "warnings") {
      for (std::string_view raw : split(text, '\n'))
        if (!trim(raw).empty()) r.warnings.emplace_back(trim(raw));
    } else if (name == "timings") {
      detail::KvReader kv(parse_kv(text));
      r.timings.sample_ms = parse_double(kv.take("sample_ms"));
      r.timings.eval_ms = parse_double(kv.take("eval_ms"));
      r.timings.fit_ms = parse_double(kv.take("fit_ms"));
      r.timings.select_ms = parse_double(kv.take("select_ms"));
      r.timings.final_ms = parse_double(kv.take("final_ms"));
    } else {
      throw parse_error("unknown run record section [" + name + "]");
    }
  }
  if (!got_config || !got_model)
    throw parse_error("run record needs [config] and [model] sections");
  return r;
}

inline RunRecord load_run_record(const std::filesystem::path& path) {
  return deserialize_run_record(read_file(path));
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportKind { convergence, separation, transfer_f1 };

namespace detail {

/// Configs must agree on everything except the study axes (n, seed,
/// world_seed). Returns the sorted list of offending keys.
inline std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  auto kv_of = [](const RunConfig& c) {
    std::map<std::string, std::string> m;
    for (const auto& [k, v] : parse_kv(serialize_config_body(c, /*for_hash=*/true)))
      m[k] = v;
    m.erase("n");
    m.erase("seed");
    m.erase("world_seed");
    return m;
  };
  const auto ma = kv_of(a), mb = kv_of(b);
  std::set<std::string> keys;
  for (const auto& [k, v] : ma) keys.insert(k);
  for (const auto& [k, v] : mb) keys.insert(k);
  std::vector<std::string> diff;
  for (const auto& k : keys) {
    const auto ia = ma.find(k), ib = mb.find(k);
    const std::string va = ia == ma.end() ? "<absent>" : ia->second;
    const std::string vb = ib == mb.end() ? "<absent>" : ib->second;
    if (va != vb) diff.push_back(k + " (" + va + " vs " + vb + ")");
  }
  return diff;
}

}  // namespace detail

/// Renders a study table from compatible run records. Rows are
/// deterministically sorted; the first line is a '#' header.
inline std::string report(const std::vector<RunRecord>& records, ReportKind kind) {
  if (records.empty()) throw invalid_parameter_error("report: no records");
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto diff = detail::config_diff(records[0].config, records[i].config);
    if (!diff.empty()) {
      std::string msg = "report: record " + std::to_string(i + 1) +
                        " is incompatible with record 1:";
      for (const auto& d : diff) msg += " " + d + ";";
      throw invalid_parameter_error(msg);
    }
  }
  std::vector<const RunRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RunRecord* a, const RunRecord* b) {
                     if (a->config.n != b->config.n) return a->config.n < b->config.n;
                     return a->config.seed < b->config.seed;
                   });

  std::string out;
  switch (kind) {
    case ReportKind::convergence: {
      out = "#n\tholdout_mse\tfloor\n";
      for (const auto* r : sorted) {
        if (!r->have_diagnostics)
          throw invalid_parameter_error(
              "report: convergence needs holdout diagnostics on every record");
        out += std::to_string(r->config.n) + '\t' +
               fmt_double(r->diagnostics.holdout_mse) + '\t' +
               fmt_double(r->linear_floor) + '\n';
      }
      break;
    }
    case ReportKind::separation: {
      out = "#seed\tmargin\tseparated\tvacuous\n";
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const RunRecord* a, const RunRecord* b) {
                         return a->config.seed < b->config.seed;
                       });
      for (const auto* r : sorted) {
        if (!r->have_separation)
          throw invalid_parameter_error(
              "report: separation needs synthetic-mode records");
        out += std::to_string(r->config.seed) + '\t' +
               fmt_double(r->separation.margin) + '\t' +
               (r->separation.separated ? "1" : "0") + '\t' +
               (r->separation.vacuous ? "1" : "0") + '\n';
      }
      break;
    }
    case ReportKind::transfer_f1: {
      out = "#n\tseed\tf1\tholdout_size\n";
      for (const auto* r : sorted) {
        if (r->holdout.empty() || !std::isfinite(r->stl_f))
          throw invalid_parameter_error(
              "report: transfer_f1 needs holdout records and a finite "
              "target-only baseline");
        std::vector<TransferLabel> actual, predicted;
        actual.reserve(r->holdout.size());
        predicted.reserve(r->holdout.size());
        for (const auto& h : r->holdout) {
          actual.push_back(classify_transfer(h.value, r->stl_f));
          predicted.push_back(
              classify_transfer(predict(r->model, h.subset), r->stl_f));
        }
        out += std::to_string(r->config.n) + '\t' + std::to_string(r->config.seed) +
               '\t' + fmt_double(f1_minority(predicted, actual)) + '\t' +
               std::to_string(r->holdout.size()) + '\n';
      }
      break;
    }
  }
  return out;
}

}  // namespace tasksel
