// Command-line front end: world generation, subset sampling, measurement,
// surrogate fitting, threshold selection, brute-force search and study
// reports, all over the library's deterministic primitives.
//
// Exit codes: 0 ok, 2 invalid arguments or config, 3 singular fit,
// 4 oracle protocol violation, 5 file I/O failure.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tasksel/tasksel.hpp"

namespace fs = std::filesystem;
using namespace tasksel;

namespace {

std::vector<TaskId> parse_task_list(const std::string& s) {
  std::vector<TaskId> ids;
  for (std::string_view tok : split(s, ' ')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    ids.push_back(static_cast<TaskId>(parse_int64(tok)));
  }
  return ids;
}

void setup_gen_world(CLI::App& app) {
  auto* sub = app.add_subcommand("gen-world",
                                 "Write a synthetic world parameter file");
  auto params = std::make_shared<WorldParams>();
  params->beta_scale = 1.0;
  auto out = std::make_shared<std::string>();
  auto dump = std::make_shared<std::string>();
  sub->add_option("--k", params->k, "source task count")->required();
  sub->add_option("--p", params->p, "feature dimension")->required();
  sub->add_option("--d", params->d, "training rows per task")->required();
  sub->add_option("--m", params->m, "target validation rows")->required();
  sub->add_option("--a", params->a, "good coefficient radius")->required();
  sub->add_option("--b", params->b, "bad coefficient radius")->required();
  sub->add_option("--frac-good", params->frac_good, "fraction of good tasks")
      ->required();
  sub->add_option("--sigma", params->sigma, "label noise scale")->required();
  sub->add_option("--beta-scale", params->beta_scale,
                  "norm of the target coefficients");
  sub->add_option("--seed", params->seed, "world seed");
  sub->add_option("--out", *out, "world file to write")->required();
  sub->add_option("--dump", *dump, "also dump the full datasets to this file");
  sub->callback([params, out, dump] {
    validate(*params);
    save_world_params(*params, *out);
    std::cout << "world " << *out << "\ngood_count " << params->good_count()
              << "\n";
    if (!dump->empty()) {
      atomic_write_file(*dump, dump_world_data(generate_world(*params)));
      std::cout << "dump " << *dump << "\n";
    }
  });
}

void setup_sample(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "sample", "Sample training (and holdout) subsets into a request file");
  struct Args {
    int k = 0, alpha = 0;
    std::int64_t n = 0, holdout_n = 0;
    std::uint64_t seed = 0;
    double downsample = 1.0;
    std::string out;
  };
  auto a = std::make_shared<Args>();
  sub->add_option("--k", a->k, "source task count")->required();
  sub->add_option("--alpha", a->alpha, "subset size")->required();
  sub->add_option("--n", a->n, "training draws")->required();
  sub->add_option("--holdout-n", a->holdout_n,
                  "holdout draws appended after the training ids");
  sub->add_option("--seed", a->seed, "sampling seed");
  sub->add_option("--downsample", a->downsample,
                  "downsample fraction stamped on each request");
  sub->add_option("--out", a->out, "request file to write")->required();
  sub->callback([a] {
    if (a->holdout_n < 0)
      throw invalid_parameter_error("sample: holdout-n must be >= 0");
    const auto train =
        sample_subsets(a->k, a->alpha, a->n, a->seed, StreamTag::subset_draw);
    const std::vector<Subset> holdout =
        a->holdout_n > 0 ? sample_subsets(a->k, a->alpha, a->holdout_n, a->seed,
                                          StreamTag::holdout_draw)
                         : std::vector<Subset>{};
    std::vector<OracleRequest> reqs;
    reqs.reserve(train.size() + holdout.size());
    std::int64_t id = 0;
    for (const auto& s : train) reqs.push_back({++id, s, a->downsample, "train"});
    for (const auto& s : holdout)
      reqs.push_back({++id, s, a->downsample, "holdout"});
    write_request_lines(reqs, a->out);
    std::cout << "requests " << reqs.size() << "\n";
  });
}

void setup_eval(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "eval", "Answer a request file: synthetic world or echo stub");
  struct Args {
    std::string requests, out, world;
    bool echo_size = false;
    int workers = 1;
  };
  auto a = std::make_shared<Args>();
  sub->add_option("--requests", a->requests, "request file")->required();
  sub->add_option("--out", a->out, "response file to write")->required();
  sub->add_option("--world", a->world, "world parameter file to measure in");
  sub->add_flag("--echo-size", a->echo_size,
                "stub oracle: value = subset size");
  sub->add_option("--workers", a->workers, "evaluation threads");
  sub->callback([a] {
    if (a->world.empty() == !a->echo_size)
      throw invalid_parameter_error(
          "eval: pass exactly one of --world or --echo-size");
    const auto requests = parse_requests(a->requests);
    std::vector<OracleResponse> responses(requests.size());
    if (a->echo_size) {
      for (std::size_t i = 0; i < requests.size(); ++i)
        responses[i] = {requests[i].id,
                        static_cast<double>(requests[i].tasks.size()), true, ""};
    } else {
      const SyntheticWorld world = generate_world(load_world_params(a->world));
      parallel_for(static_cast<std::int64_t>(requests.size()), a->workers,
                   [&](std::int64_t i) {
                     const auto idx = static_cast<std::size_t>(i);
                     const auto& r = requests[idx];
                     try {
                       responses[idx] = {
                           r.id, evaluate_f(world, r.tasks, r.downsample), true, ""};
                     } catch (const std::exception& e) {
                       responses[idx] = {r.id, 0.0, false, e.what()};
                     }
                   });
    }
    write_responses(responses, a->out);
    std::cout << "responses " << responses.size() << "\n";
  });
}

void setup_fit(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "fit", "Fit the additive surrogate from measured requests/responses");
  struct Args {
    int k = 0;
    std::string requests, responses, out;
    double ridge = 0.0;
    std::uint64_t seed = 0;
    int workers = 1;
  };
  auto a = std::make_shared<Args>();
  sub->add_option("--k", a->k, "source task count")->required();
  sub->add_option("--requests", a->requests, "request file")->required();
  sub->add_option("--responses", a->responses, "response file")->required();
  sub->add_option("--out", a->out, "model file to write")->required();
  sub->add_option("--ridge", a->ridge, "ridge added to the normal equations");
  sub->add_option("--seed", a->seed, "sampling seed recorded in the model");
  sub->add_option("--workers", a->workers, "fit threads");
  sub->callback([a] {
    const auto requests = parse_requests(a->requests);
    const MatchResult match = read_responses(a->responses, requests);
    if (!match.done)
      std::cerr << "warning: no #done marker; using a partial batch\n";
    for (auto id : match.failed_ids)
      std::cerr << "warning: dropping failed measurement id " << id << "\n";
    for (auto id : match.missing_ids)
      std::cerr << "warning: no response for request id " << id << "\n";
    FitOptions opts;
    opts.ridge = a->ridge;
    opts.seed = a->seed;
    opts.workers = a->workers;
    const SurrogateModel model = fit_from_records(match.records, a->k, opts);
    save_model(model, a->out);
    std::cout << "n " << model.n << "\nalpha " << model.alpha << "\ntrain_mse "
              << fmt_double(model.train_mse) << "\ncondition "
              << fmt_double(model.condition) << "\nmodel " << a->out << "\n";
  });
}

void setup_predict(CLI::App& app) {
  auto* sub =
      app.add_subcommand("predict", "Surrogate value of one subset");
  auto model_path = std::make_shared<std::string>();
  auto tasks = std::make_shared<std::string>();
  sub->add_option("--model", *model_path, "model file")->required();
  sub->add_option("--tasks", *tasks,
                  "space-separated task ids (empty for the empty subset)");
  sub->callback([model_path, tasks] {
    const SurrogateModel model = load_model(*model_path);
    std::cout << fmt_double(predict(model, Subset(parse_task_list(*tasks))))
              << "\n";
  });
}

void setup_select(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "select", "Pick the best gamma threshold by validation value");
  struct Args {
    std::string model, grid, world, candidate_responses, emit, out;
    int workers = 1;
  };
  auto a = std::make_shared<Args>();
  sub->add_option("--model", a->model, "model file")->required();
  sub->add_option("--grid", a->grid, "comma-separated gamma grid");
  sub->add_option("--world", a->world, "world file: evaluate candidates there");
  sub->add_option("--candidate-responses", a->candidate_responses,
                  "measured candidate responses (ids from --emit-candidates)");
  sub->add_option("--emit-candidates", a->emit,
                  "write the candidate request file and stop");
  sub->add_option("--out", a->out, "also write the selection to this file");
  sub->add_option("--workers", a->workers, "evaluation threads");
  sub->callback([a] {
    const SurrogateModel model = load_model(a->model);
    const std::vector<double> grid =
        a->grid.empty() ? default_gamma_grid() : parse_gamma_grid(a->grid);
    const std::vector<Subset> candidates =
        pipeline_candidate_subsets(model.theta, grid, model.k);
    if (!a->emit.empty()) {
      write_requests(candidates, a->emit, 1.0, "candidate");
      std::cout << "candidates " << candidates.size() << " " << a->emit << "\n";
      return;
    }
    GridSearchResult result;
    if (!a->world.empty()) {
      const SyntheticWorld world = generate_world(load_world_params(a->world));
      result = grid_search_gamma(
          model.theta, [&](const Subset& s) { return evaluate_f(world, s, 1.0); },
          grid, a->workers);
    } else if (!a->candidate_responses.empty()) {
      std::vector<OracleRequest> creqs;
      creqs.reserve(candidates.size());
      std::int64_t id = 0;
      for (const auto& s : candidates) creqs.push_back({++id, s, 1.0, "candidate"});
      const MatchResult match =
          read_responses(a->candidate_responses, creqs, "candidate");
      std::map<Subset, double> value_of;
      for (const auto& r : match.records) value_of.emplace(r.subset, r.value);
      result = grid_search_gamma(
          model.theta,
          [&](const Subset& s) {
            const auto it = value_of.find(s);
            if (it == value_of.end())
              throw protocol_error("candidate measurement missing for subset " +
                                   s.str());
            return it->second;
          },
          grid, 1);
    } else {
      throw invalid_parameter_error(
          "select: pass --world, --candidate-responses, or --emit-candidates");
    }
    std::string text = "gamma " + fmt_double(result.gamma) + "\ntasks";
    for (TaskId t : result.selected.members()) text += " " + std::to_string(t);
    text += "\nvalue " + fmt_double(result.value) + "\nevaluations " +
            std::to_string(result.evaluations) + "\n";
    std::cout << text;
    if (!a->out.empty()) atomic_write_file(a->out, text);
  });
}

void setup_exhaustive(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "exhaustive", "Brute-force best subset in a synthetic world");
  struct Args {
    std::string world, out;
    int max_alpha = -1;
    int workers = 1;
  };
  auto a = std::make_shared<Args>();
  sub->add_option("--world", a->world, "world parameter file")->required();
  sub->add_option("--max-alpha", a->max_alpha,
                  "cap the enumerated subset size (default: no cap)");
  sub->add_option("--workers", a->workers, "evaluation threads");
  sub->add_option("--out", a->out, "write the full value table here");
  sub->callback([a] {
    const SyntheticWorld world = generate_world(load_world_params(a->world));
    const ExhaustiveReport rep = exhaustive_search(
        [&](const Subset& s) { return evaluate_f(world, s, 1.0); },
        world.params.k, a->max_alpha, a->workers);
    std::cout << "best";
    for (TaskId t : rep.best.members()) std::cout << " " << t;
    std::cout << "\nbest_value " << fmt_double(rep.best_value) << "\nstl "
              << fmt_double(rep.stl_value) << "\nfull "
              << fmt_double(rep.full_value) << "\nevaluated " << rep.table.size()
              << "\n";
    if (!a->out.empty()) {
      std::string table = "#tasks\tvalue\n";
      for (const auto& [s, v] : rep.table) {
        const auto& m = s.members();
        for (std::size_t j = 0; j < m.size(); ++j) {
          if (j) table += ' ';
          table += std::to_string(m[j]);
        }
        table += '\t';
        table += fmt_double(v);
        table += '\n';
      }
      atomic_write_file(a->out, table);
    }
  });
}

void setup_run(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "run", "Full pipeline: sample, measure, fit, diagnose, select, compare");
  auto cfg_path = std::make_shared<std::string>();
  sub->add_option("--config", *cfg_path, "config file of 'key value' lines");
  // every config key is also a flag; flags override the file
  static const char* keys[] = {
      "mode",        "k",       "alpha",           "n",
      "seed",        "holdout_n", "downsample",    "ridge",
      "workers",     "floor",   "gamma_grid",      "world_p",
      "world_d",     "world_m", "world_a",         "world_b",
      "world_frac_good", "world_sigma", "world_beta_scale", "world_seed",
      "output_dir",  "responses", "candidate_responses", "candidates_out"};
  auto overrides =
      std::make_shared<std::map<std::string, std::optional<std::string>>>();
  for (const char* key : keys) {
    std::string flag = "--" + std::string(key);
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    sub->add_option(flag, (*overrides)[key], std::string("config key ") + key);
  }
  sub->callback([cfg_path, overrides] {
    std::vector<std::pair<std::string, std::string>> kv;
    if (!cfg_path->empty()) kv = parse_kv(read_file(*cfg_path));
    for (const auto& [key, value] : *overrides)
      if (value.has_value()) kv.emplace_back(key, *value);
    const RunConfig config = build_run_config(kv);
    const RunRecord rec = run_pipeline(config);
    for (const auto& w : rec.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "eval_source " << rec.eval_source << "\n";
    if (rec.have_diagnostics) {
      std::cout << "holdout_mse " << fmt_double(rec.diagnostics.holdout_mse)
                << "\nspearman_rho "
                << (rec.diagnostics.spearman_defined
                        ? fmt_double(rec.diagnostics.spearman_rho)
                        : std::string("undefined"))
                << "\n";
    }
    if (rec.selection_pending) {
      std::cout << "selection pending\n";
    } else {
      std::cout << "gamma " << fmt_double(rec.selection.gamma) << "\ntasks";
      for (TaskId t : rec.selection.selected.members()) std::cout << " " << t;
      std::cout << "\nfinal_f " << fmt_double(rec.final_f) << "\nstl_f "
                << fmt_double(rec.stl_f) << "\nnaive_all_f "
                << fmt_double(rec.naive_all_f) << "\n";
    }
    if (rec.have_separation)
      std::cout << "separated " << (rec.separation.separated ? 1 : 0)
                << "\nmargin " << fmt_double(rec.separation.margin) << "\n";
    if (!config.output_dir.empty())
      std::cout << "record " << persist_run(rec).string() << "\n";
  });
}

void setup_report(CLI::App& app) {
  auto* sub = app.add_subcommand(
      "report", "Tabulate a study from persisted run records");
  struct Args {
    std::string kind, out;
    std::vector<std::string> paths;
  };
  auto a = std::make_shared<Args>();
  sub->add_option("--kind", a->kind, "convergence | separation | transfer-f1")
      ->required();
  sub->add_option("--out", a->out, "write the table here (default: stdout)");
  sub->add_option("paths", a->paths, "record files or directories of runs")
      ->required();
  sub->callback([a] {
    ReportKind kind;
    if (a->kind == "convergence")
      kind = ReportKind::convergence;
    else if (a->kind == "separation")
      kind = ReportKind::separation;
    else if (a->kind == "transfer-f1")
      kind = ReportKind::transfer_f1;
    else
      throw invalid_parameter_error("report: unknown kind '" + a->kind + "'");
    std::vector<std::string> files;
    for (const auto& p : a->paths) {
      if (fs::is_directory(p)) {
        std::vector<std::string> found;
        for (const auto& entry : fs::recursive_directory_iterator(p))
          if (entry.is_regular_file() && entry.path().filename() == "record.tsv")
            found.push_back(entry.path().string());
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      } else {
        files.push_back(p);
      }
    }
    if (files.empty())
      throw invalid_parameter_error("report: no record files found");
    std::vector<RunRecord> records;
    records.reserve(files.size());
    for (const auto& f : files) records.push_back(load_run_record(f));
    const std::string table = report(records, kind);
    if (a->out.empty())
      std::cout << table;
    else
      atomic_write_file(a->out, table);
  });
}

int unwrap_evaluation_error(const evaluation_error& e) {
  try {
    std::rethrow_if_nested(e);
  } catch (const invalid_parameter_error&) {
    return 2;
  } catch (const singular_design_error&) {
    return 3;
  } catch (const protocol_error&) {
    return 4;
  } catch (const io_error&) {
    return 5;
  } catch (...) {
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beneficial source-task selection via an additive performance "
               "surrogate over sampled task subsets"};
  app.require_subcommand(1);
  setup_gen_world(app);
  setup_sample(app);
  setup_eval(app);
  setup_fit(app);
  setup_predict(app);
  setup_select(app);
  setup_exhaustive(app);
  setup_run(app);
  setup_report(app);

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const invalid_parameter_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const singular_design_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const protocol_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const evaluation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return unwrap_evaluation_error(e);
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
