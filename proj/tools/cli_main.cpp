/**
 * rsdiv — command-line driver for the regime-switching dividend toolkit.
 *
 * Subcommands
 *   simulate   dump raw market paths (optionally drained at a flat rate)
 *   estimate   batch parameter estimation table (windowed + EM columns)
 *   fd         finite-difference benchmark surfaces and their artifacts
 *   train      actor-critic training with checkpoint/resume
 *   evaluate   out-of-sample comparison table over frozen policies
 *
 * Shared flags: --config (JSON run file; omitted = built-in defaults),
 * --seed, --workers (0 = all cores), --out.  Exit codes: 0 success,
 * 2 configuration problem (bad flags, unreadable files, invalid values),
 * 3 numerical failure (diverged solver, degenerate estimation/report),
 * 1 unexpected internal error.
 *
 * Every artifact is a fixed-schema CSV or JSON file under the output
 * directory; reruns with the same seed reproduce them byte for byte.
 */

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rsdiv/config.hpp"
#include "rsdiv/errors.hpp"
#include "rsdiv/estimation.hpp"
#include "rsdiv/evaluation.hpp"
#include "rsdiv/fd.hpp"
#include "rsdiv/io.hpp"
#include "rsdiv/market.hpp"
#include "rsdiv/rng.hpp"
#include "rsdiv/theta_model.hpp"
#include "rsdiv/trainer.hpp"

namespace {

using namespace rsdiv;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared flag plumbing
// ---------------------------------------------------------------------------

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* out_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "Run configuration file (JSON); omitted = defaults")
        ->check(CLI::ExistingFile);
    seed_opt = cmd->add_option("--seed", seed, "Master seed override");
    workers_opt = cmd->add_option("--workers", workers,
                                  "Worker threads (0 = all cores)");
    out_opt = cmd->add_option("--out", out, "Output directory override");
  }

  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }

  RunConfig load() const {
    RunConfig rc;
    if (!config_path.empty()) rc = load_config(config_path);
    if (seed_given()) rc.seed = seed;
    if (workers_opt->count() > 0) rc.workers = workers;
    if (out_opt->count() > 0) rc.out_dir = out;
    rc.validate();
    return rc;
  }
};

int resolve_workers(int configured) {
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Creates the output directory tree; failures are configuration errors
/// (the run file promised a writable location).
fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + dir +
                      "': " + ec.message());
  return p;
}

void emit(const fs::path& file, const std::string& text) {
  write_text_file(file.string(), text);
  std::printf("wrote %s\n", file.string().c_str());
}

/// One-shot startup estimation for '--filter est': a dividend-free
/// history under the true market, run through the windowed estimator;
/// identified fields replace the corresponding true values, the rest
/// (including the discount rates, which are contractual) stay true.
EnvParams estimated_filter_env(const RunConfig& rc) {
  const TrainerConfig t = wired_trainer(rc, TrainMode::ctd, rc.env);
  return detail::reestimate_filter(rc.env, rc.env, t, rc.seed, 0);
}

/// Index-sharded deterministic parallel loop: body(i) for i in [0, n).
/// Results must be written to per-index slots by the body.
template <class Body>
void parallel_indexed(long n, int workers, const Body& body) {
  workers = static_cast<int>(std::min<long>(workers, n));
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  const long base = n / workers;
  const long rem = n % workers;
  long lo = 0;
  for (int w = 0; w < workers; ++w) {
    const long hi = lo + base + (w < rem ? 1 : 0);
    pool.emplace_back([&body, &failures, w, lo, hi] {
      try {
        for (long i = lo; i < hi; ++i) body(i);
      } catch (...) {
        failures[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
    lo = hi;
  }
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int run_simulate(const Common& common, long paths_override) {
  const RunConfig rc = common.load();
  SimConfig sim = rc.sim;
  sim.T = rc.simulate.years;
  sim.x0 = rc.simulate.x0;
  sim.validate();
  const long n = paths_override > 0 ? paths_override : rc.simulate.n_paths;

  std::vector<double> dividends;
  if (rc.simulate.dividend_rate > 0.0)
    dividends.assign(static_cast<std::size_t>(sim.n_steps()),
                     rc.simulate.dividend_rate);

  const fs::path dir = ensure_dir(rc.out_dir + "/paths");
  long ruined = 0;
  for (long i = 0; i < n; ++i) {
    Rng chain(Rng::stream_seed(rc.seed, 2 * static_cast<std::uint64_t>(i)));
    Rng brown(
        Rng::stream_seed(rc.seed, 2 * static_cast<std::uint64_t>(i) + 1));
    const auto regimes =
        simulate_regime_chain(rc.env, sim.n_steps(), sim.dt, chain);
    const RawPath path =
        simulate_surplus(rc.env, rc.control, sim, regimes, dividends, brown);
    if (!path.alive) ++ruined;
    char name[32];
    std::snprintf(name, sizeof(name), "path_%05ld.csv", i);
    write_text_file((dir / name).string(), raw_path_csv(path));
  }
  std::printf("wrote %ld path files to %s (%ld absorbed before %g years)\n",
              n, dir.string().c_str(), ruined, sim.T);
  return 0;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int run_estimate(const Common& common, long paths_override) {
  const RunConfig rc = common.load();
  SimConfig sim = rc.sim;
  sim.T = rc.estimation.years;
  sim.x0 = rc.estimation.x0;
  sim.validate();
  const long n = paths_override > 0 ? paths_override : rc.estimation.n_paths;
  const bool run_em = rc.estimation.run_em;

  std::vector<EstimationReport> heur(static_cast<std::size_t>(n));
  std::vector<EstimationReport> em(run_em ? static_cast<std::size_t>(n) : 0);

  parallel_indexed(n, resolve_workers(rc.workers), [&](long i) {
    Rng chain(Rng::stream_seed(rc.seed, 2 * static_cast<std::uint64_t>(i)));
    Rng brown(
        Rng::stream_seed(rc.seed, 2 * static_cast<std::uint64_t>(i) + 1));
    const auto regimes =
        simulate_regime_chain(rc.env, sim.n_steps(), sim.dt, chain);
    const RawPath path =
        simulate_surplus(rc.env, rc.control, sim, regimes, {}, brown);
    heur[static_cast<std::size_t>(i)] =
        heuristic_estimate(path.surplus, sim.dt, rc.env,
                           rc.estimation.heuristic, /*require_complete=*/false);
    if (run_em)
      em[static_cast<std::size_t>(i)] =
          em_estimate(path.surplus, sim.dt, rc.env, rc.estimation.em);
  });

  const fs::path dir = ensure_dir(rc.out_dir);
  emit(dir / "table1.csv", estimation_table_csv(rc.env, heur, em));

  long complete = 0;
  for (const auto& r : heur)
    if (r.complete()) ++complete;
  std::printf("estimated %ld histories of %g years (%ld/%ld fully "
              "identified by the windowed rule%s)\n",
              n, sim.T, complete, n, run_em ? ", EM columns included" : "");
  return 0;
}

// ---------------------------------------------------------------------------
// fd
// ---------------------------------------------------------------------------

int run_fd(const Common& common, bool sweep) {
  const RunConfig rc = common.load();

  std::vector<FdSolution> runs;
  if (sweep) {
    for (double a : {0.6, 1.0, 3.0})
      for (double s : {0.3, 0.8}) {
        EnvParams env = rc.env;
        env.sigma = s;
        runs.push_back(calibrate_splits(env, rc.control.lambda, a, rc.fd));
      }
  } else {
    runs.push_back(
        calibrate_splits(rc.env, rc.control.lambda, rc.control.cap_a, rc.fd));
  }

  // The standalone solution JSON always describes the configured case;
  // in sweep mode that member is reused when the grid covers it.
  const FdSolution* primary = nullptr;
  for (const auto& r : runs)
    if (r.cap_a == rc.control.cap_a && r.env.sigma == rc.env.sigma)
      primary = &r;
  FdSolution extra;
  if (primary == nullptr) {
    extra =
        calibrate_splits(rc.env, rc.control.lambda, rc.control.cap_a, rc.fd);
    primary = &extra;
  }

  const fs::path dir = ensure_dir(rc.out_dir);
  emit(dir / "fd_solution.json", fd_solution_json(*primary));
  emit(dir / "fd_surface.csv", fd_surface_csv(runs));
  emit(dir / "fd_summary.csv", fd_summary_csv(runs));
  emit(dir / "fd_ols.csv", fd_ols_csv(runs));

  for (const auto& r : runs)
    std::printf("cap_a=%.2f sigma=%.2f kappa=(%.6f, %.6f) v(x0,p0)=%.6f "
                "stationary=%d residuals=(%.3e, %.3e)\n",
                r.cap_a, r.env.sigma, r.kappa1, r.kappa2,
                r.at(rc.sim.x0, rc.sim.p0).v, r.stationary ? 1 : 0,
                r.residual0, r.residual1);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int run_train(const Common& common, const std::string& mode_str,
              const std::string& filter_str, const std::string& resume_path,
              long iters_override) {
  const RunConfig rc = common.load();
  ModeChoice mode = parse_mode_name(mode_str);
  FilterChoice fchoice = parse_filter_name(filter_str);

  ThetaParams start{};
  bool have_start = false;
  long start_iteration = 0;
  std::uint64_t seed = rc.seed;
  EnvParams filter_env = rc.env;
  EnvParams anchor = rc.env;

  if (!resume_path.empty()) {
    // A checkpoint pins the scheme, seed, and filter state of the original
    // run; command-line scheme flags are ignored so the continuation is
    // bit-identical to an uninterrupted run (an explicit --seed still wins).
    const Checkpoint c = parse_checkpoint(read_text_file(resume_path));
    mode = parse_mode_name(c.mode);
    fchoice = parse_filter_name(c.filter);
    start = c.theta;
    have_start = true;
    start_iteration = c.iterations_done;
    if (!common.seed_given()) seed = c.seed;
    filter_env = c.env_filter;
    anchor = mode.anchor_estimates ? c.env_filter : rc.env;
  } else if (fchoice == FilterChoice::estimated || mode.anchor_estimates) {
    const EnvParams est = estimated_filter_env(rc);
    if (fchoice == FilterChoice::estimated) filter_env = est;
    if (mode.anchor_estimates) anchor = est;
  }

  TrainerConfig tcfg = wired_trainer(rc, mode.mode, anchor);
  if (iters_override > 0) tcfg.n_iterations = iters_override;

  const TrainResult res =
      train(tcfg, rc.env, filter_env, seed,
            have_start ? &start : nullptr, start_iteration);

  const std::string tag = mode.name + "_" + filter_name(fchoice);
  const fs::path dir = ensure_dir(rc.out_dir);
  emit(dir / ("train_log_" + tag + ".csv"), train_log_csv(res.log));

  Checkpoint out;
  out.theta = res.theta;
  out.iterations_done = tcfg.n_iterations;
  out.env_filter = res.env_filter_final;
  out.mode = mode.name;
  out.filter = filter_name(fchoice);
  out.seed = seed;
  emit(dir / ("checkpoint_" + tag + ".json"), checkpoint_json(out));

  if (!res.log.records.empty()) {
    const TrainRecord& last = res.log.records.back();
    std::printf("scheme %s: %ld -> %ld iterations, value %.6f, "
                "loss(ma) %.6f, e^gamma = (%.4f, %.4f, %.4f, %.4f, %.4f)\n",
                tag.c_str(), start_iteration, tcfg.n_iterations, last.value,
                last.loss_ma, last.e_gamma[0], last.e_gamma[1],
                last.e_gamma[2], last.e_gamma[3], last.e_gamma[4]);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int run_evaluate(const Common& common, const std::vector<std::string>& ckpts,
                 const std::string& filter_str, long paths_override,
                 bool no_benchmark) {
  const RunConfig rc = common.load();
  const FilterChoice fchoice = parse_filter_name(filter_str);

  EvalConfig ec;
  ec.sim = rc.sim;
  ec.control = rc.control;
  ec.n_paths = paths_override > 0 ? paths_override : rc.evaluate.n_paths;
  ec.workers = resolve_workers(rc.workers);

  std::vector<EvalRow> rows;
  if (!no_benchmark) {
    const FdSolution fd =
        calibrate_splits(rc.env, rc.control.lambda, rc.control.cap_a, rc.fd);
    const EnvParams fenv = fchoice == FilterChoice::estimated
                               ? estimated_filter_env(rc)
                               : rc.env;
    rows.push_back(
        {"optimal", filter_name(fchoice), evaluate(fd, rc.env, fenv, ec,
                                                   rc.seed)});
  }
  for (const auto& path : ckpts) {
    const Checkpoint c = parse_checkpoint(read_text_file(path));
    const ThetaModel model(c.theta, rc.env, rc.control,
                           rc.trainer.quadrature);
    rows.push_back(
        {c.mode, c.filter, evaluate(model, rc.env, c.env_filter, ec,
                                    rc.seed)});
  }
  if (rows.empty())
    throw ConfigError(
        "nothing to evaluate: pass checkpoints or drop --no-benchmark");

  const fs::path dir = ensure_dir(rc.out_dir);
  const std::string table = evaluation_table_csv(rows);
  emit(dir / "table3.csv", table);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "eval_%02zu_%s_%s.json", i,
                  rows[i].policy.c_str(), rows[i].filter.c_str());
    write_text_file((dir / name).string(), eval_report_json(rows[i]));
  }
  std::printf("%s", table.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regime-switching dividend control: simulation, estimation, "
               "benchmark solver, training, and evaluation"};
  app.require_subcommand(0, 1);
  std::string init_config_path;
  app.add_option("--init-config", init_config_path,
                 "Write the built-in default configuration (the reference "
                 "experiment) to PATH and exit");

  Common c_sim, c_est, c_fd, c_train, c_eval;
  long sim_paths = 0, est_paths = 0, train_iters = 0, eval_paths = 0;
  bool fd_sweep = false, eval_no_benchmark = false;
  std::string train_mode = "ctd", train_filter = "true", train_resume;
  std::string eval_filter = "true";
  std::vector<std::string> eval_ckpts;

  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Dump raw market paths as CSV");
  c_sim.attach(sim_cmd);
  sim_cmd->add_option("--paths", sim_paths, "Number of paths (override)");

  CLI::App* est_cmd = app.add_subcommand(
      "estimate", "Parameter estimation table over a path batch");
  c_est.attach(est_cmd);
  est_cmd->add_option("--paths", est_paths,
                      "Number of histories (override; 1 = single-path mode)");

  CLI::App* fd_cmd = app.add_subcommand(
      "fd", "Finite-difference benchmark surfaces and fits");
  c_fd.attach(fd_cmd);
  fd_cmd->add_flag("--sweep", fd_sweep,
                   "Solve the cap/volatility figure grid "
                   "{0.6,1,3}x{0.3,0.8} instead of the configured case");

  CLI::App* train_cmd =
      app.add_subcommand("train", "Actor-critic training run");
  c_train.attach(train_cmd);
  train_cmd->add_option("--mode", train_mode,
                        "Update rule: ml, ctd, or ctd-star");
  train_cmd->add_option("--filter", train_filter,
                        "Belief filter parameters: true or est");
  train_cmd->add_option("--resume", train_resume,
                        "Checkpoint file to continue from")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--iterations", train_iters,
                        "Iteration count (override)");

  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "Out-of-sample comparison table over frozen policies");
  c_eval.attach(eval_cmd);
  eval_cmd->add_option("checkpoints", eval_ckpts,
                       "Checkpoint files, one table row each");
  eval_cmd->add_option("--filter", eval_filter,
                       "Filter for the benchmark row: true or est");
  eval_cmd->add_option("--paths", eval_paths, "Test paths (override)");
  eval_cmd->add_flag("--no-benchmark", eval_no_benchmark,
                     "Skip the finite-difference benchmark row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!init_config_path.empty()) {
      save_config(init_config_path, RunConfig{});
      std::printf("wrote %s\n", init_config_path.c_str());
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::fprintf(stderr, "A subcommand is required\n"
                           "Run with --help for more information.\n");
      return 2;
    }
    if (sim_cmd->parsed()) return run_simulate(c_sim, sim_paths);
    if (est_cmd->parsed()) return run_estimate(c_est, est_paths);
    if (fd_cmd->parsed()) return run_fd(c_fd, fd_sweep);
    if (train_cmd->parsed())
      return run_train(c_train, train_mode, train_filter, train_resume,
                       train_iters);
    if (eval_cmd->parsed())
      return run_evaluate(c_eval, eval_ckpts, eval_filter, eval_paths,
                          eval_no_benchmark);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
