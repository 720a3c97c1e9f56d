#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oracle_values.hpp"
#include "rsdiv/config.hpp"
#include "rsdiv/evaluation.hpp"
#include "rsdiv/fd.hpp"
#include "rsdiv/io.hpp"

using namespace rsdiv;
using Catch::Approx;

namespace {

EnvParams reference_env() { return EnvParams{}; }

/// Bitwise double equality (NaN-safe, distinguishes signed zeros): the
/// right notion for determinism checks.
bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool reports_equal(const EvalReport& a, const EvalReport& b) {
  return same_bits(a.mean_value, b.mean_value) &&
         same_bits(a.var_value, b.var_value) && same_bits(a.snr, b.snr) &&
         same_bits(a.sharpe_sr, b.sharpe_sr) &&
         same_bits(a.sharpe_ri, b.sharpe_ri) &&
         same_bits(a.mean_dividend, b.mean_dividend) &&
         a.n_paths == b.n_paths && a.n_ruined == b.n_ruined &&
         a.pooled_steps == b.pooled_steps && same_bits(a.x0, b.x0) &&
         same_bits(a.p0, b.p0) && same_bits(a.horizon, b.horizon) &&
         same_bits(a.dt, b.dt);
}

/// Benchmark-shaped surrogate policy: exponent rates at the true
/// parameters, belief profiles fit to the calibrated mode solutions.
/// Built once and shared across the evaluation cases.
struct Surrogate {
  FdSolution sol;
  ThetaParams theta;
};

const Surrogate& surrogate() {
  static const Surrogate cached = [] {
    Surrogate out;
    const EnvParams env = reference_env();
    FdConfig fdc;
    fdc.grid.m = 2000;
    out.sol = calibrate_splits(env, 1.0, 1.0, fdc);
    const int ns = 201;
    std::vector<double> t1(ns), t2(ns);
    for (int s = 0; s < ns; ++s) {
      const double p = double(s) / (ns - 1);
      t1[s] = FdSolution::interp(out.sol.g1, out.sol.grid, p);
      t2[s] = FdSolution::interp(out.sol.g2, out.sol.grid, p);
    }
    const double f0 = f_lambda(0.0, 1.0, 1.0);
    out.theta = ThetaParams::initial(2);
    out.theta.phi1 = fit_phi_profile(t1, f0 / env.delta1, 2);
    out.theta.phi2 = fit_phi_profile(t2, f0 / env.delta2, 2);
    out.theta.gamma = {std::log(env.sigma * env.sigma), std::log(env.mu1),
                       std::log(env.mu2), std::log(env.q21),
                       std::log(env.q12)};
    return out;
  }();
  return cached;
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

TEST_CASE("evaluation configuration validation rejects bad settings",
          "[eval]") {
  EvalConfig good;
  REQUIRE_NOTHROW(good.validate());

  EvalConfig c = good;
  c.n_paths = 1;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.workers = 0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.sim.dt = 0.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c = good;
  c.control.lambda = 0.0;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);

  const EnvParams env = reference_env();
  ControlConfig ctrl{};
  ThetaModel model(ThetaParams::initial(2), env, ctrl, {});
  EnvParams bad_env = env;
  bad_env.sigma = -1.0;
  EvalConfig small;
  small.n_paths = 2;
  REQUIRE_THROWS_AS(evaluate(model, bad_env, env, small, 1), ConfigError);
  REQUIRE_THROWS_AS(evaluate(model, env, bad_env, small, 1), ConfigError);
}

TEST_CASE("ensemble reports are bit-identical across worker counts",
          "[eval]") {
  const EnvParams env = reference_env();
  ControlConfig ctrl{};
  ThetaModel model(ThetaParams::initial(2), env, ctrl, {});

  EvalConfig cfg;
  cfg.n_paths = 60;
  cfg.workers = 1;
  const EvalReport r1 = evaluate(model, env, env, cfg, 321);
  cfg.workers = 3;
  const EvalReport r3 = evaluate(model, env, env, cfg, 321);
  cfg.workers = 7;
  const EvalReport r7 = evaluate(model, env, env, cfg, 321);
  REQUIRE(reports_equal(r1, r3));
  REQUIRE(reports_equal(r1, r7));

  cfg.workers = 1;
  const EvalReport again = evaluate(model, env, env, cfg, 321);
  REQUIRE(reports_equal(r1, again));

  const EvalReport other = evaluate(model, env, env, cfg, 322);
  REQUIRE_FALSE(same_bits(r1.mean_value, other.mean_value));

  REQUIRE(r1.n_paths == 60);
  REQUIRE(same_bits(r1.x0, cfg.sim.x0));
  REQUIRE(same_bits(r1.dt, cfg.sim.dt));
  REQUIRE(r1.n_ruined >= 0);
  REQUIRE(r1.n_ruined <= 60);
  REQUIRE(r1.pooled_steps <= 60l * cfg.sim.n_steps());
  REQUIRE(r1.pooled_steps > 0);

  // The same contract holds for a grid-backed policy surface.
  EvalConfig quick;
  quick.n_paths = 20;
  quick.workers = 1;
  const EvalReport f1 = evaluate(surrogate().sol, env, env, quick, 11);
  quick.workers = 4;
  const EvalReport f4 = evaluate(surrogate().sol, env, env, quick, 11);
  REQUIRE(reports_equal(f1, f4));
}

TEST_CASE("signal-to-noise ratio satisfies its defining identity",
          "[eval]") {
  const EnvParams env = reference_env();
  ControlConfig ctrl{};
  ThetaModel model(ThetaParams::initial(2), env, ctrl, {});
  EvalConfig cfg;
  cfg.n_paths = 200;
  const EvalReport rep = evaluate(model, env, env, cfg, 5150);

  REQUIRE(rep.var_value > 0.0);
  REQUIRE(std::isfinite(rep.snr));
  const double lhs = rep.snr * rep.snr * rep.var_value;
  const double rhs = rep.mean_value * rep.mean_value;
  REQUIRE(std::abs(lhs - rhs) <= 1e-12 * rhs);
  REQUIRE(std::isfinite(rep.sharpe_sr));
  REQUIRE(std::isfinite(rep.sharpe_ri));
}

TEST_CASE("near-deterministic annuity limit matches the discounted closed "
          "form",
          "[eval]") {
  // Equal drifts make the filter's innovation coupling vanish exactly, so
  // the belief path is a deterministic drift-only recursion; with a
  // frozen chain (both intensities ~ 0) and the start belief pinned next
  // to one, the effective discount rate sits at the first regime's rate
  // to within ~4e-9 for the whole window.  The surface is flat at -60
  // log-weights, so its slope (~1e-26) rounds away against 1 and every
  // step pays exactly the zero-slope entropy reward; the continuation
  // value at the horizon is of the same vanishing order.  The per-path
  // value therefore collapses, path by path and bit for bit, to f(0)
  // times the discrete annuity at that rate.
  EnvParams env = reference_env();
  env.sigma = 1e-8;
  env.mu2 = env.mu1;
  env.q12 = 1e-12;
  env.q21 = 1e-12;

  ThetaParams flat = ThetaParams::initial(2);
  std::fill(flat.phi1.begin(), flat.phi1.end(), -60.0);
  std::fill(flat.phi2.begin(), flat.phi2.end(), -60.0);
  ControlConfig ctrl{};
  ThetaModel model(flat, env, ctrl, {});

  EvalConfig cfg;
  cfg.n_paths = 200;
  cfg.sim.x0 = 50.0;
  cfg.sim.p0 = 1.0 - 1e-12;
  const EvalReport rep = evaluate(model, env, env, cfg, 2024);

  const double expected = oracle::f_cap1_lam1_y0 * oracle::annuity_d1_K2520;
  REQUIRE(rep.mean_value == Approx(expected).epsilon(1e-6));
  REQUIRE(rep.n_ruined == 0);
  REQUIRE(rep.pooled_steps == 200l * cfg.sim.n_steps());
  // All paths share one reward/discount sequence, so the ensemble is
  // exactly constant (the ratio of mean to spread is honestly reported
  // as NaN in that case rather than an arbitrary large number).
  REQUIRE(rep.var_value <= 1e-20);

  // The mean sampled payout rate is -f'(0), so the discounted dividend
  // column converges on the same annuity scaled by that rate.
  const double div_expected =
      -oracle::fp_cap1_lam1_y0 * oracle::annuity_d1_K2520;
  REQUIRE(rep.mean_dividend == Approx(div_expected).epsilon(0.01));
}

TEST_CASE("benchmark-policy rollout lands on the reference statistics",
          "[eval]") {
  const EnvParams env = reference_env();
  EvalConfig cfg;
  cfg.n_paths = 2000;
  const EvalReport rep = evaluate(surrogate().sol, env, env, cfg, 99);

  REQUIRE(rep.mean_value == Approx(4.356172).epsilon(0.03));
  REQUIRE(rep.sharpe_ri == Approx(45.2549).epsilon(0.05));
  REQUIRE(rep.var_value > 0.0);
  REQUIRE(rep.snr > 0.0);
  REQUIRE(rep.mean_dividend > 0.0);
}

TEST_CASE("estimated-parameter filtering concentrates the value "
          "distribution",
          "[eval]") {
  const EnvParams env = reference_env();
  ControlConfig ctrl{};
  ThetaModel policy(surrogate().theta, env, ctrl, {});

  EvalConfig cfg;
  cfg.n_paths = 10000;
  const EvalReport under_truth = evaluate(policy, env, env, cfg, 777);

  EnvParams est = env;  // a representative mis-estimated parameter set
  est.sigma = std::sqrt(0.0901);
  est.mu1 = 1.1233;
  est.mu2 = 0.5265;
  est.q21 = 4.6918;
  est.q12 = 1.0027;
  const EvalReport under_est = evaluate(policy, env, est, cfg, 777);

  // Matched seeds: identical draws, only the filtering differs.  The
  // mis-estimated chain keeps the belief lower, discounts harder, and
  // concentrates the value distribution.
  REQUIRE(under_est.var_value < under_truth.var_value);
  REQUIRE(under_est.mean_value < under_truth.mean_value);
  REQUIRE(under_est.snr > under_truth.snr);
}

TEST_CASE("fully absorbed ensembles raise the degenerate-report error",
          "[eval]") {
  const EnvParams env = reference_env();
  ControlConfig ctrl{};
  ThetaModel model(ThetaParams::initial(2), env, ctrl, {});
  EvalConfig cfg;
  cfg.n_paths = 4;
  cfg.sim.x0 = 1e-12;  // below the ruin threshold: no path takes a step
  REQUIRE_THROWS_AS(evaluate(model, env, env, cfg, 7), DegenerateReport);
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

TEST_CASE("config serialization round-trips to identical text", "[config]") {
  RunConfig c;
  c.seed = (1ull << 63) + 7;  // exercises full 64-bit fidelity
  c.workers = 3;
  c.out_dir = "artifacts/run1";
  c.env.mu1 = 1.25;
  c.env.q12 = 0.41;
  c.sim.dt = 1.0 / 365.0;
  c.sim.p0 = 0.25;
  c.control.cap_a = 3.0;
  c.trainer.eta_gamma = {1e-2, 2e-3, 3e-3, 4e-3, 5e-3};
  c.trainer.n_iterations = 4321;
  c.trainer.reestimate_each_iteration = true;
  c.trainer.quadrature.n = 1001;
  c.estimation.n_paths = 17;
  c.estimation.heuristic.lookback = 126;
  c.estimation.em.tol = 1e-6;
  c.fd.grid.m = 500;
  c.fd.relax = 0.05;
  c.simulate.dividend_rate = 0.8;
  c.evaluate.n_paths = 2500;

  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  REQUIRE(serialize_config(back) == text);

  REQUIRE(back.seed == c.seed);
  REQUIRE(back.out_dir == c.out_dir);
  REQUIRE(same_bits(back.env.q12, c.env.q12));
  REQUIRE(same_bits(back.sim.dt, c.sim.dt));
  REQUIRE(back.trainer.eta_gamma == c.trainer.eta_gamma);
  REQUIRE(back.trainer.reestimate_each_iteration);
  REQUIRE(back.trainer.quadrature.n == 1001);
  REQUIRE(back.estimation.heuristic.lookback == 126);
  REQUIRE(back.fd.grid.m == 500);
  REQUIRE(same_bits(back.simulate.dividend_rate, 0.8));
  REQUIRE(back.evaluate.n_paths == 2500);
}

TEST_CASE("bare documents reproduce the reference defaults", "[config]") {
  const RunConfig parsed = parse_config("{}");
  const RunConfig defaults;
  REQUIRE(serialize_config(parsed) == serialize_config(defaults));
  REQUIRE_NOTHROW(parsed.validate());

  // The defaults are the benchmark experiment.
  REQUIRE(parsed.env.mu1 == 1.2);
  REQUIRE(parsed.env.mu2 == 0.5);
  REQUIRE(parsed.env.sigma == 0.3);
  REQUIRE(parsed.env.q12 == 0.36);
  REQUIRE(parsed.env.q21 == 2.89);
  REQUIRE(parsed.env.delta1 == 0.1);
  REQUIRE(parsed.env.delta2 == 0.3);
  REQUIRE(parsed.sim.x0 == 1.0);
  REQUIRE(parsed.sim.p0 == 0.5);
  REQUIRE(parsed.sim.T == 10.0);
  REQUIRE(same_bits(parsed.sim.dt, 1.0 / 252.0));
  REQUIRE(parsed.control.lambda == 1.0);
  REQUIRE(parsed.control.cap_a == 1.0);
  REQUIRE(parsed.trainer.n_iterations == 10000);
  REQUIRE(parsed.trainer.batch_size == 1);
  REQUIRE(parsed.fd.grid.m == 10000);
  REQUIRE(parsed.estimation.n_paths == 100);
  REQUIRE(parsed.estimation.years == 20.0);
  REQUIRE(parsed.evaluate.n_paths == 100000);

  // Partial documents override only what they mention.
  const RunConfig partial =
      parse_config("{\"env\": {\"sigma\": 0.8}, \"workers\": 2}");
  REQUIRE(partial.env.sigma == 0.8);
  REQUIRE(partial.env.mu1 == 1.2);
  REQUIRE(partial.workers == 2);
}

TEST_CASE("config parsing rejects malformed documents", "[config]") {
  REQUIRE_THROWS_AS(parse_config("not json"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("[1,2]"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{\"sedd\": 1}"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{\"env\": {\"mu3\": 1.0}}"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{\"seed\": \"abc\"}"), ConfigError);
  REQUIRE_THROWS_AS(parse_config("{\"env\": 3}"), ConfigError);
  REQUIRE_THROWS_AS(
      parse_config("{\"trainer\": {\"eta_gamma\": [1, 2, 3]}}"), ConfigError);
  REQUIRE_THROWS_AS(
      parse_config("{\"trainer\": {\"quadrature\": {\"m\": 10}}}"),
      ConfigError);

  // Out-of-range values pass parsing but fail validation.
  RunConfig c = parse_config("{\"control\": {\"lambda\": -1.0}}");
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training scheme names map to update rules and anchors",
          "[config]") {
  const ModeChoice ml = parse_mode_name("ml");
  REQUIRE(ml.mode == TrainMode::ml);
  REQUIRE_FALSE(ml.anchor_estimates);
  const ModeChoice ctd = parse_mode_name("ctd");
  REQUIRE(ctd.mode == TrainMode::ctd);
  REQUIRE_FALSE(ctd.anchor_estimates);
  const ModeChoice star = parse_mode_name("ctd-star");
  REQUIRE(star.mode == TrainMode::ctd);
  REQUIRE(star.anchor_estimates);
  REQUIRE(star.name == "ctd-star");
  REQUIRE_THROWS_AS(parse_mode_name("sarsa"), ConfigError);

  REQUIRE(parse_filter_name("true") == FilterChoice::true_params);
  REQUIRE(parse_filter_name("est") == FilterChoice::estimated);
  REQUIRE_THROWS_AS(parse_filter_name("both"), ConfigError);
  REQUIRE(std::string(filter_name(FilterChoice::estimated)) == "est");

  RunConfig cfg;
  cfg.sim.x0 = 2.5;
  cfg.control.cap_a = 0.6;
  EnvParams anchor;
  anchor.mu1 = 9.0;
  const TrainerConfig t = wired_trainer(cfg, TrainMode::ml, anchor);
  REQUIRE(t.mode == TrainMode::ml);
  REQUIRE(t.sim.x0 == 2.5);
  REQUIRE(t.control.cap_a == 0.6);
  REQUIRE(t.env_reference.mu1 == 9.0);
  REQUIRE(t.n_iterations == cfg.trainer.n_iterations);
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

TEST_CASE("checkpoints restore training state exactly", "[io]") {
  Checkpoint c;
  c.theta = ThetaParams::initial(2);
  for (std::size_t i = 0; i < c.theta.phi1.size(); ++i) {
    c.theta.phi1[i] = -3.0 + 0.0625 * double(i) + 1e-13;
    c.theta.phi2[i] = -2.0 - 0.03125 * double(i);
  }
  c.theta.gamma = {std::log(0.07), 0.1823215567939546, -0.694, 1.0613,
                   -1.0216512475319814};
  c.iterations_done = 512;
  c.env_filter.sigma = 0.30016662039607269;
  c.env_filter.q12 = 1.0027;
  c.mode = "ctd-star";
  c.filter = "est";
  c.seed = 987654321;

  const std::string text = checkpoint_json(c);
  const Checkpoint back = parse_checkpoint(text);
  REQUIRE(back.theta.m == c.theta.m);
  for (std::size_t i = 0; i < c.theta.phi1.size(); ++i) {
    REQUIRE(same_bits(back.theta.phi1[i], c.theta.phi1[i]));
    REQUIRE(same_bits(back.theta.phi2[i], c.theta.phi2[i]));
  }
  for (int i = 0; i < 5; ++i)
    REQUIRE(same_bits(back.theta.gamma[i], c.theta.gamma[i]));
  REQUIRE(back.iterations_done == 512);
  REQUIRE(same_bits(back.env_filter.sigma, c.env_filter.sigma));
  REQUIRE(same_bits(back.env_filter.q12, c.env_filter.q12));
  REQUIRE(back.mode == "ctd-star");
  REQUIRE(back.filter == "est");
  REQUIRE(back.seed == 987654321);
  REQUIRE(checkpoint_json(back) == text);

  REQUIRE_THROWS_AS(parse_checkpoint("noise"), ConfigError);
  REQUIRE_THROWS_AS(parse_checkpoint("{\"bogus\": 1}"), ConfigError);
  REQUIRE_THROWS_AS(parse_checkpoint("{}"), ConfigError);  // no theta
  REQUIRE_THROWS_AS(
      parse_checkpoint(
          "{\"theta\": {\"m\": 2, \"phi1\": [0.0], \"phi2\": [0.0], "
          "\"gamma\": [0,0,0,0,0]}}"),
      ConfigError);  // phi size does not match the degree
}

TEST_CASE("path dumps make absorption visible", "[io]") {
  RawPath p;
  p.times = {0.0, 0.5, 1.0};
  p.surplus = {1.0, 0.25, 0.0};
  p.regimes = {1, 2, 2};
  p.dW = {0.125, -0.5};
  p.ruin_index = 2;
  p.alive = false;

  const std::string csv = raw_path_csv(p);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "step,time,surplus,regime,brownian_increment,absorbed");
  std::getline(lines, line);
  REQUIRE(line == "0,0,1,1,0.125,0");
  std::getline(lines, line);
  REQUIRE(line == "1,0.5,0.25,2,-0.5,0");
  std::getline(lines, line);
  REQUIRE(line == "2,1,0,2,,1");
  REQUIRE_FALSE(std::getline(lines, line));
}

TEST_CASE("training log rows carry full-precision diagnostics", "[io]") {
  TrainLog log;
  TrainRecord r;
  r.iteration = 0;
  r.value = 1.0 / 3.0;
  r.loss = 653.4375;
  r.loss_ma = 653.4375;
  r.e_gamma = {0.07, 1.0, 1.0, 1.0, 1.0};
  r.grad_norm = 1234.5;
  log.records.push_back(r);
  r.iteration = 1;
  r.value = std::nan("");
  r.loss = std::nan("");
  r.aborted = true;
  log.records.push_back(r);

  const std::string csv = train_log_csv(log);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line ==
          "iteration,value,loss,loss_ma,exp_gamma_sigma2,exp_gamma_mu1,"
          "exp_gamma_mu2,exp_gamma_q21,exp_gamma_q12,grad_norm,aborted,"
          "rejected");
  std::getline(lines, line);
  // Full fidelity: the value field parses back to the exact double.
  const auto first_comma = line.find(',');
  const auto second_comma = line.find(',', first_comma + 1);
  const std::string value_field =
      line.substr(first_comma + 1, second_comma - first_comma - 1);
  REQUIRE(std::strtod(value_field.c_str(), nullptr) == 1.0 / 3.0);
  REQUIRE(line.substr(0, 2) == "0,");
  REQUIRE(line.back() == '0');
  std::getline(lines, line);
  REQUIRE(line.find("nan") != std::string::npos);
  REQUIRE(line.substr(line.size() - 4) == ",1,0");
}

TEST_CASE("estimation tables aggregate only the identified parameters",
          "[io]") {
  const EnvParams truth = reference_env();
  std::vector<EstimationReport> heur(2);
  heur[0].estimates = truth;
  heur[1].estimates = truth;
  heur[1].estimates.mu1 = 1.3;
  heur[1].estimates.mu2 = std::numeric_limits<double>::quiet_NaN();
  heur[1].estimates.q12 = std::numeric_limits<double>::quiet_NaN();
  heur[1].degenerate_regime = 2;

  const std::string csv = estimation_table_csv(truth, heur, {});
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line ==
          "parameter,true_value,heuristic_mean,heuristic_sd,heuristic_n,"
          "em_mean,em_sd,em_n");
  std::getline(lines, line);  // sigma
  REQUIRE(line == "sigma,0.300000,0.300000,0.000000,2,,,0");
  std::getline(lines, line);  // mu1: mean of 1.2 and 1.3
  REQUIRE(line.rfind("mu1,1.200000,1.250000,", 0) == 0);
  REQUIRE(line.find(",2,,,0") != std::string::npos);
  std::getline(lines, line);  // mu2: only one finite estimate, sd undefined
  REQUIRE(line == "mu2,0.500000,0.500000,nan,1,,,0");
  std::getline(lines, line);  // q12 likewise
  REQUIRE(line == "q12,0.360000,0.360000,nan,1,,,0");
  std::getline(lines, line);  // q21 finite on both paths
  REQUIRE(line == "q21,2.890000,2.890000,0.000000,2,,,0");
}

TEST_CASE("evaluation tables follow the documented schema", "[io]") {
  EvalRow row;
  row.policy = "optimal";
  row.filter = "true";
  row.report.mean_value = 4.356172;
  row.report.var_value = 0.018554;
  row.report.snr = 31.980767;
  row.report.sharpe_sr = 1.462071;
  row.report.sharpe_ri = 45.254949;
  row.report.mean_dividend = 4.1;
  row.report.n_paths = 100000;
  row.report.n_ruined = 41;

  const std::string csv = evaluation_table_csv({row});
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line ==
          "policy,filter,mean,variance,snr,sharpe_sr,sharpe_ri,"
          "mean_dividend,n_paths,n_ruined");
  std::getline(lines, line);
  REQUIRE(line ==
          "optimal,true,4.356172,0.018554,31.980767,1.462071,45.254949,"
          "4.100000,100000,41");

  const std::string j = eval_report_json(row);
  const cjson parsed = cjson::parse(j);
  REQUIRE(parsed.at("policy") == "optimal");
  REQUIRE(parsed.at("mean_value").get<double>() == 4.356172);
  REQUIRE(parsed.at("n_ruined").get<long>() == 41);
}

TEST_CASE("benchmark artifacts serialize every solved configuration",
          "[io]") {
  const EnvParams env = reference_env();
  FdConfig fdc;
  fdc.grid.m = 100;
  const FdSolution sol = calibrate_splits(env, 1.0, 1.0, fdc);

  const std::string surface = fd_surface_csv({sol});
  std::istringstream lines(surface);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "cap_a,sigma,p,g1,g2");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  REQUIRE(rows == sol.grid.nodes());

  const std::string summary = fd_summary_csv({sol});
  REQUIRE(summary.find("cap_a,sigma,kappa1,kappa2") == 0);
  REQUIRE(summary.find(fmt_full(sol.kappa1)) != std::string::npos);

  const std::string ols = fd_ols_csv({sol});
  std::istringstream ols_lines(ols);
  std::getline(ols_lines, line);
  REQUIRE(line == "cap_a,sigma,mode,c0,c1,c2,nmae");
  int ols_rows = 0;
  while (std::getline(ols_lines, line)) ++ols_rows;
  REQUIRE(ols_rows == 2);

  const cjson parsed = cjson::parse(fd_solution_json(sol));
  REQUIRE(parsed.at("grid_m").get<int>() == 100);
  REQUIRE(parsed.at("g1").size() == static_cast<std::size_t>(sol.grid.nodes()));
  REQUIRE(same_bits(parsed.at("kappa1").get<double>(), sol.kappa1));
  REQUIRE(parsed.at("stationary").get<bool>() == sol.stationary);
}

TEST_CASE("quadratic fits recover exact quadratics", "[io]") {
  std::vector<double> g(101);
  for (int j = 0; j <= 100; ++j) {
    const double p = double(j) / 100.0;
    g[j] = 2.0 - p + 3.0 * p * p;
  }
  const auto fit = rsdiv::detail::quadratic_fit(g);
  REQUIRE(fit.coef[0] == Approx(2.0).margin(1e-9));
  REQUIRE(fit.coef[1] == Approx(-1.0).margin(1e-8));
  REQUIRE(fit.coef[2] == Approx(3.0).margin(1e-8));
  REQUIRE(fit.nmae < 1e-10);
  REQUIRE_THROWS_AS(rsdiv::detail::quadratic_fit(std::vector<double>{1, 2}),
                    ConfigError);
}

TEST_CASE("full-precision formatting round-trips exactly", "[io]") {
  const double cases[] = {0.1,
                          1.0 / 3.0,
                          1e-300,
                          5e-324,
                          -0.0,
                          3.141592653589793,
                          1.0000000000000002,
                          252.0,
                          1.7976931348623157e308};
  for (double v : cases) {
    const std::string s = fmt_full(v);
    REQUIRE(same_bits(std::strtod(s.c_str(), nullptr), v));
  }
  REQUIRE(fmt_full(std::nan("")) == "nan");
  REQUIRE(fmt_table(std::nan("")) == "nan");
  REQUIRE(fmt_table(1.0 / 3.0) == "0.333333");
}

TEST_CASE("configs and artifacts persist through files", "[io]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rsdiv_io_test";
  fs::create_directories(dir);
  const std::string cfg_path = (dir / "config.json").string();
  const std::string txt_path = (dir / "blob.txt").string();

  RunConfig c;
  c.seed = 424242;
  c.env.sigma = 0.8;
  save_config(cfg_path, c);
  const RunConfig back = load_config(cfg_path);
  REQUIRE(serialize_config(back) == serialize_config(c));

  const std::string blob = "line1\nline2\n";
  write_text_file(txt_path, blob);
  REQUIRE(read_text_file(txt_path) == blob);

  REQUIRE_THROWS_AS(load_config((dir / "missing.json").string()),
                    ConfigError);
  REQUIRE_THROWS_AS(write_text_file((dir / "no" / "dir" / "f.txt").string(),
                                    "x"),
                    ConfigError);
  fs::remove_all(dir);
}
