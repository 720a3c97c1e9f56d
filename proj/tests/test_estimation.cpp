/**
 * @file test_estimation.cpp
 * @brief Unit tests for heuristic and EM market-parameter estimation.
 */
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rsdiv/estimation.hpp"
#include "rsdiv/market.hpp"
#include "rsdiv/rng.hpp"

using namespace rsdiv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct SimulatedPath {
  std::vector<double> surplus;
  double dt;
};

SimulatedPath make_path(const EnvParams& env, double T, std::uint64_t seed,
                        double x0 = 1.0) {
  ControlConfig ctrl;
  SimConfig sim;
  sim.T = T;
  sim.x0 = x0;
  Rng c(Rng::stream_seed(seed, 0)), w(Rng::stream_seed(seed, 1));
  const auto reg = simulate_regime_chain(env, sim.n_steps(), sim.dt, c);
  auto path = simulate_surplus(env, ctrl, sim, reg, {}, w);
  return {std::move(path.surplus), sim.dt};
}

}  // namespace

TEST_CASE("median and robust pilot scale", "[estimation][helpers]") {
  REQUIRE(detail::median_of({3.0, 1.0, 2.0}) == 2.0);
  REQUIRE(detail::median_of({4.0, 1.0, 3.0, 2.0}) == 2.5);

  const double dt = 1.0 / 252.0;
  Rng rng(12);
  std::vector<double> dx(100001);
  for (double& v : dx) v = 0.004 + 0.3 * std::sqrt(dt) * rng.normal();
  REQUIRE_THAT(detail::pilot_scale(dx, dt), WithinRel(0.3, 0.02));
}

TEST_CASE("label filling and holding-time tallies", "[estimation][helpers]") {
  std::vector<int> lab = {0, 0, 1, 0, 2, 0, 0};
  detail::fill_labels(lab);
  REQUIRE(lab == std::vector<int>({1, 1, 1, 1, 2, 2, 2}));

  const std::vector<int> runs = {1, 1, 2, 2, 2, 1, 1, 1, 2, 1};
  const auto h1 = detail::holding_times(runs, 1, 1.0);
  REQUIRE(h1.n_runs == 1);  // head and tail runs are censored
  REQUIRE(h1.mean_years == 3.0);
  const auto h2 = detail::holding_times(runs, 2, 1.0);
  REQUIRE(h2.n_runs == 2);
  REQUIRE(h2.mean_years == 2.0);
}

TEST_CASE("window labels on a deterministic zig-zag", "[estimation]") {
  const double dt = 1.0 / 252.0;
  const int K = 600;
  HeuristicConfig cfg;
  cfg.lookback = 50;
  std::vector<double> x(K + 1);
  x[0] = 5.0;
  for (int k = 0; k < K; ++k) x[k + 1] = x[k] + (k < 300 ? 0.01 : -0.01);

  EnvParams env;
  const auto rep = heuristic_estimate(x, dt, env, cfg, false);
  // Thresholds: sigma0 = 1.4826*0.01/sqrt(dt), U = 0.15*sigma0*sqrt(50 dt).
  // Net window change crosses -U 26 steps after the trend reversal.
  REQUIRE(rep.labels[2] == 1);
  REQUIRE(rep.labels[300] == 1);
  REQUIRE(rep.labels[324] == 1);
  REQUIRE(rep.labels[326] == 2);
  REQUIRE(rep.labels[599] == 2);
  // One run per regime, both boundary-censored: rates are unavailable.
  REQUIRE(!rep.complete());
  REQUIRE(std::isnan(rep.estimates.q12));
  REQUIRE(std::isnan(rep.estimates.q21));
  REQUIRE(std::isfinite(rep.estimates.mu1));
  REQUIRE(std::isfinite(rep.estimates.mu2));
  REQUIRE(rep.estimates.mu1 > 0.0);
  REQUIRE(rep.estimates.mu2 < 0.0);
}

TEST_CASE("single-regime path: partial drift survives the degeneracy",
          "[estimation]") {
  EnvParams env;
  env.q12 = 1e-15;  // regime 1 effectively absorbing
  env.sigma = 0.01;
  const auto path = make_path(env, 3.0, 42);

  bool threw = false;
  try {
    heuristic_estimate(path.surplus, path.dt, env);
  } catch (const EstimationDegenerate& e) {
    threw = true;
    REQUIRE(std::string(e.what()).find("regime 2") != std::string::npos);
    REQUIRE(e.has_mu1);
    REQUIRE(!e.has_mu2);
    REQUIRE_THAT(e.mu1_partial, WithinRel(env.mu1, 0.05));
  }
  REQUIRE(threw);

  const auto rep = heuristic_estimate(path.surplus, path.dt, env, {}, false);
  REQUIRE(rep.degenerate_regime == 2);
  REQUIRE_THAT(rep.estimates.mu1, WithinRel(env.mu1, 0.05));
  REQUIRE(std::isnan(rep.estimates.mu2));
  REQUIRE_THAT(rep.estimates.sigma, WithinRel(env.sigma, 0.2));
}

TEST_CASE("labels are shift-invariant and the fit is scale-equivariant",
          "[estimation]") {
  const EnvParams env;
  const auto path = make_path(env, 5.0, 9001);
  const auto base = heuristic_estimate(path.surplus, path.dt, env, {}, false);

  std::vector<double> shifted = path.surplus;
  for (double& v : shifted) v += 1.0;
  const auto rep_s = heuristic_estimate(shifted, path.dt, env, {}, false);
  REQUIRE(rep_s.labels == base.labels);
  REQUIRE_THAT(rep_s.estimates.mu1, WithinRel(base.estimates.mu1, 1e-9));
  REQUIRE_THAT(rep_s.estimates.sigma, WithinRel(base.estimates.sigma, 1e-9));

  std::vector<double> scaled = path.surplus;
  for (double& v : scaled) v *= 3.0;
  const auto rep_c = heuristic_estimate(scaled, path.dt, env, {}, false);
  REQUIRE(rep_c.labels == base.labels);
  REQUIRE_THAT(rep_c.estimates.mu1, WithinRel(3.0 * base.estimates.mu1, 1e-12));
  REQUIRE_THAT(rep_c.estimates.sigma,
               WithinRel(3.0 * base.estimates.sigma, 1e-12));
  if (base.complete()) {
    REQUIRE_THAT(rep_c.estimates.q12, WithinRel(base.estimates.q12, 1e-12));
    REQUIRE_THAT(rep_c.estimates.q21, WithinRel(base.estimates.q21, 1e-12));
  }
}

TEST_CASE("heuristic aggregate over twenty-year paths", "[estimation][slow]") {
  const EnvParams env;
  double sum_sigma = 0.0, sum_mu1 = 0.0;
  const int paths = 30;
  for (int i = 0; i < paths; ++i) {
    const auto path = make_path(env, 20.0, 7000 + i);
    const auto rep = heuristic_estimate(path.surplus, path.dt, env, {}, false);
    REQUIRE(std::isfinite(rep.estimates.sigma));
    REQUIRE(std::isfinite(rep.estimates.mu1));
    sum_sigma += rep.estimates.sigma;
    sum_mu1 += rep.estimates.mu1;
  }
  REQUIRE(sum_sigma / paths > 0.294);
  REQUIRE(sum_sigma / paths < 0.306);
  REQUIRE(sum_mu1 / paths > 1.05);
  REQUIRE(sum_mu1 / paths < 1.25);
}

TEST_CASE("EM recovers well-separated regimes", "[estimation][em]") {
  EnvParams env;
  env.mu1 = 2.0;
  env.mu2 = -2.0;
  env.sigma = 0.05;
  env.q12 = env.q21 = 1.0;
  const auto path = make_path(env, 20.0, 31337, 100.0);
  const auto rep = em_estimate(path.surplus, path.dt, env);
  REQUIRE(rep.converged);
  REQUIRE_THAT(rep.estimates.mu1, WithinRel(2.0, 0.02));
  REQUIRE_THAT(rep.estimates.mu2, WithinRel(-2.0, 0.02));
  REQUIRE_THAT(rep.estimates.sigma, WithinRel(0.05, 0.1));
  REQUIRE(rep.estimates.q12 > 0.0);
  REQUIRE(rep.estimates.q21 > 0.0);
}

TEST_CASE("EM on a low-signal path: upward-biased drifts, inflated rates",
          "[estimation][em]") {
  const EnvParams env;
  const auto path = make_path(env, 20.0, 8800);
  const auto rep = em_estimate(path.surplus, path.dt, env);
  // The monotone log-likelihood assertion runs internally every iteration.
  REQUIRE(rep.estimates.mu1 > rep.estimates.mu2);
  REQUIRE(rep.estimates.sigma > 0.28);
  REQUIRE(rep.estimates.sigma < 0.32);
  REQUIRE(rep.estimates.mu1 > 1.0);
  REQUIRE(rep.estimates.q12 > env.q12);  // spuriously frequent switching
  REQUIRE(rep.estimates.q21 > env.q21);
  REQUIRE(int(rep.labels.size()) == int(path.surplus.size()) - 1);
  REQUIRE(rep.n_labeled1 + rep.n_labeled2 == int(rep.labels.size()));
  REQUIRE(rep.log_likelihood > 0.0);  // densities ~1/sqrt(2 pi sigma^2 dt)
}

TEST_CASE("estimation input validation", "[estimation][errors]") {
  const EnvParams env;
  const std::vector<double> tiny = {1.0, 1.1};
  REQUIRE_THROWS_AS(heuristic_estimate(tiny, 1.0 / 252.0, env), ConfigError);
  const auto path = make_path(env, 2.0, 5);
  REQUIRE_THROWS_AS(heuristic_estimate(path.surplus, 0.0, env), ConfigError);
  HeuristicConfig bad;
  bad.eta_u = -1.0;
  REQUIRE_THROWS_AS(heuristic_estimate(path.surplus, path.dt, env, bad),
                    ConfigError);
  REQUIRE_THROWS_AS(em_estimate({1.0, 1.1}, path.dt, env), ConfigError);
  EmConfig bad_em;
  bad_em.max_iters = 0;
  REQUIRE_THROWS_AS(em_estimate(path.surplus, path.dt, env, bad_em),
                    ConfigError);
}
