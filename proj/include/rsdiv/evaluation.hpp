#pragma once
/**
 * Out-of-sample policy evaluation.
 *
 * A frozen policy surface is rolled out over an ensemble of independent
 * market paths.  Per path the discounted entropy-regularized reward
 *
 *   V = sum_k e^{-Lambda_k} H(v_x(x_k, p_k)) dt  +  e^{-Lambda_T} v(x_K, p_K)
 *
 * accumulates until the horizon or ruin; post-ruin steps contribute
 * nothing.  The last term continues a horizon-surviving path with the
 * policy's own value surface: the dividend problem runs until ruin, which
 * almost surely happens long after the simulated window, so the reward sum
 * alone would systematically undershoot the value the surfaces and their
 * boundary anchors describe (for the benchmark parameters the per-step
 * reward is capped at H(0) ~ 0.54, putting a hard ceiling of ~3.42 on the
 * 10-year sum while the reference start value is ~4.36).  Ruined paths end
 * with zero continuation.  The report carries the ensemble mean and sample
 * variance of
 * V, their ratio (signal-to-noise), and two per-step ratios computed
 * over the pooled step series of all paths:
 *
 *   - surplus returns    r_k  = (x_{k+1} - x_k) / x_k
 *   - reward increments  dV_k = e^{-Lambda_k} H_k dt
 *
 * Each ratio is the pooled mean divided by the pooled sample standard
 * deviation, annualized by sqrt(steps per year).  The mean discounted
 * dividend stream is reported as a secondary, regularization-free value
 * column.
 *
 * Determinism: path i draws from seed streams 4i+0 (regime chain), 4i+1
 * (Brownian), 4i+2 (action uniforms); stream 4i+3 is reserved.  Workers
 * fill disjoint per-path slots and the reduction always runs in path-index
 * order, so the report is bit-identical for any worker count and for any
 * order of path completion.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "rsdiv/errors.hpp"
#include "rsdiv/model.hpp"
#include "rsdiv/rng.hpp"
#include "rsdiv/trainer.hpp"

namespace rsdiv {

// ---------------------------------------------------------------------------
// Configuration and report
// ---------------------------------------------------------------------------

struct EvalConfig {
  SimConfig sim{};          ///< grid, initial state, ruin threshold
  ControlConfig control{};  ///< exploration weight and action cap
  long n_paths = 100000;
  int workers = 1;

  void validate() const {
    sim.validate();
    control.validate();
    if (n_paths < 2)
      throw ConfigError("evaluation needs at least two paths");
    if (workers < 1) throw ConfigError("worker count must be >= 1");
  }
};

/// Ensemble statistics of one policy under one (true market, filter
/// parameter) pair.  snr is mean_value / sqrt(var_value) whenever the
/// variance is positive, so snr^2 * var_value recovers mean_value^2.
struct EvalReport {
  double mean_value = 0.0;     ///< mean per-path discounted reward + tail
  double var_value = 0.0;      ///< sample variance (n-1) of the same
  double snr = 0.0;            ///< mean_value / sqrt(var_value)
  double sharpe_sr = 0.0;      ///< annualized pooled surplus-return ratio
  double sharpe_ri = 0.0;      ///< annualized pooled reward-increment ratio
  double mean_dividend = 0.0;  ///< mean per-path discounted dividend payout
  long n_paths = 0;
  long n_ruined = 0;     ///< paths absorbed before the horizon
  long pooled_steps = 0; ///< live steps across the ensemble

  // configuration echo
  double x0 = 0.0;
  double p0 = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
};

// ---------------------------------------------------------------------------
// Per-path work
// ---------------------------------------------------------------------------

namespace detail {

/// Sufficient statistics of a single path; summing these in path-index
/// order reproduces the sequential single-worker reduction exactly.
struct PathPartial {
  double value = 0.0;
  double dividend = 0.0;
  long steps = 0;
  double sr_sum = 0.0;
  double sr_sum2 = 0.0;
  double ri_sum = 0.0;
  double ri_sum2 = 0.0;
  bool ruined = false;
};

template <class Surface>
PathPartial evaluate_path(const Surface& policy, const EnvParams& env_true,
                          const EnvParams& env_filter, const EvalConfig& cfg,
                          std::uint64_t seed, long index) {
  const std::uint64_t base = 4ull * static_cast<std::uint64_t>(index);
  Rng chain(Rng::stream_seed(seed, base + 0));
  Rng brown(Rng::stream_seed(seed, base + 1));
  Rng action(Rng::stream_seed(seed, base + 2));
  const Episode ep = generate_episode(policy, env_true, env_filter, cfg.sim,
                                      cfg.control, chain, brown, action);

  PathPartial out;
  out.ruined = ep.ruined;
  out.steps = ep.steps();
  const double dt = cfg.sim.dt;
  for (int k = 0; k < ep.steps(); ++k) {
    // Same slope the episode acted on: the surface is deterministic, so
    // re-evaluating it reproduces the generation-time value bit for bit.
    const double vx = policy.at(ep.surplus[k], ep.beliefs[k]).vx;
    const double h = entropy_reward(vx, cfg.control.lambda, cfg.control.cap_a);
    const double dv = ep.discounts[k] * h * dt;
    out.value += dv;
    out.dividend += ep.discounts[k] * ep.actions[k] * dt;
    out.ri_sum += dv;
    out.ri_sum2 += dv * dv;
    // Every executed step starts above the ruin threshold, so the return
    // denominator is safe; a terminal absorption shows up as r ~ -1.
    const double r = (ep.surplus[k + 1] - ep.surplus[k]) / ep.surplus[k];
    out.sr_sum += r;
    out.sr_sum2 += r * r;
  }
  if (!ep.ruined && ep.steps() > 0) {
    // Continuation value for a path still alive at the horizon.  The last
    // stored discount already covers the whole window (each entry folds in
    // its own step), so it is the factor that carries the surface value at
    // the final state back to time zero.  The per-step ratio series are
    // left untouched: they are defined on reward increments only.
    const int stop = ep.steps();
    out.value +=
        ep.discounts.back() * policy.at(ep.surplus[stop], ep.beliefs[stop]).v;
  }
  return out;
}

/// mean / sample-std of a pooled series from (count, sum, sum of squares).
/// NaN when the series is constant (zero variance) — the ratio has no
/// meaningful value there and callers should surface that honestly.
inline double pooled_ratio(long n, double s, double s2) {
  const double mean = s / static_cast<double>(n);
  const double var =
      (s2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
  if (!(var > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return mean / std::sqrt(var);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ensemble evaluation
// ---------------------------------------------------------------------------

/// Rolls out cfg.n_paths independent episodes of the frozen policy (any
/// surface with at(x, p) -> SurfacePoint), the market moving under
/// env_true and the belief filter under env_filter, and reduces them into
/// an EvalReport.  Throws DegenerateReport when the ensemble carries
/// fewer than two live steps (e.g. every path starts below the ruin
/// threshold).
template <class Surface>
EvalReport evaluate(const Surface& policy, const EnvParams& env_true,
                    const EnvParams& env_filter, const EvalConfig& cfg,
                    std::uint64_t seed) {
  cfg.validate();
  env_true.validate();
  env_filter.validate();

  const long n = cfg.n_paths;
  std::vector<detail::PathPartial> parts(static_cast<std::size_t>(n));

  auto run_range = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i)
      parts[static_cast<std::size_t>(i)] =
          detail::evaluate_path(policy, env_true, env_filter, cfg, seed, i);
  };

  const int workers = static_cast<int>(std::min<long>(cfg.workers, n));
  if (workers == 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(workers));
    const long base = n / workers;
    const long rem = n % workers;
    long lo = 0;
    for (int w = 0; w < workers; ++w) {
      const long hi = lo + base + (w < rem ? 1 : 0);
      pool.emplace_back([&run_range, &failures, w, lo, hi] {
        try {
          run_range(lo, hi);
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

  EvalReport rep;
  rep.n_paths = n;
  rep.x0 = cfg.sim.x0;
  rep.p0 = cfg.sim.p0;
  rep.horizon = cfg.sim.T;
  rep.dt = cfg.sim.dt;

  double sum_v = 0.0;
  double sum_d = 0.0;
  double sr_s = 0.0, sr_s2 = 0.0;
  double ri_s = 0.0, ri_s2 = 0.0;
  for (const auto& q : parts) {
    rep.pooled_steps += q.steps;
    if (q.ruined) ++rep.n_ruined;
    sum_v += q.value;
    sum_d += q.dividend;
    sr_s += q.sr_sum;
    sr_s2 += q.sr_sum2;
    ri_s += q.ri_sum;
    ri_s2 += q.ri_sum2;
  }
  if (rep.pooled_steps < 2)
    throw DegenerateReport(
        "evaluation degenerate: fewer than two live steps in the ensemble");

  rep.mean_value = sum_v / static_cast<double>(n);
  rep.mean_dividend = sum_d / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& q : parts) {
    const double d = q.value - rep.mean_value;
    ss += d * d;
  }
  rep.var_value = ss / static_cast<double>(n - 1);
  rep.snr = rep.var_value > 0.0
                ? rep.mean_value / std::sqrt(rep.var_value)
                : std::numeric_limits<double>::quiet_NaN();

  const double annualize = std::sqrt(1.0 / cfg.sim.dt);
  rep.sharpe_sr = annualize * detail::pooled_ratio(rep.pooled_steps, sr_s, sr_s2);
  rep.sharpe_ri = annualize * detail::pooled_ratio(rep.pooled_steps, ri_s, ri_s2);
  return rep;
}

}  // namespace rsdiv
