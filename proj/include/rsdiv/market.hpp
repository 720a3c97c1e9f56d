/**
 * @file market.hpp
 * @brief Ground-truth market environment: hidden two-state Markov chain and
 * the surplus diffusion driven by it.
 *
 * The chain is sampled in continuous time with exact exponential holding
 * times and then projected onto the uniform grid, which keeps the
 * transition-rate statistics free of O(dt) discretization bias.  The
 * surplus follows an Euler-Maruyama step
 *     X_{k+1} = X_k + (mu_{regime_k} - u_k) dt + sigma sqrt(dt) xi_k,
 * absorbed at zero on the first grid time with X <= ruin_eps.  Brownian
 * increments and regimes are recorded for every grid step regardless of
 * absorption so downstream consumers can form uncontrolled market
 * increments and so the draw count per path is fixed.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rsdiv/errors.hpp"
#include "rsdiv/model.hpp"
#include "rsdiv/rng.hpp"

namespace rsdiv {

/// Time grid, initial conditions, and ruin threshold for simulations.
struct SimConfig {
  double x0 = 1.0;          ///< initial surplus
  double p0 = 0.5;          ///< initial belief (prior probability of regime 1)
  double T = 10.0;          ///< horizon in years
  double dt = 1.0 / 252.0;  ///< step size in years (trading-day grid)
  double ruin_eps = 1e-8;   ///< ruin threshold

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(T >= dt)) throw ConfigError("horizon must cover at least one step");
    if (!(x0 >= 0.0)) throw ConfigError("x0 must be nonnegative");
    if (!(p0 > 0.0) || !(p0 < 1.0))
      throw ConfigError("p0 must lie strictly inside (0,1)");
    if (!(ruin_eps > 0.0)) throw ConfigError("ruin_eps must be positive");
  }

  /// Number of grid steps floor(T/dt), robust to the roundoff of T/dt.
  int n_steps() const {
    return static_cast<int>(std::floor(T / dt + 1e-9));
  }
};

/// One simulated path on the uniform grid.  All arrays have n+1 entries
/// (grid times t_0..t_n); dW[k] spans [t_k, t_{k+1}) and dW[n] = 0.
struct RawPath {
  std::vector<double> times;    ///< t_k = k*dt
  std::vector<double> surplus;  ///< absorbed at 0 from ruin_index on
  std::vector<int> regimes;     ///< hidden regime at t_k (1 or 2)
  std::vector<double> dW;       ///< Brownian increment over [t_k, t_{k+1})
  int ruin_index = std::numeric_limits<int>::max();  ///< first X <= ruin_eps
  bool alive = true;            ///< false if ruin occurred on the grid
};

/// Hidden regime at each grid time t_0..t_n via exponential holding times.
/// The initial regime is drawn from the chain's stationary distribution.
inline std::vector<int> simulate_regime_chain(const EnvParams& env,
                                              int n_steps, double dt,
                                              Rng& rng) {
  env.validate();
  if (n_steps < 0) throw ConfigError("n_steps must be nonnegative");
  if (!(env.q12 * dt < 1.0) || !(env.q21 * dt < 1.0))
    throw ConfigError("transition rate times dt must be below 1");

  std::vector<int> regimes(n_steps + 1);
  int state = (rng.uniform01() < env.stationary_p1()) ? 1 : 2;
  double sojourn_end =
      rng.exponential(state == 1 ? env.q12 : env.q21);
  double t = 0.0;
  for (int k = 0; k <= n_steps; ++k, t = k * dt) {
    while (sojourn_end <= t) {
      state = 3 - state;
      sojourn_end += rng.exponential(state == 1 ? env.q12 : env.q21);
    }
    regimes[k] = state;
  }
  return regimes;
}

/// Uncontrolled market increment over one step given the frozen regime.
inline double market_increment(const EnvParams& env, int regime, double dW,
                               double dt) {
  return env.drift(regime) * dt + env.sigma * dW;
}

/// Controlled surplus path over the full grid.  dividends may be empty
/// (no payout) or hold one rate in [0, cap] per step.
inline RawPath simulate_surplus(const EnvParams& env,
                                const ControlConfig& ctrl,
                                const SimConfig& sim,
                                const std::vector<int>& regimes,
                                const std::vector<double>& dividends,
                                Rng& rng) {
  env.validate();
  ctrl.validate();
  sim.validate();
  const int n = static_cast<int>(regimes.size()) - 1;
  if (n < 0) throw ConfigError("regime path is empty");
  if (!dividends.empty() && static_cast<int>(dividends.size()) < n)
    throw ConfigError("dividend stream shorter than the grid");
  for (double u : dividends)
    if (!(u >= 0.0) || !(u <= ctrl.cap_a))
      throw DomainError("dividend rate outside [0, cap_a]");

  RawPath path;
  path.times.resize(n + 1);
  path.surplus.resize(n + 1);
  path.regimes = regimes;
  path.dW.assign(n + 1, 0.0);

  const double sq = std::sqrt(sim.dt);
  double x = sim.x0;
  bool alive = x > sim.ruin_eps;
  if (!alive) path.ruin_index = 0;
  path.times[0] = 0.0;
  path.surplus[0] = alive ? x : 0.0;
  for (int k = 0; k < n; ++k) {
    const double dw = sq * rng.normal();
    path.dW[k] = dw;
    path.times[k + 1] = (k + 1) * sim.dt;
    if (alive) {
      const double u = dividends.empty() ? 0.0 : dividends[k];
      x += (env.drift(regimes[k]) - u) * sim.dt + env.sigma * dw;
      if (x <= sim.ruin_eps) {
        alive = false;
        path.ruin_index = k + 1;
        x = 0.0;
      }
    }
    path.surplus[k + 1] = alive ? x : 0.0;
  }
  path.alive = alive;
  return path;
}

}  // namespace rsdiv
