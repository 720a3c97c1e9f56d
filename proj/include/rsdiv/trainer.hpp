/**
 * @file trainer.hpp
 * @brief Actor-critic policy-evaluation training for the parametric value
 *        surface: on-policy episode generation with belief filtering, then
 *        per-episode parameter updates in one of two modes — regularized
 *        martingale-loss descent (ML) or episodic online temporal-difference
 *        ascent (CTD) — with analytic gradients throughout.
 *
 * Conventions shared by both modes:
 *  - discounts are inclusive accumulators: disc_k = exp(-sum_{j<=k} dl_j)
 *    with dl_j the filtered discount increment at step j, so already the
 *    first factor is below one;
 *  - the environment penalty acts on the gamma block only, the boundary
 *    penalty on the phi blocks only, and both enter the two modes with the
 *    same effective sign (added to the descent gradient, subtracted from
 *    the ascent direction);
 *  - each (iteration, batch member) pair owns a fixed block of counter-based
 *    random streams, so a resumed run reproduces an uninterrupted one bit
 *    for bit and batches could be generated in any order.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rsdiv/errors.hpp"
#include "rsdiv/estimation.hpp"
#include "rsdiv/filter.hpp"
#include "rsdiv/market.hpp"
#include "rsdiv/model.hpp"
#include "rsdiv/rng.hpp"
#include "rsdiv/theta_model.hpp"

namespace rsdiv {

// ---------------------------------------------------------------------------
// Episode container
// ---------------------------------------------------------------------------

/// One on-policy trajectory.  States run 0..K (terminal included, surplus
/// clamped at zero on ruin overshoot); actions and inclusive discount
/// factors run 0..K-1 alongside the executed steps.
struct Episode {
  std::vector<double> times;      ///< t_k, size K+1
  std::vector<double> surplus;    ///< x_k, size K+1
  std::vector<double> beliefs;    ///< p_k, size K+1
  std::vector<double> actions;    ///< u_k, size K
  std::vector<double> discounts;  ///< e^{-Lambda_k}, size K
  int stop_index = 0;             ///< K
  bool ruined = false;            ///< true if stopped by the ruin threshold

  int steps() const { return stop_index; }
};

// ---------------------------------------------------------------------------
// Trainer configuration
// ---------------------------------------------------------------------------

enum class TrainMode { ml, ctd };

struct TrainerConfig {
  TrainMode mode = TrainMode::ctd;
  double rho = 0.0;  ///< trace decay per unit time (0 = one-step updates)

  std::array<double, 2> eta_phi{3e-4, 3e-4};
  std::array<double, 5> eta_gamma{3e-2, 5e-3, 1e-2, 5e-3, 1.5e-2};
  double lr_decay_exponent = 0.1;  ///< rate factor (1+n)^{-exponent}

  std::array<double, 5> w_env{7.0, 0.5, 0.5, 0.2, 0.2};
  std::array<double, 2> w_bc{60.0, 60.0};
  EnvParams env_reference{};  ///< regularization anchor (true or estimated)

  int batch_size = 1;
  long n_iterations = 10000;
  double grad_clip = 1e3;  ///< global-norm cap on the update direction

  SimConfig sim{};          ///< episode grid and initial state
  ControlConfig control{};  ///< exploration weight and action cap
  QuadratureConfig quadrature{};
  int degree = 2;  ///< polynomial degree of the phi blocks

  /// When set, each iteration simulates a fresh historical segment under
  /// the true market, re-runs the windowed estimator on it, and filters
  /// the episode with the refreshed estimates (fields the estimator could
  /// not identify carry over from the previous filter state).
  bool reestimate_each_iteration = false;
  double estimation_years = 20.0;
  double estimation_x0 = 100.0;  ///< large start so absorption cannot bite

  int loss_ma_window = 5;

  void validate() const {
    sim.validate();
    control.validate();
    quadrature.validate();
    env_reference.validate();
    if (!(rho >= 0.0 && rho <= 1.0))
      throw ConfigError("trace parameter must lie in [0,1]");
    for (double e : eta_phi)
      if (!(e >= 0.0)) throw ConfigError("phi learning rates must be >= 0");
    for (double e : eta_gamma)
      if (!(e >= 0.0)) throw ConfigError("gamma learning rates must be >= 0");
    for (double w : w_env)
      if (!(w >= 0.0)) throw ConfigError("environment weights must be >= 0");
    for (double w : w_bc)
      if (!(w >= 0.0)) throw ConfigError("boundary weights must be >= 0");
    if (!(lr_decay_exponent >= 0.0))
      throw ConfigError("decay exponent must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (n_iterations < 0) throw ConfigError("iteration count must be >= 0");
    if (!(grad_clip > 0.0)) throw ConfigError("gradient clip must be > 0");
    if (degree < 0) throw ConfigError("degree must be >= 0");
    if (reestimate_each_iteration) {
      if (!(estimation_years > 0.0))
        throw ConfigError("estimation window must be positive");
      if (!(estimation_x0 > 0.0))
        throw ConfigError("estimation start level must be positive");
    }
    if (loss_ma_window < 1)
      throw ConfigError("loss moving-average window must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

/// Per-iteration diagnostics.  value and loss refer to the parameters the
/// episode was generated under (pre-update); e_gamma reports the
/// post-update state.  Aborted iterations carry NaN value/loss.
struct TrainRecord {
  long iteration = 0;
  double value = 0.0;    ///< v(x0, p0) at the episode parameters
  double loss = 0.0;     ///< regularized martingale loss of the batch
  double loss_ma = 0.0;  ///< trailing mean over the configured window
  std::array<double, 5> e_gamma{};  ///< exp(gamma) after the update
  double grad_norm = 0.0;           ///< direction norm before clipping
  bool aborted = false;   ///< surface unbuildable at these parameters
  bool rejected = false;  ///< non-finite direction, update skipped
};

struct TrainLog {
  std::vector<TrainRecord> records;
};

struct TrainResult {
  ThetaParams theta;
  TrainLog log;
  /// Filter parameters in effect after the last iteration.  Checkpointing
  /// callers must pass this back as env_filter_init when resuming a run
  /// that re-estimates each iteration.
  EnvParams env_filter_final{};
};

// ---------------------------------------------------------------------------
// Episode generation
// ---------------------------------------------------------------------------

namespace detail {

/// Stream layout: each (iteration, batch index) pair owns an 8-slot block.
/// Slots 0-2 drive the episode (regime chain, Brownian, action uniforms);
/// slots 3-4 of the iteration's first block drive the optional estimation
/// segment; the rest are reserved.
inline std::uint64_t stream_base(long iteration, int batch_size, int b) {
  return 8ull * (static_cast<std::uint64_t>(iteration) *
                     static_cast<std::uint64_t>(batch_size) +
                 static_cast<std::uint64_t>(b));
}

/// The filter's log-odds clamp can saturate to a belief that rounds to
/// exactly 0 or 1 in double precision; evaluation and discounting need a
/// strictly interior belief.  The snap is inactive outside that regime.
inline double interior_belief(double p) {
  constexpr double kFloor = 1e-15;
  return std::min(std::max(p, kFloor), 1.0 - kFloor);
}

}  // namespace detail

/// Generates one on-policy episode: actions are inverse-CDF samples of the
/// policy density at the current slope, the hidden market advances under
/// the true parameters, and the belief follows the discretized filter under
/// the estimation parameters (dividends, being self-chosen, are added back
/// before filtering).  Separate generators drive the regime chain, the
/// Brownian increments, and the action uniforms.  Any surface exposing
/// at(x, p) -> SurfacePoint can act as the policy.
template <class Surface>
Episode generate_episode(const Surface& model, const EnvParams& env_true,
                         const EnvParams& env_filter, const SimConfig& sim,
                         const ControlConfig& ctrl, Rng& rng_chain,
                         Rng& rng_brownian, Rng& rng_action) {
  sim.validate();
  const int k1 = sim.n_steps();
  const double dt = sim.dt;
  const auto regimes = simulate_regime_chain(env_true, k1, dt, rng_chain);

  Episode ep;
  ep.times.reserve(k1 + 1);
  ep.surplus.reserve(k1 + 1);
  ep.beliefs.reserve(k1 + 1);
  ep.actions.reserve(k1);
  ep.discounts.reserve(k1);

  double x = sim.x0;
  BeliefState belief = BeliefState::from_p(sim.p0);
  double lambda_acc = 0.0;
  const double sqdt = std::sqrt(dt);

  ep.times.push_back(0.0);
  ep.surplus.push_back(x);
  ep.beliefs.push_back(detail::interior_belief(belief.p()));

  for (int k = 0; k < k1; ++k) {
    if (x < sim.ruin_eps) {
      ep.ruined = true;
      break;
    }
    const double p = ep.beliefs.back();
    const double vx = model.at(x, p).vx;
    const double u = sample_action(1.0 - vx, rng_action.uniform01(),
                                   ctrl.lambda, ctrl.cap_a);
    const double dw = sqdt * rng_brownian.normal();
    const double observed =
        market_increment(env_true, regimes[k], dw, dt);  // pre-dividend
    lambda_acc += filtered_discount_step(p, env_filter, dt);
    ep.actions.push_back(u);
    ep.discounts.push_back(std::exp(-lambda_acc));

    const double dw_hat = innovation_increment(observed, p, env_filter, dt);
    belief = wonham_step(belief, dw_hat, env_filter, dt);
    x = std::max(x + observed - u * dt, 0.0);
    ep.times.push_back((k + 1) * dt);
    ep.surplus.push_back(x);
    ep.beliefs.push_back(detail::interior_belief(belief.p()));
  }
  ep.stop_index = static_cast<int>(ep.actions.size());
  return ep;
}

/// Convenience overload: builds the surface from raw parameters, mapping
/// construction failures (no admissible exponent rate, overflow) to
/// EpisodeAborted so callers can skip the iteration.
inline Episode generate_episode(const ThetaParams& theta,
                                const EnvParams& env_true,
                                const EnvParams& env_filter,
                                const SimConfig& sim,
                                const ControlConfig& ctrl,
                                const QuadratureConfig& quad,
                                std::uint64_t seed) {
  Rng chain(Rng::stream_seed(seed, 0));
  Rng brown(Rng::stream_seed(seed, 1));
  Rng action(Rng::stream_seed(seed, 2));
  try {
    ThetaModel model(theta, env_filter, ctrl, quad);
    return generate_episode(model, env_true, env_filter, sim, ctrl, chain,
                            brown, action);
  } catch (const NumericalError& ex) {
    throw EpisodeAborted(std::string("surface unbuildable: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Martingale-loss residuals and updates
// ---------------------------------------------------------------------------

/// Per-step martingale residuals of one episode and their full parameter
/// gradients, computed in a single backward pass over suffix sums.
///
/// The residual at step k is the gap between the discounted surface value
/// now and everything the martingale still collects: the remaining
/// discounted rewards plus, when the episode reaches the horizon alive,
/// the discounted surface value at the final state.  Dropping that last
/// term would compare against a process that pretends the business stops
/// at the horizon; the dividend problem does not, and the omission both
/// biases the fitted surface low and floors the loss at the square of the
/// truncated tail.  Ruined episodes end at zero value, so they carry no
/// continuation term.
struct MlResiduals {
  std::vector<double> m;                ///< residual at each step, size K
  std::vector<std::vector<double>> dm;  ///< gradient of each residual
};

inline MlResiduals ml_residuals(const Episode& ep, const ThetaModel& model,
                                const ControlConfig& ctrl) {
  const int K = ep.steps();
  if (K < 1) throw ConfigError("episode must contain at least one step");
  const double dt = ep.times[1] - ep.times[0];
  const int dim = model.dim();

  MlResiduals out;
  out.m.assign(K, 0.0);
  out.dm.assign(K, std::vector<double>(dim, 0.0));

  std::vector<double> suffix_grad(dim, 0.0), dv(dim), dvx(dim);
  double suffix_reward = 0.0;
  if (!ep.ruined) {
    // Seed the suffix accumulators with the continuation value so every
    // residual nets it out against the current discounted value.
    const double disc_T = ep.discounts.back();
    model.grad(ep.surplus[K], ep.beliefs[K], dv, dvx);
    suffix_reward = disc_T * model.at(ep.surplus[K], ep.beliefs[K]).v;
    for (int r = 0; r < dim; ++r) suffix_grad[r] = disc_T * dv[r];
  }
  for (int k = K - 1; k >= 0; --k) {
    const double x = ep.surplus[k], p = ep.beliefs[k];
    const double disc = ep.discounts[k];
    const SurfacePoint s = model.at(x, p);
    model.grad(x, p, dv, dvx);

    const double reward = entropy_reward(s.vx, ctrl.lambda, ctrl.cap_a);
    const double sens =
        entropy_reward_sensitivity(s.vx, ctrl.lambda, ctrl.cap_a);
    suffix_reward += disc * reward * dt;
    for (int r = 0; r < dim; ++r) suffix_grad[r] += disc * sens * dvx[r] * dt;

    out.m[k] = disc * s.v - suffix_reward;
    auto& row = out.dm[k];
    for (int r = 0; r < dim; ++r) row[r] = disc * dv[r] - suffix_grad[r];
  }
  return out;
}

namespace detail {

/// Martingale data loss of one episode (0.5 * sum m_k^2 * dt) without
/// gradient work: same backward pass (including the continuation seed for
/// horizon-surviving episodes), scalars only.
inline double ml_scalar_loss(const Episode& ep, const ThetaModel& model,
                             const ControlConfig& ctrl) {
  const int K = ep.steps();
  if (K < 1) throw ConfigError("episode must contain at least one step");
  const double dt = ep.times[1] - ep.times[0];
  double suffix_reward = 0.0, acc = 0.0;
  if (!ep.ruined)
    suffix_reward =
        ep.discounts.back() * model.at(ep.surplus[K], ep.beliefs[K]).v;
  for (int k = K - 1; k >= 0; --k) {
    const SurfacePoint s = model.at(ep.surplus[k], ep.beliefs[k]);
    const double disc = ep.discounts[k];
    suffix_reward += disc * entropy_reward(s.vx, ctrl.lambda, ctrl.cap_a) * dt;
    const double m = disc * s.v - suffix_reward;
    acc += m * m;
  }
  return 0.5 * acc * dt;
}

/// Environment anchor vector (sigma^2, mu1, mu2, q21, q12).
inline std::array<double, 5> env_vector(const EnvParams& e) {
  return {e.sigma * e.sigma, e.mu1, e.mu2, e.q21, e.q12};
}

/// Shared regularizer gradient: environment pull on the gamma block plus
/// boundary matching on the phi blocks.  Returns the descent-side gradient
/// (added in ML, subtracted in CTD).
inline void penalty_gradient(const ThetaModel& model, const TrainerConfig& cfg,
                             const std::array<double, 5>& env_vec,
                             const BoundaryTargets& bc,
                             std::vector<double>& out) {
  const int dim = model.dim();
  out.assign(dim, 0.0);
  const auto& gamma = model.theta().gamma;
  const int off_gamma = dim - 5;
  for (int j = 0; j < 5; ++j) {
    const double eg = std::exp(gamma[j]);
    out[off_gamma + j] = cfg.w_env[j] * (eg - env_vec[j]) * eg;
  }
  std::vector<double> esg(dim);
  const double targets[2] = {bc.g0, bc.g1};
  for (int j = 0; j < 2; ++j) {
    const double err = model.endpoint_sum(j) - targets[j];
    model.endpoint_sum_grad(j, esg);
    const double w = cfg.w_bc[j];
    for (int r = 0; r < dim; ++r) out[r] += w * err * esg[r];
  }
}

inline double penalty_loss(const ThetaModel& model, const TrainerConfig& cfg,
                           const std::array<double, 5>& env_vec,
                           const BoundaryTargets& bc) {
  double acc = 0.0;
  const auto& gamma = model.theta().gamma;
  for (int j = 0; j < 5; ++j) {
    const double d = std::exp(gamma[j]) - env_vec[j];
    acc += 0.5 * cfg.w_env[j] * d * d;
  }
  const double targets[2] = {bc.g0, bc.g1};
  for (int j = 0; j < 2; ++j) {
    const double e = model.endpoint_sum(j) - targets[j];
    acc += 0.5 * cfg.w_bc[j] * e * e;
  }
  return acc;
}

/// theta - rate ⊙ descent with power-law decay at iteration n.
inline ThetaParams apply_update(const ThetaParams& theta,
                                const std::vector<double>& descent,
                                const TrainerConfig& cfg, long n) {
  const double decay =
      std::pow(1.0 + static_cast<double>(n), -cfg.lr_decay_exponent);
  ThetaParams next = theta;
  const int nb = theta.phi_size();
  for (int t = 0; t < nb; ++t) {
    next.phi1[t] -= cfg.eta_phi[0] * decay * descent[t];
    next.phi2[t] -= cfg.eta_phi[1] * decay * descent[nb + t];
  }
  for (int j = 0; j < 5; ++j)
    next.gamma[j] -= cfg.eta_gamma[j] * decay * descent[2 * nb + j];
  return next;
}

inline double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// Descent gradient of the regularized martingale loss over a batch of
/// episodes (data terms averaged, penalties added once).
inline std::vector<double> ml_gradient(const ThetaModel& model,
                                       const std::vector<Episode>& batch,
                                       const TrainerConfig& cfg) {
  if (batch.empty()) throw ConfigError("ml update needs a nonempty batch");
  const int dim = model.dim();
  std::vector<double> grad(dim, 0.0);
  for (const Episode& ep : batch) {
    const double dt = ep.times[1] - ep.times[0];
    const MlResiduals res = ml_residuals(ep, model, cfg.control);
    for (int k = 0; k < ep.steps(); ++k) {
      const double wk = res.m[k] * dt;
      const auto& row = res.dm[k];
      for (int r = 0; r < dim; ++r) grad[r] += wk * row[r];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;

  std::vector<double> pen;
  detail::penalty_gradient(
      model, cfg, detail::env_vector(cfg.env_reference),
      boundary_targets(cfg.env_reference, cfg.control.lambda,
                       cfg.control.cap_a),
      pen);
  for (int r = 0; r < dim; ++r) grad[r] += pen[r];
  return grad;
}

/// One descent step on the regularized martingale loss.
inline ThetaParams ml_update(const ThetaParams& theta,
                             const std::vector<Episode>& batch,
                             const TrainerConfig& cfg, long iteration = 0) {
  ThetaModel model(theta, cfg.env_reference, cfg.control, cfg.quadrature);
  std::vector<double> grad = ml_gradient(model, batch, cfg);
  if (!detail::all_finite(grad))
    throw NumericalError("non-finite martingale-loss gradient");
  const double n = detail::norm2(grad);
  if (n > cfg.grad_clip)
    for (double& g : grad) g *= cfg.grad_clip / n;
  return detail::apply_update(theta, grad, cfg, iteration);
}

// ---------------------------------------------------------------------------
// Temporal-difference residuals and updates
// ---------------------------------------------------------------------------

/// Per-step temporal-difference residuals: the step change of the value
/// minus its discount drift plus the running reward.
inline std::vector<double> ctd_residuals(const Episode& ep,
                                         const ThetaModel& model,
                                         const EnvParams& env_filter,
                                         const ControlConfig& ctrl) {
  const int K = ep.steps();
  if (K < 1) throw ConfigError("episode must contain at least one step");
  const double dt = ep.times[1] - ep.times[0];
  std::vector<double> delta(K, 0.0);
  double v_next = model.at(ep.surplus[K], ep.beliefs[K]).v;
  for (int k = K - 1; k >= 0; --k) {
    const SurfacePoint s = model.at(ep.surplus[k], ep.beliefs[k]);
    const double dl = filtered_discount_step(ep.beliefs[k], env_filter, dt);
    const double reward = entropy_reward(s.vx, ctrl.lambda, ctrl.cap_a);
    delta[k] = v_next - s.v - dl * s.v + reward * dt;
    v_next = s.v;
  }
  return delta;
}

/// Ascent direction of the episodic temporal-difference scheme with an
/// exponential eligibility trace (rho = 0 keeps one-step contributions
/// only), minus the shared regularizer gradient.
inline std::vector<double> ctd_direction(const ThetaModel& model,
                                         const Episode& ep,
                                         const EnvParams& env_filter,
                                         const TrainerConfig& cfg) {
  const int K = ep.steps();
  if (K < 1) throw ConfigError("ctd update needs a nonempty episode");
  const double dt = ep.times[1] - ep.times[0];
  const int dim = model.dim();
  const std::vector<double> delta =
      ctd_residuals(ep, model, env_filter, cfg.control);

  const double trace_decay = (cfg.rho == 0.0) ? 0.0 : std::pow(cfg.rho, dt);
  std::vector<double> dir(dim, 0.0), trace(dim, 0.0), dv(dim), dvx(dim);
  for (int k = 0; k < K; ++k) {
    model.grad(ep.surplus[k], ep.beliefs[k], dv, dvx);
    for (int r = 0; r < dim; ++r)
      trace[r] = trace_decay * trace[r] + dv[r] * dt;
    const double wk = ep.discounts[k] * delta[k];
    for (int r = 0; r < dim; ++r) dir[r] += wk * trace[r];
  }

  std::vector<double> pen;
  detail::penalty_gradient(
      model, cfg, detail::env_vector(cfg.env_reference),
      boundary_targets(cfg.env_reference, cfg.control.lambda,
                       cfg.control.cap_a),
      pen);
  for (int r = 0; r < dim; ++r) dir[r] -= pen[r];
  return dir;
}

/// One ascent step of episodic online temporal-difference learning on a
/// single episode.
inline ThetaParams ctd_update(const ThetaParams& theta, const Episode& ep,
                              const EnvParams& env_filter,
                              const TrainerConfig& cfg, long iteration = 0) {
  ThetaModel model(theta, cfg.env_reference, cfg.control, cfg.quadrature);
  std::vector<double> dir = ctd_direction(model, ep, env_filter, cfg);
  if (!detail::all_finite(dir))
    throw NumericalError("non-finite temporal-difference direction");
  const double n = detail::norm2(dir);
  if (n > cfg.grad_clip)
    for (double& d : dir) d *= cfg.grad_clip / n;
  for (double& d : dir) d = -d;  // ascent via the shared descent applier
  return detail::apply_update(theta, dir, cfg, iteration);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace detail {

/// Refreshes the filter parameters from a windowed estimate on a fresh
/// historical segment; unidentifiable fields carry over from the previous
/// filter state, and an unusable estimate keeps it entirely.
inline EnvParams reestimate_filter(const EnvParams& env_true,
                                   const EnvParams& previous,
                                   const TrainerConfig& cfg,
                                   std::uint64_t master_seed,
                                   std::uint64_t iter_base) {
  SimConfig est_sim = cfg.sim;
  est_sim.T = cfg.estimation_years;
  est_sim.x0 = cfg.estimation_x0;
  Rng chain(Rng::stream_seed(master_seed, iter_base + 3));
  Rng brown(Rng::stream_seed(master_seed, iter_base + 4));
  const auto regimes =
      simulate_regime_chain(env_true, est_sim.n_steps(), est_sim.dt, chain);
  const RawPath path =
      simulate_surplus(env_true, cfg.control, est_sim, regimes, {}, brown);
  EnvParams next = previous;
  try {
    const EstimationReport rep = heuristic_estimate(
        path.surplus, est_sim.dt, env_true, HeuristicConfig{}, false);
    const EnvParams& est = rep.estimates;
    if (std::isfinite(est.sigma) && est.sigma > 0.0) next.sigma = est.sigma;
    if (std::isfinite(est.mu1)) next.mu1 = est.mu1;
    if (std::isfinite(est.mu2)) next.mu2 = est.mu2;
    if (std::isfinite(est.q12) && est.q12 > 0.0) next.q12 = est.q12;
    if (std::isfinite(est.q21) && est.q21 > 0.0) next.q21 = est.q21;
    next.validate();
    return next;
  } catch (const Error&) {
    return previous;  // keep the last usable filter state
  }
}

}  // namespace detail

/// Runs the training loop: per iteration, generate a batch of on-policy
/// episodes under the current parameters (optionally refreshing the filter
/// estimates first), apply the selected policy-evaluation update once, and
/// log diagnostics.  Iterations whose surface cannot be built — or whose
/// direction is non-finite — leave the parameters unchanged; once more than
/// half of all configured iterations abort consecutively the run throws
/// TrainingFailure.  Passing a start state and start_iteration resumes a
/// previous run bit-identically (with re-estimation active, also pass the
/// checkpointed env_filter_final as env_filter_init).
inline TrainResult train(const TrainerConfig& cfg, const EnvParams& env_true,
                         const EnvParams& env_filter_init, std::uint64_t seed,
                         const ThetaParams* start = nullptr,
                         long start_iteration = 0) {
  cfg.validate();
  env_true.validate();
  env_filter_init.validate();
  if (start_iteration < 0 || start_iteration > cfg.n_iterations)
    throw ConfigError("resume point outside the iteration range");

  TrainResult out;
  out.theta = start ? *start : ThetaParams::initial(cfg.degree);
  out.theta.validate();
  EnvParams env_filter = env_filter_init;

  const std::array<double, 5> env_vec = detail::env_vector(cfg.env_reference);
  const BoundaryTargets bc = boundary_targets(
      cfg.env_reference, cfg.control.lambda, cfg.control.cap_a);

  const long total = cfg.n_iterations - start_iteration;
  out.log.records.reserve(static_cast<std::size_t>(total));
  long consecutive_failures = 0;
  std::vector<double> recent_losses;

  for (long n = start_iteration; n < cfg.n_iterations; ++n) {
    TrainRecord rec;
    rec.iteration = n;

    const std::uint64_t iter_base = detail::stream_base(n, cfg.batch_size, 0);
    if (cfg.reestimate_each_iteration)
      env_filter = detail::reestimate_filter(env_true, env_filter, cfg, seed,
                                             iter_base);

    bool progressed = false;
    try {
      ThetaModel model(out.theta, env_filter, cfg.control, cfg.quadrature);

      std::vector<Episode> batch;
      batch.reserve(cfg.batch_size);
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::uint64_t base = detail::stream_base(n, cfg.batch_size, b);
        Rng chain(Rng::stream_seed(seed, base + 0));
        Rng brown(Rng::stream_seed(seed, base + 1));
        Rng action(Rng::stream_seed(seed, base + 2));
        batch.push_back(generate_episode(model, env_true, env_filter, cfg.sim,
                                         cfg.control, chain, brown, action));
      }

      rec.value = model.at(cfg.sim.x0, cfg.sim.p0).v;
      double data_loss = 0.0;
      for (const Episode& ep : batch)
        data_loss += detail::ml_scalar_loss(ep, model, cfg.control);
      rec.loss = data_loss / batch.size() +
                 detail::penalty_loss(model, cfg, env_vec, bc);

      std::vector<double> descent;
      if (cfg.mode == TrainMode::ml) {
        descent = ml_gradient(model, batch, cfg);
      } else {
        descent.assign(model.dim(), 0.0);
        for (const Episode& ep : batch) {
          const std::vector<double> dir =
              ctd_direction(model, ep, env_filter, cfg);
          for (int r = 0; r < model.dim(); ++r)
            descent[r] -= dir[r] / batch.size();
        }
      }

      if (!detail::all_finite(descent)) {
        rec.rejected = true;
      } else {
        rec.grad_norm = detail::norm2(descent);
        if (rec.grad_norm > cfg.grad_clip)
          for (double& g : descent) g *= cfg.grad_clip / rec.grad_norm;
        out.theta = detail::apply_update(out.theta, descent, cfg, n);
        progressed = true;
      }
    } catch (const NumericalError&) {
      rec.aborted = true;
      rec.value = std::numeric_limits<double>::quiet_NaN();
      rec.loss = std::numeric_limits<double>::quiet_NaN();
    }

    if (progressed) {
      consecutive_failures = 0;
      recent_losses.push_back(rec.loss);
      if (static_cast<int>(recent_losses.size()) > cfg.loss_ma_window)
        recent_losses.erase(recent_losses.begin());
    } else {
      ++consecutive_failures;
      if (2 * consecutive_failures > cfg.n_iterations)
        throw TrainingFailure(
            "more than half of all iterations aborted consecutively");
    }
    if (recent_losses.empty()) {
      rec.loss_ma = std::numeric_limits<double>::quiet_NaN();
    } else {
      double ma = 0.0;
      for (double l : recent_losses) ma += l;
      rec.loss_ma = ma / recent_losses.size();
    }
    for (int j = 0; j < 5; ++j) rec.e_gamma[j] = std::exp(out.theta.gamma[j]);
    out.log.records.push_back(rec);
  }
  out.env_filter_final = env_filter;
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark-surrogate fitting
// ---------------------------------------------------------------------------

/// Fits the log-coefficients of one positively-weighted polynomial block to
/// a target profile sampled on a uniform grid over [0,1]: plain gradient
/// descent on the squared error in the log-coefficient variables, which
/// keeps every coefficient positive.  scale is the block's fixed prefactor.
inline std::vector<double> fit_phi_profile(const std::vector<double>& target,
                                           double scale, int degree,
                                           int iterations = 20000,
                                           double step = 0.5) {
  if (target.size() < 2)
    throw ConfigError("profile fit needs at least two samples");
  if (!(scale != 0.0)) throw ConfigError("profile fit needs nonzero scale");
  if (degree < 0) throw ConfigError("degree must be >= 0");
  const int nb = (degree + 1) * (degree + 1);
  const int n = static_cast<int>(target.size());

  std::vector<double> basis(static_cast<std::size_t>(n) * nb);
  for (int s = 0; s < n; ++s) {
    const double p = double(s) / (n - 1);
    int t = 0;
    for (int j = 0; j <= degree; ++j)
      for (int k = 0; k <= degree; ++k, ++t) {
        double b = 1.0;
        for (int r = 0; r < j; ++r) b *= p;
        for (int r = 0; r < k; ++r) b *= (1.0 - p);
        basis[static_cast<std::size_t>(s) * nb + t] = b;
      }
  }

  std::vector<double> phi(nb, -3.0), coef(nb), grad(nb);
  for (int it = 0; it < iterations; ++it) {
    for (int t = 0; t < nb; ++t) coef[t] = std::exp(phi[t]);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int s = 0; s < n; ++s) {
      const double* row = &basis[static_cast<std::size_t>(s) * nb];
      double fit = 0.0;
      for (int t = 0; t < nb; ++t) fit += coef[t] * row[t];
      const double r = scale * fit - target[s];
      for (int t = 0; t < nb; ++t) grad[t] += r * scale * row[t] * coef[t];
    }
    for (int t = 0; t < nb; ++t) phi[t] -= step / n * grad[t];
  }
  return phi;
}

}  // namespace rsdiv
