/**
 * @file estimation.hpp
 * @brief Market-parameter estimation from an observed surplus path.
 *
 * Two estimators for (mu1, mu2, sigma, q12, q21) from daily surplus
 * increments: a window-threshold labeling heuristic and a two-state
 * Gaussian hidden-Markov EM baseline.  Discount rates are configuration,
 * never estimated; they are copied into the report from the supplied
 * environment.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rsdiv/errors.hpp"
#include "rsdiv/model.hpp"

namespace rsdiv {

enum class EstimationMethod { heuristic, em };

/// Output of either estimator plus labeling diagnostics.
struct EstimationReport {
  EnvParams estimates;      ///< fitted drifts/volatility/rates; deltas copied
  std::vector<int> labels;  ///< per-increment regime label in {1,2}, filled
  EstimationMethod method = EstimationMethod::heuristic;

  /// 0 when every parameter was estimable; otherwise the regime whose
  /// labels/sojourns were missing.  Uncomputable fields are NaN.
  int degenerate_regime = 0;
  std::string degenerate_reason;

  bool complete() const { return degenerate_regime == 0; }

  int n_labeled1 = 0;    ///< raw (pre-fill) regime-1 labels
  int n_labeled2 = 0;    ///< raw (pre-fill) regime-2 labels
  int n_unlabeled = 0;   ///< raw steps below both thresholds
  int n_runs1 = 0;       ///< completed (non-censored) regime-1 sojourns
  int n_runs2 = 0;       ///< completed (non-censored) regime-2 sojourns
  double mean_hold1 = 0.0;  ///< mean completed sojourn in regime 1 (years)
  double mean_hold2 = 0.0;  ///< mean completed sojourn in regime 2 (years)

  bool converged = true;         ///< EM: hit the tolerance within max_iters
  int iterations = 0;            ///< EM: iterations actually run
  double log_likelihood = 0.0;   ///< EM: final observed-data log-likelihood
};

struct HeuristicConfig {
  int lookback = 252;    ///< window length M in steps
  double eta_u = 0.15;   ///< threshold multiplier
};

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-8;  ///< relative log-likelihood change for convergence
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

/// Gaussian-consistent robust scale of the increments, annualized.
inline double pilot_scale(const std::vector<double>& dx, double dt) {
  const double med = median_of(dx);
  std::vector<double> dev(dx.size());
  for (std::size_t k = 0; k < dx.size(); ++k) dev[k] = std::abs(dx[k] - med);
  return 1.4826 * median_of(dev) / std::sqrt(dt);
}

/// Forward-fill zeros with the last seen label, then backward-fill the head.
inline void fill_labels(std::vector<int>& lab) {
  int last = 0;
  for (int& l : lab) {
    if (l != 0)
      last = l;
    else if (last != 0)
      l = last;
  }
  int first = 0;
  for (int l : lab)
    if (l != 0) {
      first = l;
      break;
    }
  for (int& l : lab) {
    if (l != 0) break;
    l = first;
  }
}

struct HoldingStats {
  int n_runs = 0;
  double mean_years = 0.0;
};

/// Mean length of completed sojourns in `regime`; runs touching either
/// path boundary are censored and dropped.
inline HoldingStats holding_times(const std::vector<int>& lab, int regime,
                                  double dt) {
  HoldingStats hs;
  const int K = int(lab.size());
  double total = 0.0;
  int start = -1;
  for (int k = 0; k < K; ++k) {
    const bool in = (lab[k] == regime);
    const bool was = (k > 0 && lab[k - 1] == regime);
    if (in && !was) start = k;
    if (!in && was && start > 0) {
      ++hs.n_runs;
      total += (k - start) * dt;
    }
  }
  // A run still open at the end is right-censored: dropped.
  if (hs.n_runs > 0) hs.mean_years = total / hs.n_runs;
  return hs;
}

}  // namespace detail

/**
 * Window-threshold regime labeling and conditional moment estimation.
 *
 * Labels step k from the lookback change X_k - X_{max(0,k-M)} against the
 * adaptive threshold U = eta_u * pilot_scale * sqrt(M dt): at or above +U
 * is regime 1, at or below -U is regime 2, otherwise unlabeled.  Drifts
 * average increments over raw-labeled steps only; the volatility residual
 * sum runs over all steps using filled labels; transition rates are
 * reciprocals of mean completed sojourn lengths of the filled labels.
 *
 * With both regime drifts positive, downward window crossings can be rare:
 * a path may yield no regime-2 labels, or too few completed sojourns to
 * estimate rates.  By default that degeneracy throws; with
 * `require_complete = false` the report is returned with the computable
 * fields filled, NaN elsewhere, and the missing regime recorded.
 *
 * @param surplus  observed path X_0..X_K (at least lookback+2 points)
 * @param dt       step size in years
 * @param config_env  source of the (known) discount rates
 * @throws ConfigError if the path is too short or dt <= 0
 * @throws EstimationDegenerate (strict mode) if a regime receives no raw
 *         label or has no completed sojourn; partial drifts attached
 */
inline EstimationReport heuristic_estimate(const std::vector<double>& surplus,
                                           double dt,
                                           const EnvParams& config_env,
                                           HeuristicConfig cfg = {},
                                           bool require_complete = true) {
  if (!(dt > 0.0)) throw ConfigError("heuristic_estimate: dt must be > 0");
  if (cfg.lookback < 1 || !(cfg.eta_u > 0.0))
    throw ConfigError("heuristic_estimate: bad lookback/threshold config");
  const int K = int(surplus.size()) - 1;
  if (K <= cfg.lookback)
    throw ConfigError("heuristic_estimate: path shorter than the lookback");

  std::vector<double> dx(K);
  for (int k = 0; k < K; ++k) dx[k] = surplus[k + 1] - surplus[k];

  const double sigma0 = detail::pilot_scale(dx, dt);
  const double U = cfg.eta_u * sigma0 * std::sqrt(cfg.lookback * dt);

  EstimationReport rep;
  rep.method = EstimationMethod::heuristic;
  rep.labels.assign(K, 0);
  for (int k = 0; k < K; ++k) {
    const int b = std::max(0, k - cfg.lookback);
    const double w = surplus[k] - surplus[b];
    if (w >= U)
      rep.labels[k] = 1;
    else if (w <= -U)
      rep.labels[k] = 2;
  }
  double sum1 = 0.0, sum2 = 0.0;
  for (int k = 0; k < K; ++k) {
    if (rep.labels[k] == 1) {
      ++rep.n_labeled1;
      sum1 += dx[k];
    } else if (rep.labels[k] == 2) {
      ++rep.n_labeled2;
      sum2 += dx[k];
    } else {
      ++rep.n_unlabeled;
    }
  }
  const bool has1 = rep.n_labeled1 > 0, has2 = rep.n_labeled2 > 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double mu1 = has1 ? sum1 / (dt * rep.n_labeled1) : nan;
  const double mu2 = has2 ? sum2 / (dt * rep.n_labeled2) : nan;
  if (!has1 && !has2)
    throw EstimationDegenerate("no step crossed either threshold");
  if (require_complete) {
    if (!has1)
      throw EstimationDegenerate("no steps labeled regime 1", mu1, false, mu2,
                                 true);
    if (!has2)
      throw EstimationDegenerate("no steps labeled regime 2", mu1, true, mu2,
                                 false);
  }
  rep.estimates = config_env;
  rep.estimates.mu1 = mu1;
  rep.estimates.mu2 = mu2;
  if (!has1) {
    rep.degenerate_regime = 1;
    rep.degenerate_reason = "no steps labeled regime 1";
  } else if (!has2) {
    rep.degenerate_regime = 2;
    rep.degenerate_reason = "no steps labeled regime 2";
  }

  detail::fill_labels(rep.labels);
  double rss = 0.0;
  for (int k = 0; k < K; ++k) {
    const double mu = (rep.labels[k] == 1) ? mu1 : mu2;
    const double r = dx[k] - mu * dt;
    rss += r * r;
  }
  rep.estimates.sigma = std::sqrt(rss / (K * dt));

  const auto h1 = detail::holding_times(rep.labels, 1, dt);
  const auto h2 = detail::holding_times(rep.labels, 2, dt);
  rep.n_runs1 = h1.n_runs;
  rep.n_runs2 = h2.n_runs;
  rep.mean_hold1 = h1.mean_years;
  rep.mean_hold2 = h2.mean_years;
  if (require_complete) {
    if (h1.n_runs == 0)
      throw EstimationDegenerate("no completed sojourn in regime 1", mu1,
                                 has1, mu2, has2);
    if (h2.n_runs == 0)
      throw EstimationDegenerate("no completed sojourn in regime 2", mu1,
                                 has1, mu2, has2);
  }
  rep.estimates.q12 = (h1.n_runs > 0) ? 1.0 / h1.mean_years : nan;
  rep.estimates.q21 = (h2.n_runs > 0) ? 1.0 / h2.mean_years : nan;
  if (rep.degenerate_regime == 0 && h1.n_runs == 0) {
    rep.degenerate_regime = 1;
    rep.degenerate_reason = "no completed sojourn in regime 1";
  } else if (rep.degenerate_regime == 0 && h2.n_runs == 0) {
    rep.degenerate_regime = 2;
    rep.degenerate_reason = "no completed sojourn in regime 2";
  }
  return rep;
}

/**
 * Baum-Welch EM for a two-state Gaussian HMM on the increments.
 *
 * Emissions are Normal(mu_i dt, sigma^2 dt) with sigma shared across
 * states; transition probabilities convert to rates via q_ij = p_ij / dt.
 * Initialization splits the increments at their median (upper half seeds
 * state 1).  The observed-data log-likelihood is checked to be
 * nondecreasing every iteration.
 *
 * @throws ConfigError on bad sizes/config
 * @throws EstimationDegenerate if a state's occupancy collapses to zero
 * @throws NumericalError if the log-likelihood decreases beyond roundoff
 */
inline EstimationReport em_estimate(const std::vector<double>& surplus,
                                    double dt, const EnvParams& config_env,
                                    EmConfig cfg = {}) {
  if (!(dt > 0.0)) throw ConfigError("em_estimate: dt must be > 0");
  if (cfg.max_iters < 1 || !(cfg.tol > 0.0))
    throw ConfigError("em_estimate: bad iteration/tolerance config");
  const int K = int(surplus.size()) - 1;
  if (K < 2) throw ConfigError("em_estimate: need at least two increments");

  std::vector<double> dx(K);
  for (int k = 0; k < K; ++k) dx[k] = surplus[k + 1] - surplus[k];

  // Median split of the increments seeds means, shared variance, and the
  // transition matrix (smoothed empirical counts of the split labels).
  const double med = detail::median_of(dx);
  double m1 = 0.0, m2 = 0.0, n1 = 0.0, n2 = 0.0;
  std::vector<int> seed(K);
  for (int k = 0; k < K; ++k) {
    seed[k] = (dx[k] >= med) ? 1 : 2;
    if (seed[k] == 1) {
      m1 += dx[k];
      n1 += 1.0;
    } else {
      m2 += dx[k];
      n2 += 1.0;
    }
  }
  if (n1 == 0.0 || n2 == 0.0)
    throw EstimationDegenerate("median split left a state empty");
  double mu1 = m1 / (n1 * dt), mu2 = m2 / (n2 * dt);
  double var = 0.0;  // emission variance, in increment units
  for (int k = 0; k < K; ++k) {
    const double mu = (seed[k] == 1) ? mu1 : mu2;
    const double r = dx[k] - mu * dt;
    var += r * r;
  }
  var /= K;
  if (!(var > 0.0)) throw EstimationDegenerate("zero increment variance");
  // Persistent-transition start: regimes are expected to hold for many
  // steps, and a symmetric near-0.5 start collapses onto a noise-fitting
  // optimum with absurd switching rates.
  double P[2][2] = {{0.99, 0.01}, {0.01, 0.99}};
  double pi[2] = {0.5, 0.5};

  const auto emit = [&](int i, double y, double v) {
    const double mu = (i == 0) ? mu1 : mu2;
    const double r = y - mu * dt;
    return std::exp(-0.5 * r * r / v) / std::sqrt(2.0 * M_PI * v);
  };

  std::vector<std::array<double, 2>> alpha(K), beta(K), gamma(K);
  std::vector<double> scale(K);
  double ll_prev = -std::numeric_limits<double>::infinity();
  double ll = ll_prev;

  EstimationReport rep;
  rep.method = EstimationMethod::em;
  rep.converged = false;

  for (int it = 0; it < cfg.max_iters; ++it) {
    // Scaled forward pass.
    for (int i = 0; i < 2; ++i) alpha[0][i] = pi[i] * emit(i, dx[0], var);
    scale[0] = alpha[0][0] + alpha[0][1];
    if (!(scale[0] > 0.0))
      throw EstimationDegenerate("zero forward mass at the first step");
    alpha[0][0] /= scale[0];
    alpha[0][1] /= scale[0];
    for (int k = 1; k < K; ++k) {
      for (int j = 0; j < 2; ++j) {
        const double pred =
            alpha[k - 1][0] * P[0][j] + alpha[k - 1][1] * P[1][j];
        alpha[k][j] = pred * emit(j, dx[k], var);
      }
      scale[k] = alpha[k][0] + alpha[k][1];
      if (!(scale[k] > 0.0))
        throw EstimationDegenerate("zero forward mass mid-path");
      alpha[k][0] /= scale[k];
      alpha[k][1] /= scale[k];
    }
    ll = 0.0;
    for (int k = 0; k < K; ++k) ll += std::log(scale[k]);
    if (std::isfinite(ll_prev)) {
      if (ll < ll_prev - 1e-7 * (1.0 + std::abs(ll_prev)))
        throw NumericalError("EM log-likelihood decreased");
      if (std::abs(ll - ll_prev) <= cfg.tol * (1.0 + std::abs(ll_prev))) {
        rep.converged = true;
        rep.iterations = it;
        break;
      }
    }
    ll_prev = ll;
    rep.iterations = it + 1;

    // Scaled backward pass and smoothed marginals.
    beta[K - 1] = {1.0, 1.0};
    for (int k = K - 2; k >= 0; --k) {
      for (int i = 0; i < 2; ++i) {
        double s = 0.0;
        for (int j = 0; j < 2; ++j)
          s += P[i][j] * emit(j, dx[k + 1], var) * beta[k + 1][j];
        beta[k][i] = s / scale[k + 1];
      }
    }
    for (int k = 0; k < K; ++k) {
      double g0 = alpha[k][0] * beta[k][0];
      double g1 = alpha[k][1] * beta[k][1];
      const double z = g0 + g1;
      gamma[k] = {g0 / z, g1 / z};
    }

    // M-step.
    double occ[2] = {0.0, 0.0}, wsum[2] = {0.0, 0.0};
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < 2; ++i) {
        occ[i] += gamma[k][i];
        wsum[i] += gamma[k][i] * dx[k];
      }
    if (!(occ[0] > 0.0) || !(occ[1] > 0.0))
      throw EstimationDegenerate("a hidden state lost all occupancy");
    const double mu1n = wsum[0] / (occ[0] * dt);
    const double mu2n = wsum[1] / (occ[1] * dt);
    double num[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double den[2] = {0.0, 0.0};
    for (int k = 0; k + 1 < K; ++k) {
      double xi[2][2], z = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          xi[i][j] = alpha[k][i] * P[i][j] * emit(j, dx[k + 1], var) *
                     beta[k + 1][j] / scale[k + 1];
          z += xi[i][j];
        }
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) num[i][j] += xi[i][j] / z;
        den[i] += gamma[k][i];
      }
    }
    mu1 = mu1n;
    mu2 = mu2n;
    double rss = 0.0;
    for (int k = 0; k < K; ++k) {
      const double r1 = dx[k] - mu1 * dt;
      const double r2 = dx[k] - mu2 * dt;
      rss += gamma[k][0] * r1 * r1 + gamma[k][1] * r2 * r2;
    }
    var = rss / K;
    if (!(var > 0.0)) throw EstimationDegenerate("zero fitted variance");
    for (int i = 0; i < 2; ++i) {
      P[i][0] = num[i][0] / den[i];
      P[i][1] = num[i][1] / den[i];
    }
    pi[0] = gamma[0][0];
    pi[1] = gamma[0][1];
  }
  rep.log_likelihood = ll;

  // Order the states so that state 1 is the higher-drift regime.
  bool swap = (mu1 < mu2);
  if (swap) {
    std::swap(mu1, mu2);
    std::swap(P[0][0], P[1][1]);
    std::swap(P[0][1], P[1][0]);
    std::swap(pi[0], pi[1]);
    for (auto& g : gamma) std::swap(g[0], g[1]);
  }
  rep.estimates = config_env;
  rep.estimates.mu1 = mu1;
  rep.estimates.mu2 = mu2;
  rep.estimates.sigma = std::sqrt(var / dt);
  rep.estimates.q12 = P[0][1] / dt;
  rep.estimates.q21 = P[1][0] / dt;

  rep.labels.assign(K, 0);
  int c1 = 0, c2 = 0;
  for (int k = 0; k < K; ++k) {
    rep.labels[k] = (gamma[k][0] >= gamma[k][1]) ? 1 : 2;
    (rep.labels[k] == 1 ? c1 : c2)++;
  }
  rep.n_labeled1 = c1;
  rep.n_labeled2 = c2;
  return rep;
}

}  // namespace rsdiv
