/**
 * @file filter.hpp
 * @brief Belief filtering: innovation increments and the log-coordinate
 * discretization of the conditional-probability dynamics.
 *
 * The belief p_t = P(regime 1 | observed surplus) follows a
 * one-dimensional diffusion driven by the innovation process.  A direct
 * Euler step can leave [0,1], so the recursion is run on the pair
 * lp1 = ln p, lp2 = ln(1-p):
 *
 *   lp1' = lp1 + (q21 e^{-lp1} - (q12+q21) - (beta^2/2)(1-e^{lp1})^2) dt
 *              + beta (1-e^{lp1}) dW,
 *   lp2' = lp2 + (q12 e^{-lp2} - (q12+q21) - (beta^2/2)(1-e^{lp2})^2) dt
 *              - beta (1-e^{lp2}) dW,
 *
 * with beta = (mu1-mu2)/sigma, then p = e^{lp1}/(e^{lp1}+e^{lp2}) which is
 * strictly interior for any finite coordinates.  The e^{-lp} terms act as
 * exponential barriers: under bounded innovations the coordinates
 * self-confine to a few units around their fixed points, so the clamps
 * below ([-700, 350]) are overflow airbags that are never active in
 * ordinary operation.
 *
 * Filtering may run with estimated parameters (live operation) or true
 * parameters (benchmarks); the parameter set is an explicit argument.
 */
#pragma once

#include <algorithm>
#include <cmath>

#include "rsdiv/errors.hpp"
#include "rsdiv/model.hpp"

namespace rsdiv {

/// Belief state in log-coordinates; p is recovered on demand.
struct BeliefState {
  double log_p1;  ///< ln p
  double log_p2;  ///< ln(1-p)

  double p() const {
    const double e1 = std::exp(log_p1);
    const double e2 = std::exp(log_p2);
    return e1 / (e1 + e2);
  }

  static BeliefState from_p(double p0) {
    if (!(p0 > 0.0) || !(p0 < 1.0))
      throw DomainError("belief must start strictly inside (0,1)");
    return {std::log(p0), std::log1p(-p0)};
  }
};

/// Filtered drift mu2 + (mu1-mu2) p.
inline double filtered_drift(double p, const EnvParams& env) {
  return env.mu2 + (env.mu1 - env.mu2) * p;
}

/// Innovation increment (dx - filtered_drift * dt) / sigma for an observed
/// uncontrolled increment dx (dividends, being self-chosen, are added back
/// by the caller before filtering).
inline double innovation_increment(double dx, double p_prev,
                                   const EnvParams& env, double dt) {
  if (!(p_prev > 0.0) || !(p_prev < 1.0))
    throw DomainError("belief outside (0,1) in innovation_increment");
  return (dx - filtered_drift(p_prev, env) * dt) / env.sigma;
}

namespace detail {
inline constexpr double kLogFloor = -700.0;  ///< exp underflow guard
inline constexpr double kLogCap = 350.0;     ///< square-term overflow guard
}  // namespace detail

/// One belief update in log-coordinates; interior by construction.
inline BeliefState wonham_step(const BeliefState& b, double dW_hat,
                               const EnvParams& env, double dt) {
  const double beta = (env.mu1 - env.mu2) / env.sigma;
  const double qsum = env.q12 + env.q21;

  const double m1 = 1.0 - std::exp(b.log_p1);
  double lp1 = b.log_p1 +
               (env.q21 * std::exp(-b.log_p1) - qsum -
                0.5 * beta * beta * m1 * m1) * dt +
               beta * m1 * dW_hat;
  const double m2 = 1.0 - std::exp(b.log_p2);
  double lp2 = b.log_p2 +
               (env.q12 * std::exp(-b.log_p2) - qsum -
                0.5 * beta * beta * m2 * m2) * dt -
               beta * m2 * dW_hat;

  lp1 = std::clamp(lp1, detail::kLogFloor, detail::kLogCap);
  lp2 = std::clamp(lp2, detail::kLogFloor, detail::kLogCap);
  return {lp1, lp2};
}

/// Filtered discount increment (delta2 + (delta1-delta2) p) * dt; summing
/// these from step 0 through k gives the inclusive accumulator whose
/// exponential e^{-Lambda_k} discounts rewards at t_k (note the sum
/// includes j = 0, so the very first discount factor is already < 1).
inline double filtered_discount_step(double p, const EnvParams& env,
                                     double dt) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DomainError("belief outside (0,1) in filtered_discount_step");
  return (env.delta2 + (env.delta1 - env.delta2) * p) * dt;
}

}  // namespace rsdiv
