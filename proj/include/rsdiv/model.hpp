/**
 * @file model.hpp
 * @brief Scalar model core for the entropy-regularized dividend problem.
 *
 * A two-regime diffusion market pays dividends at a rate u ∈ [0, cap_a]
 * chosen by a randomized (exploratory) policy.  The policy that maximizes
 * rate-of-dividend plus λ times differential entropy is a truncated
 * exponential ("Gibbs") density on [0, cap_a] whose tilt depends on the
 * local value slope v_x.  All scalar quantities of that family live here:
 *
 *  - f_lambda(y)       = λ·ln( ∫_0^cap exp((1-y)/λ·r) dr ), the optimized
 *                        entropy-regularized dividend term, plus its first
 *                        two derivatives.  The point y = 1 is a removable
 *                        singularity handled by series branches.
 *  - gibbs_density / sample_action: the policy density and its exact
 *                        inverse-CDF sampler.
 *  - entropy_reward    Ĥ(v_x) = E[u] + λ·entropy under the Gibbs density;
 *                        computed through the identities Ĥ = f - v_x·f' and
 *                        Ĥ' = Υ = -v_x·f'' (log-partition calculus), which
 *                        inherit the stable branches of the f family.
 *  - boundary_targets  the x→∞ limits g(0), g(1) of the value surface.
 *  - coefficients      the drift/diffusion bundle A, B, C, D of the
 *                        belief-space ODEs.
 *  - kappa_from_quadratic: the positive exponent rate from a scalar
 *                        quadratic, solved in cancellation-free form.
 *  - value_surface     the two-exponential value ansatz evaluated at a
 *                        point, given g_1, g_2, κ_1, κ_2.
 *  - ThetaParams       the trainable parameter vector (φ-blocks for the
 *                        g-family, γ-block for the environment-shaped
 *                        weight), with pointwise evaluators and exact
 *                        parameter gradients.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rsdiv/errors.hpp"

namespace rsdiv {

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

/// Two-regime market environment.  Regime 1 is the "bull" state.
struct EnvParams {
  double mu1 = 1.2;     ///< regime-1 premium (drift) rate
  double mu2 = 0.5;     ///< regime-2 premium (drift) rate
  double sigma = 0.3;   ///< common volatility, > 0
  double q12 = 0.36;    ///< transition rate 1 -> 2, > 0
  double q21 = 2.89;    ///< transition rate 2 -> 1, > 0
  double delta1 = 0.1;  ///< regime-1 discount rate, > 0
  double delta2 = 0.3;  ///< regime-2 discount rate, > 0

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(q12 > 0.0) || !(q21 > 0.0))
      throw ConfigError("transition rates must be positive");
    if (!(delta1 > 0.0) || !(delta2 > 0.0))
      throw ConfigError("discount rates must be positive");
  }

  /// Drift of the given regime (1 or 2).
  double drift(int regime) const { return regime == 1 ? mu1 : mu2; }

  /// Discount rate of the given regime (1 or 2).
  double discount(int regime) const { return regime == 1 ? delta1 : delta2; }

  /// Stationary probability of regime 1 under the generator.
  double stationary_p1() const { return q21 / (q12 + q21); }

  /// Signal-to-noise slope (mu1 - mu2) / sigma of the observation channel.
  double signal_slope() const { return (mu1 - mu2) / sigma; }
};

/// Exploration weight and dividend cap defining the control problem.
struct ControlConfig {
  double lambda = 1.0;  ///< entropy weight, > 0
  double cap_a = 1.0;   ///< dividend-rate cap, > 0

  void validate() const {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!(cap_a > 0.0)) throw ConfigError("cap_a must be positive");
  }
};

namespace detail {
/// Arguments of exp() beyond this magnitude are routed through log-space.
inline constexpr double kExpGuard = 700.0;
/// Series branch for the tilt sampler and density (relative error ~1e-16).
inline constexpr double kTiltTol = 1e-8;
/// Series branch for f' (closed form cancels ~2 digits at the boundary).
inline constexpr double kFpTol = 1e-2;
/// Series branch for f'' (closed form cancels ~4 digits at the boundary).
inline constexpr double kFppTol = 5e-2;
}  // namespace detail

// ---------------------------------------------------------------------------
// The scalar f family
// ---------------------------------------------------------------------------

/// f_lambda(y) = lambda * ln( cap_a * expm1(w) / w ) with w = cap_a*(1-y)/lambda.
/// Monotone decreasing and strictly convex in y; f(1) = lambda*ln(cap_a).
inline double f_lambda(double y, double lambda, double cap_a) {
  const double w = cap_a * (1.0 - y) / lambda;
  if (w == 0.0) return lambda * std::log(cap_a);
  if (w > detail::kExpGuard)
    return lambda * (std::log(cap_a) + w - std::log(w));
  return lambda * std::log(cap_a * std::expm1(w) / w);
}

/// First derivative of f_lambda in y; bounded in (-cap_a, 0) with
/// f'(1) = -cap_a/2 reached through the series branch.
inline double f_lambda_prime(double y, double lambda, double cap_a) {
  const double w = cap_a * (1.0 - y) / lambda;
  if (std::abs(w) < detail::kFpTol) {
    // -cap*(1/2 + w/12 - w^3/720), error O(w^5)
    return -cap_a * (0.5 + w / 12.0 - w * w * w / 720.0);
  }
  return -cap_a * (1.0 - 1.0 / w + 1.0 / std::expm1(w));
}

/// Second derivative of f_lambda in y; strictly positive, equal to
/// cap_a^2/(12*lambda) at y = 1.
inline double f_lambda_second(double y, double lambda, double cap_a) {
  const double w = cap_a * (1.0 - y) / lambda;
  const double c = cap_a * cap_a / lambda;
  if (std::abs(w) < detail::kFppTol) {
    const double w2 = w * w;
    // 1/12 - w^2/240 + w^4/6048, error O(w^6)
    return c * (1.0 / 12.0 - w2 / 240.0 + w2 * w2 / 6048.0);
  }
  if (w > detail::kExpGuard) return c / (w * w);
  const double s = std::expm1(w);
  return c * (1.0 / (w * w) - std::exp(w) / (s * s));
}

// ---------------------------------------------------------------------------
// Truncated-exponential policy
// ---------------------------------------------------------------------------

/// Policy density G(u, 1-v_x) on [0, cap_a]: proportional to exp(theta*u)
/// with tilt theta = (1-v_x)/lambda.  Throws DomainError if u is outside
/// the action interval.
inline double gibbs_density(double u, double one_minus_vx, double lambda,
                            double cap_a) {
  if (u < 0.0 || u > cap_a)
    throw DomainError("gibbs_density: action outside [0, cap_a]");
  const double theta = one_minus_vx / lambda;
  const double w = cap_a * theta;
  if (std::abs(w) < detail::kTiltTol)
    return (1.0 + theta * (u - 0.5 * cap_a)) / cap_a;
  if (w > detail::kExpGuard)
    return std::exp(std::log(theta) + theta * (u - cap_a));
  return theta * std::exp(theta * u) / std::expm1(w);
}

/// Exact inverse-CDF sample of the policy density for a uniform draw
/// z ∈ [0, 1].  Continuous through the flat-tilt limit, where u = cap_a*z.
inline double sample_action(double one_minus_vx, double z, double lambda,
                            double cap_a) {
  if (z < 0.0 || z > 1.0)
    throw DomainError("sample_action: uniform draw outside [0, 1]");
  if (z == 0.0) return 0.0;
  const double theta = one_minus_vx / lambda;
  const double w = cap_a * theta;
  double u;
  if (std::abs(w) < detail::kTiltTol) {
    u = cap_a * z * (1.0 + 0.5 * w * (1.0 - z));
  } else if (w > detail::kExpGuard) {
    u = (std::log(z) + w) / theta;
  } else {
    u = std::log1p(z * std::expm1(w)) / theta;
  }
  return std::clamp(u, 0.0, cap_a);
}

// ---------------------------------------------------------------------------
// Entropy-regularized running reward
// ---------------------------------------------------------------------------

/// Ĥ(v_x) = E[u] + lambda*entropy under G(·, 1-v_x); equals
/// f_lambda(v_x) - v_x * f_lambda'(v_x).  At v_x = 1 this reduces to
/// cap_a/2 + lambda*ln(cap_a).
inline double entropy_reward(double vx, double lambda, double cap_a) {
  return f_lambda(vx, lambda, cap_a) - vx * f_lambda_prime(vx, lambda, cap_a);
}

/// Sensitivity Υ(v_x) = dĤ/dv_x = -v_x * f_lambda''(v_x); equals
/// -cap_a^2/(12*lambda) at v_x = 1 and vanishes at v_x = 0.
inline double entropy_reward_sensitivity(double vx, double lambda,
                                         double cap_a) {
  return -vx * f_lambda_second(vx, lambda, cap_a);
}

// ---------------------------------------------------------------------------
// Boundary targets and coefficient bundle
// ---------------------------------------------------------------------------

/// Large-x limits of the value surface at the belief endpoints.
struct BoundaryTargets {
  double g0;  ///< limit at p = 0 (regime-2 certainty)
  double g1;  ///< limit at p = 1 (regime-1 certainty)
};

/// Closed-form endpoint limits: a 2x2 linear system in (g(0), g(1)) whose
/// determinant delta1*delta2 + delta1*q21 + delta2*q12 is always positive.
inline BoundaryTargets boundary_targets(const EnvParams& env, double lambda,
                                        double cap_a) {
  env.validate();
  const double f0 = f_lambda(0.0, lambda, cap_a);
  const double den =
      (env.delta1 + env.q12) * (env.delta2 + env.q21) - env.q12 * env.q21;
  return {(env.delta1 + env.q12 + env.q21) * f0 / den,
          (env.delta2 + env.q12 + env.q21) * f0 / den};
}

/// Belief-space ODE coefficients:
///   A(p) = beta0 * p^2 (1-p)^2   (diffusion of the belief, squared /2-free)
///   B(p) = q21 - (q12+q21) p     (belief drift)
///   C(p) = delta2 + (delta1-delta2) p   (filtered discount)
///   D(p) = mu2 + (mu1-mu2) p            (filtered drift)
struct CoefficientBundle {
  double beta0;   ///< (mu1-mu2)^2 / sigma^2
  double beta1;   ///< 2 (q21 - q12) / beta0
  EnvParams env;  ///< source parameters

  double A(double p) const {
    const double pq = p * (1.0 - p);
    return beta0 * pq * pq;
  }
  double B(double p) const { return env.q21 - (env.q12 + env.q21) * p; }
  double C(double p) const {
    return env.delta2 + (env.delta1 - env.delta2) * p;
  }
  double D(double p) const { return env.mu2 + (env.mu1 - env.mu2) * p; }
};

inline CoefficientBundle coefficients(const EnvParams& env) {
  env.validate();
  if (env.mu1 == env.mu2)
    throw ConfigError("coefficient bundle needs distinct regime drifts");
  const double diff = env.mu1 - env.mu2;
  const double beta0 = diff * diff / (env.sigma * env.sigma);
  return {beta0, 2.0 * (env.q21 - env.q12) / beta0, env};
}

// ---------------------------------------------------------------------------
// Exponent-rate quadratic
// ---------------------------------------------------------------------------

/// Largest positive root of F2*k^2 + F1*k + F0 = 0, computed by the
/// two-step formula q = -(F1 + sign(F1)*sqrt(disc))/2, roots q/F2 and F0/q,
/// which avoids subtractive cancellation for widely separated roots.
/// Throws NoPositiveRoot (carrying the discriminant) if no positive real
/// root exists.
inline double kappa_from_quadratic(double F2, double F1, double F0) {
  if (F2 == 0.0) {
    if (F1 == 0.0) throw NoPositiveRoot(0.0);
    const double root = -F0 / F1;
    if (root > 0.0) return root;
    throw NoPositiveRoot(F1 * F1);
  }
  const double disc = F1 * F1 - 4.0 * F2 * F0;
  if (!(disc >= 0.0)) throw NoPositiveRoot(disc);
  const double s = std::sqrt(disc);
  const double q = -0.5 * (F1 >= 0.0 ? F1 + s : F1 - s);
  double best = -1.0;
  if (q != 0.0) {
    const double r1 = q / F2;
    const double r2 = F0 / q;
    if (r1 > 0.0) best = std::max(best, r1);
    if (r2 > 0.0) best = std::max(best, r2);
  } else {
    // F1 = 0 and F2*F0 = 0 edge: fall back to the symmetric pair.
    const double r = std::sqrt(std::max(0.0, -F0 / F2));
    if (r > 0.0) best = r;
  }
  if (best <= 0.0) throw NoPositiveRoot(disc);
  return best;
}

// ---------------------------------------------------------------------------
// Two-exponential value ansatz at a point
// ---------------------------------------------------------------------------

/// Value and slope of v(x) = g1 (1-e^{-k1 x}) + g2 (1-e^{-k2 x}).
struct SurfacePoint {
  double v;   ///< value
  double vx;  ///< slope in x
};

inline SurfacePoint value_surface(double g1, double g2, double k1, double k2,
                                  double x) {
  if (x < 0.0) throw DomainError("value_surface: x must be nonnegative");
  const double e1 = std::exp(-k1 * x);
  const double e2 = std::exp(-k2 * x);
  return {g1 * (1.0 - e1) + g2 * (1.0 - e2), g1 * k1 * e1 + g2 * k2 * e2};
}

// ---------------------------------------------------------------------------
// Trainable parameter vector
// ---------------------------------------------------------------------------

/// Parameters of the trainable value/policy family.
///
/// Layout of the flattened gradient vector (dimension 2*(m+1)^2 + 5):
///   [phi1 (row-major j,k) | phi2 | gamma_0..gamma_4].
/// Each g_i is a positively-weighted polynomial sum
///   g_i(p) = (f_lambda(0)/delta_i) * sum_{j,k<=m} p^j (1-p)^k e^{phi^i_{jk}},
/// and the gamma block shapes the weight density via e^{gamma} =
/// (sigma^2, mu1, mu2, q21, q12) surrogates.
struct ThetaParams {
  int m = 2;                       ///< polynomial degree per factor
  std::vector<double> phi1, phi2;  ///< size (m+1)^2 each, index j*(m+1)+k
  std::array<double, 5> gamma{};   ///< log-environment block

  int phi_size() const { return (m + 1) * (m + 1); }
  int dim() const { return 2 * phi_size() + 5; }

  /// Training initialization: flat -3 log-weights and
  /// gamma = (ln 0.07, 0, 0, 0, 0).
  static ThetaParams initial(int m = 2) {
    ThetaParams t;
    t.m = m;
    t.phi1.assign(static_cast<std::size_t>((m + 1) * (m + 1)), -3.0);
    t.phi2 = t.phi1;
    t.gamma = {std::log(0.07), 0.0, 0.0, 0.0, 0.0};
    return t;
  }

  void validate() const {
    if (m < 0) throw ConfigError("polynomial degree must be nonnegative");
    const auto n = static_cast<std::size_t>(phi_size());
    if (phi1.size() != n || phi2.size() != n)
      throw ConfigError("phi block size does not match degree");
  }
};

/// Pointwise evaluator for the parametric g family with cached e^{phi}.
class GFamily {
 public:
  GFamily(const ThetaParams& theta, double delta1, double delta2,
          double lambda, double cap_a)
      : m_(theta.m),
        scale1_(f_lambda(0.0, lambda, cap_a) / delta1),
        scale2_(f_lambda(0.0, lambda, cap_a) / delta2) {
    theta.validate();
    ephi1_.resize(theta.phi1.size());
    ephi2_.resize(theta.phi2.size());
    for (std::size_t t = 0; t < theta.phi1.size(); ++t)
      ephi1_[t] = std::exp(theta.phi1[t]);
    for (std::size_t t = 0; t < theta.phi2.size(); ++t)
      ephi2_[t] = std::exp(theta.phi2[t]);
  }

  int degree() const { return m_; }
  double scale(int i) const { return i == 1 ? scale1_ : scale2_; }

  /// g_i(p).
  double value(int i, double p) const {
    const auto& e = (i == 1) ? ephi1_ : ephi2_;
    double acc = 0.0;
    std::size_t t = 0;
    for (int j = 0; j <= m_; ++j)
      for (int k = 0; k <= m_; ++k)
        acc += e[t++] * pow_i(p, j) * pow_i(1.0 - p, k);
    return scale(i) * acc;
  }

  /// d g_i / dp.
  double deriv(int i, double p) const {
    const auto& e = (i == 1) ? ephi1_ : ephi2_;
    double acc = 0.0;
    std::size_t t = 0;
    for (int j = 0; j <= m_; ++j)
      for (int k = 0; k <= m_; ++k) {
        double d = 0.0;
        if (j > 0) d += j * pow_i(p, j - 1) * pow_i(1.0 - p, k);
        if (k > 0) d -= k * pow_i(p, j) * pow_i(1.0 - p, k - 1);
        acc += e[t++] * d;
      }
    return scale(i) * acc;
  }

  /// Per-entry gradient dg_i/dphi^i_{jk} (the jk-th summand itself),
  /// written to out[(m+1)^2].
  void grad(int i, double p, double* out) const {
    const auto& e = (i == 1) ? ephi1_ : ephi2_;
    const double s = scale(i);
    std::size_t t = 0;
    for (int j = 0; j <= m_; ++j)
      for (int k = 0; k <= m_; ++k, ++t)
        out[t] = s * e[t] * pow_i(p, j) * pow_i(1.0 - p, k);
  }

 private:
  static double pow_i(double base, int n) {
    double r = 1.0;
    for (int t = 0; t < n; ++t) r *= base;
    return r;
  }

  int m_;
  double scale1_, scale2_;
  std::vector<double> ephi1_, ephi2_;
};

/// Quantities derived from the gamma block, with a floor on the squared
/// signal slope gb0 so the symmetric point e^{gamma_1} = e^{gamma_2}
/// (where the density degenerates) stays evaluable.  Below the floor the
/// gb0 derivatives are taken as zero; the exact derivatives vanish at the
/// symmetric point, so the pass-through is consistent.
struct GammaDerived {
  std::array<double, 5> e;    ///< e^{gamma_j}
  double gb0;                 ///< (e1-e2)^2/e0, floored below
  double gb1;                 ///< 2 (e3-e4)/gb0
  bool floored;               ///< true if the floor is binding
  std::array<double, 5> dgb0;  ///< d gb0 / d gamma_j
  std::array<double, 5> dgb1;  ///< d gb1 / d gamma_j

  static GammaDerived from(const std::array<double, 5>& gamma,
                           double gb0_floor = 1e-4) {
    GammaDerived d{};
    for (int j = 0; j < 5; ++j) d.e[j] = std::exp(gamma[j]);
    const double diff = d.e[1] - d.e[2];
    const double raw = diff * diff / d.e[0];
    d.floored = raw < gb0_floor;
    d.gb0 = d.floored ? gb0_floor : raw;
    d.gb1 = 2.0 * (d.e[3] - d.e[4]) / d.gb0;
    if (d.floored) {
      d.dgb0 = {0.0, 0.0, 0.0, 0.0, 0.0};
    } else {
      d.dgb0 = {-raw, 2.0 * d.e[1] * raw / diff, -2.0 * d.e[2] * raw / diff,
                0.0, 0.0};
    }
    for (int j = 0; j < 3; ++j) d.dgb1[j] = -d.gb1 / d.gb0 * d.dgb0[j];
    d.dgb1[3] = 2.0 * d.e[3] / d.gb0;
    d.dgb1[4] = -2.0 * d.e[4] / d.gb0;
    return d;
  }
};

/// log of the unnormalized weight density
///   w(p) ∝ p^{gb1-2} (1-p)^{-gb1-2} exp(-2/gb0 (e3/p + e4/(1-p))).
/// Throws DomainError at the endpoints (essential singularities).
inline double parametric_w_log_unnorm(const GammaDerived& gd, double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DomainError("parametric_w_log_unnorm: p must lie in (0,1)");
  return (gd.gb1 - 2.0) * std::log(p) + (-gd.gb1 - 2.0) * std::log1p(-p) -
         (2.0 / gd.gb0) * (gd.e[3] / p + gd.e[4] / (1.0 - p));
}

/// Gamma log-derivatives of the unnormalized weight (the normalization
/// term is a constant in p and is restored by the grid builder as the
/// weighted average of these values).  out[5].
inline void parametric_w_xi_raw(const GammaDerived& gd, double p,
                                double* out) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DomainError("parametric_w_xi_raw: p must lie in (0,1)");
  const double lp = std::log(p);
  const double l1p = std::log1p(-p);
  const double pen = gd.e[3] / p + gd.e[4] / (1.0 - p);
  for (int j = 0; j < 5; ++j) {
    double v = -gd.dgb0[j] / gd.gb0                      // -d ln gb0
               + gd.dgb1[j] * (lp - l1p)                 // power-law shift
               + 2.0 * gd.dgb0[j] / (gd.gb0 * gd.gb0) * pen;
    if (j == 3) v -= 2.0 / gd.gb0 * gd.e[3] / p;
    if (j == 4) v -= 2.0 / gd.gb0 * gd.e[4] / (1.0 - p);
    out[j] = v;
  }
}

/// Log-derivative of the closed-form weight in p (used for the analytic
/// flux derivative of the exact adjoint weight as well):
///   (ln w)'(p) = (gb1-2)/p + (gb1+2)/(1-p) + 2/gb0 (e3/p^2 - e4/(1-p)^2).
inline double parametric_w_dlog_dp(const GammaDerived& gd, double p) {
  const double omp = 1.0 - p;
  return (gd.gb1 - 2.0) / p + (gd.gb1 + 2.0) / omp +
         (2.0 / gd.gb0) * (gd.e[3] / (p * p) - gd.e[4] / (omp * omp));
}

}  // namespace rsdiv
