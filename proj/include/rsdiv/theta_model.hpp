/**
 * @file theta_model.hpp
 * @brief Grid-level machinery for the trainable value surface.
 *
 * The trainable surface v(x,p) = sum_i g_i(p)(1 - e^{-k_i x}) needs, per
 * parameter vector theta = (phi1, phi2, gamma):
 *
 *  1. the weight density w^gamma on a fixed quadrature grid in p,
 *     normalized to unit trapezoid integral, together with its centered
 *     log-derivatives Xi_j (centering restores the derivative of the
 *     normalizing constant, exactly for the discrete quadrature);
 *  2. the projected quadratic coefficients
 *        F2_i = (e^{g0}/2) Int g_i w,
 *        F0_i = -Int C g_i w,
 *        F1_i = -(e^{g1}-e^{g2}) Int p(1-p) g_i' w
 *               - Int (f'(0) + e^{g2} + (e^{g1}-e^{g2}) p) g_i w,
 *     where the flux term is the integration-by-parts form of
 *     Int (p(1-p)w)' g_i (endpoint terms vanish with w);
 *  3. the positive exponent rates k_i solving F2 k^2 + F1 k + F0 = 0 and
 *     their parameter derivatives dk = -(k^2 dF2 + k dF1 + dF0)/sqrt(disc);
 *  4. pointwise value/slope evaluation with the full theta-gradient.
 *
 * The quadrature grid is deliberately independent of gamma: with a fixed
 * grid the analytic gradients below are the exact derivatives of the
 * discretized functional, so finite-difference checks agree to truncation
 * error even where the density is nearly degenerate.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rsdiv/errors.hpp"
#include "rsdiv/model.hpp"

namespace rsdiv {

/// Fixed quadrature grid for the p-integrals of the trainable surface.
struct QuadratureConfig {
  int n = 4001;            ///< number of nodes (>= 3)
  double eps = 1e-6;       ///< endpoint inset; integrate over [eps, 1-eps]
  double gb0_floor = 1e-4; ///< floor for the squared-slope surrogate gb0

  void validate() const {
    if (n < 3) throw ConfigError("quadrature grid needs at least 3 nodes");
    if (!(eps > 0.0) || !(eps < 0.5))
      throw ConfigError("quadrature inset must lie in (0, 0.5)");
    if (!(gb0_floor > 0.0))
      throw ConfigError("gb0 floor must be positive");
  }
};

/// Fully assembled trainable surface at one parameter vector.
class ThetaModel {
 public:
  ThetaModel(const ThetaParams& theta, const EnvParams& env,
             const ControlConfig& ctrl, const QuadratureConfig& quad = {})
      : theta_(theta),
        env_(env),
        ctrl_(ctrl),
        quad_(quad),
        gfam_(theta, env.delta1, env.delta2, ctrl.lambda, ctrl.cap_a) {
    env_.validate();
    ctrl_.validate();
    quad_.validate();
    theta_.validate();
    build();
  }

  int dim() const { return theta_.dim(); }
  const ThetaParams& theta() const { return theta_; }
  double kappa(int i) const { return i == 1 ? kappa1_ : kappa2_; }
  /// d kappa_i / d theta, flattened [phi1 | phi2 | gamma].
  const std::vector<double>& kappa_grad(int i) const {
    return i == 1 ? dkappa1_ : dkappa2_;
  }

  /// g_i^phi and its p-derivative at arbitrary p (no grid involved).
  double g(int i, double p) const { return gfam_.value(i, p); }
  double g_deriv(int i, double p) const { return gfam_.deriv(i, p); }

  /// Value and slope at (x, p).
  SurfacePoint at(double x, double p) const {
    return value_surface(gfam_.value(1, p), gfam_.value(2, p), kappa1_,
                         kappa2_, x);
  }

  /// Full gradient of (v, v_x) at (x, p); each output has dim() entries.
  void grad(double x, double p, std::vector<double>& dv,
            std::vector<double>& dvx) const {
    const int nb = theta_.phi_size();
    dv.assign(dim(), 0.0);
    dvx.assign(dim(), 0.0);
    std::vector<double> basis(nb);
    for (int i = 1; i <= 2; ++i) {
      const double k = kappa(i);
      const double ek = std::exp(-k * x);
      const double gi = gfam_.value(i, p);
      const double wv = 1.0 - ek;       // dv weight of dg
      const double wk_v = gi * x * ek;  // dv weight of dkappa
      const double wvx = k * ek;        // dvx weight of dg
      const double wk_vx = gi * ek * (1.0 - k * x);
      gfam_.grad(i, p, basis.data());
      const int off = (i == 1) ? 0 : nb;
      for (int t = 0; t < nb; ++t) {
        dv[off + t] += wv * basis[t];
        dvx[off + t] += wvx * basis[t];
      }
      const auto& dk = kappa_grad(i);
      for (int r = 0; r < dim(); ++r) {
        dv[r] += wk_v * dk[r];
        dvx[r] += wk_vx * dk[r];
      }
    }
  }

  /// Endpoint sums g_1^phi(j) + g_2^phi(j) for j in {0, 1} and their
  /// phi-gradients (gamma entries are zero); used by boundary penalties.
  double endpoint_sum(int j) const {
    return g(1, double(j)) + g(2, double(j));
  }
  void endpoint_sum_grad(int j, std::vector<double>& out) const {
    const int nb = theta_.phi_size();
    out.assign(dim(), 0.0);
    std::vector<double> basis(nb);
    for (int i = 1; i <= 2; ++i) {
      gfam_.grad(i, double(j), basis.data());
      const int off = (i == 1) ? 0 : nb;
      for (int t = 0; t < nb; ++t) out[off + t] = basis[t];
    }
  }

  /// Derived gamma quantities (for diagnostics and tests).
  const GammaDerived& gamma_derived() const { return gd_; }
  /// Projected quadratic coefficients (F2, F1, F0) for split i.
  std::array<double, 3> coefficients_f(int i) const {
    const int ii = i - 1;
    return {F2_[ii], F1_[ii], F0_[ii]};
  }
  /// Their theta-gradients: which_f in {0: F2, 1: F1, 2: F0}.
  const std::vector<double>& coefficient_grad(int i, int which_f) const {
    return dF_[(i - 1) * 3 + which_f];
  }

 private:
  void build() {
    const int n = quad_.n;
    const int nb = theta_.phi_size();
    const int d = dim();
    const int goff = 2 * nb;
    const double lo = quad_.eps;
    const double h = (1.0 - 2.0 * quad_.eps) / (n - 1);

    gd_ = GammaDerived::from(theta_.gamma, quad_.gb0_floor);
    const double fp0 = f_lambda_prime(0.0, ctrl_.lambda, ctrl_.cap_a);
    const double e0 = gd_.e[0], e1 = gd_.e[1], e2 = gd_.e[2];
    const double dd = env_.delta1 - env_.delta2;

    // --- weight density on the grid, normalized to unit integral -------
    std::vector<double> p(n), tw(n), w(n);
    std::vector<std::array<double, 5>> xi(n);
    double lwmax = -1e300;
    for (int t = 0; t < n; ++t) {
      p[t] = lo + h * t;
      tw[t] = (t == 0 || t == n - 1) ? 0.5 * h : h;
      w[t] = parametric_w_log_unnorm(gd_, p[t]);
      if (w[t] > lwmax) lwmax = w[t];
    }
    double z = 0.0;
    for (int t = 0; t < n; ++t) {
      w[t] = std::exp(w[t] - lwmax);
      z += tw[t] * w[t];
    }
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericalError("weight density vanished on the quadrature grid");
    for (int t = 0; t < n; ++t) w[t] /= z;

    std::array<double, 5> xibar{};
    for (int t = 0; t < n; ++t) {
      parametric_w_xi_raw(gd_, p[t], xi[t].data());
      for (int j = 0; j < 5; ++j) xibar[j] += tw[t] * w[t] * xi[t][j];
    }
    for (int t = 0; t < n; ++t)
      for (int j = 0; j < 5; ++j) xi[t][j] -= xibar[j];

    // --- integrals and their parameter derivatives ---------------------
    dF_.assign(6, std::vector<double>(d, 0.0));
    std::vector<double> basis(nb), dbasis(nb);

    for (int i = 1; i <= 2; ++i) {
      const int ii = i - 1;
      const int off = ii * nb;
      double Ig = 0.0, Iflux = 0.0, IC = 0.0, ID = 0.0;
      double Ipg = 0.0, Iompg = 0.0;
      std::vector<double> dIg(d, 0.0), dIflux(d, 0.0), dIC(d, 0.0),
          dID(d, 0.0);
      for (int t = 0; t < n; ++t) {
        const double pt = p[t];
        const double wt = tw[t] * w[t];
        if (wt == 0.0) continue;
        const double gi = gfam_.value(i, pt);
        const double gpi = gfam_.deriv(i, pt);
        const double cc = env_.delta2 + dd * pt;      // true discount curve
        const double dc = fp0 + e2 + (e1 - e2) * pt;  // drift surrogate
        const double pq = pt * (1.0 - pt);

        Ig += wt * gi;
        Iflux += wt * pq * gpi;
        IC += wt * cc * gi;
        ID += wt * dc * gi;
        Ipg += wt * pt * gi;
        Iompg += wt * (1.0 - pt) * gi;

        // phi-block: the integrals are linear in g_i, so each derivative
        // is the same integral with g_i replaced by its jk-th summand.
        gfam_.grad(i, pt, basis.data());
        grad_deriv(i, pt, dbasis.data());
        for (int r = 0; r < nb; ++r) {
          dIg[off + r] += wt * basis[r];
          dIflux[off + r] += wt * pq * dbasis[r];
          dIC[off + r] += wt * cc * basis[r];
          dID[off + r] += wt * dc * basis[r];
        }
        // gamma-block through the density: d w = w * Xi_j.
        for (int j = 0; j < 5; ++j) {
          const double xw = wt * xi[t][j];
          dIg[goff + j] += xw * gi;
          dIflux[goff + j] += xw * pq * gpi;
          dIC[goff + j] += xw * cc * gi;
          dID[goff + j] += xw * dc * gi;
        }
      }

      F2_[ii] = 0.5 * e0 * Ig;
      F0_[ii] = -IC;
      F1_[ii] = -(e1 - e2) * Iflux - ID;

      auto& dF2 = dF_[ii * 3 + 0];
      auto& dF1 = dF_[ii * 3 + 1];
      auto& dF0 = dF_[ii * 3 + 2];
      for (int r = 0; r < d; ++r) {
        dF2[r] = 0.5 * e0 * dIg[r];
        dF0[r] = -dIC[r];
        dF1[r] = -(e1 - e2) * dIflux[r] - dID[r];
      }
      // explicit gamma prefactors outside the integrals
      dF2[goff + 0] += F2_[ii];
      dF1[goff + 1] += -e1 * Iflux - e1 * Ipg;
      dF1[goff + 2] += e2 * Iflux - e2 * Iompg;
    }

    // --- exponent rates and their gradients ----------------------------
    for (int i = 1; i <= 2; ++i) {
      const int ii = i - 1;
      const double k = kappa_from_quadratic(F2_[ii], F1_[ii], F0_[ii]);
      const double disc = F1_[ii] * F1_[ii] - 4.0 * F2_[ii] * F0_[ii];
      const double sq = std::sqrt(std::max(disc, 0.0));
      if (!(sq > 0.0))
        throw NumericalError("degenerate exponent-rate quadratic");
      auto& dk = (i == 1) ? dkappa1_ : dkappa2_;
      dk.assign(d, 0.0);
      const auto& dF2 = dF_[ii * 3 + 0];
      const auto& dF1 = dF_[ii * 3 + 1];
      const auto& dF0 = dF_[ii * 3 + 2];
      for (int r = 0; r < d; ++r)
        dk[r] = -(k * k * dF2[r] + k * dF1[r] + dF0[r]) / sq;
      (i == 1 ? kappa1_ : kappa2_) = k;
    }
  }

  /// d/dp of the jk-th summand of g_i (same layout as GFamily::grad).
  void grad_deriv(int i, double pp, double* out) const {
    const int m = theta_.m;
    const auto& phi = (i == 1) ? theta_.phi1 : theta_.phi2;
    const double s = gfam_.scale(i);
    std::size_t t = 0;
    for (int j = 0; j <= m; ++j)
      for (int k = 0; k <= m; ++k, ++t) {
        double dpow = 0.0;
        if (j > 0) dpow += j * ipow(pp, j - 1) * ipow(1.0 - pp, k);
        if (k > 0) dpow -= k * ipow(pp, j) * ipow(1.0 - pp, k - 1);
        out[t] = s * std::exp(phi[t]) * dpow;
      }
  }

  static double ipow(double b, int n) {
    double r = 1.0;
    for (int t = 0; t < n; ++t) r *= b;
    return r;
  }

  ThetaParams theta_;
  EnvParams env_;
  ControlConfig ctrl_;
  QuadratureConfig quad_;
  GFamily gfam_;
  GammaDerived gd_{};
  std::array<double, 2> F2_{}, F1_{}, F0_{};
  std::vector<std::vector<double>> dF_;  ///< [i*3 + {0:F2, 1:F1, 2:F0}]
  double kappa1_ = 0.0, kappa2_ = 0.0;
  std::vector<double> dkappa1_, dkappa2_;
};

}  // namespace rsdiv
