#pragma once
/**
 * Artifact serialization: every file the command-line driver emits is
 * produced here as a string (CSV or JSON), so tests can check content
 * without touching the filesystem.  Writers are deterministic: the same
 * inputs always produce the same bytes.
 *
 * Precision conventions:
 *   - machine artifacts (path dumps, training logs, checkpoints, solution
 *     JSON) carry full double fidelity and round-trip exactly;
 *   - presentation tables use fixed 6-decimal columns.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdiv/config.hpp"
#include "rsdiv/errors.hpp"
#include "rsdiv/estimation.hpp"
#include "rsdiv/evaluation.hpp"
#include "rsdiv/fd.hpp"
#include "rsdiv/market.hpp"
#include "rsdiv/trainer.hpp"

namespace rsdiv {

// ---------------------------------------------------------------------------
// Formatting / filesystem primitives
// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to exactly the same double.
inline std::string fmt_full(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  for (int prec = 15; prec <= 17; ++prec) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Fixed 6-decimal presentation format for tables.
inline std::string fmt_table(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Raw path dumps
// ---------------------------------------------------------------------------

/// One simulated market path, one row per grid time.  The Brownian
/// increment column covers [t_k, t_{k+1}) and is empty on the final row;
/// `absorbed` turns 1 from the ruin time on, making absorption visible.
inline std::string raw_path_csv(const RawPath& path) {
  std::string out = "step,time,surplus,regime,brownian_increment,absorbed\n";
  const std::size_t n1 = path.times.size();
  for (std::size_t k = 0; k < n1; ++k) {
    out += std::to_string(k);
    out += ',';
    out += fmt_full(path.times[k]);
    out += ',';
    out += fmt_full(path.surplus[k]);
    out += ',';
    out += std::to_string(path.regimes[k]);
    out += ',';
    if (k < path.dW.size()) out += fmt_full(path.dW[k]);
    out += ',';
    out += (static_cast<long>(k) >= static_cast<long>(path.ruin_index)) ? '1'
                                                                        : '0';
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training artifacts
// ---------------------------------------------------------------------------

/// Per-iteration training diagnostics at full precision.  The exp_gamma_*
/// columns are the environment values implied by the current log-parameter
/// block, in the order (sigma^2, mu1, mu2, q21, q12).
inline std::string train_log_csv(const TrainLog& log) {
  std::string out =
      "iteration,value,loss,loss_ma,exp_gamma_sigma2,exp_gamma_mu1,"
      "exp_gamma_mu2,exp_gamma_q21,exp_gamma_q12,grad_norm,aborted,rejected\n";
  for (const TrainRecord& r : log.records) {
    out += std::to_string(r.iteration);
    out += ',';
    out += fmt_full(r.value);
    out += ',';
    out += fmt_full(r.loss);
    out += ',';
    out += fmt_full(r.loss_ma);
    for (double e : r.e_gamma) {
      out += ',';
      out += fmt_full(e);
    }
    out += ',';
    out += fmt_full(r.grad_norm);
    out += ',';
    out += r.aborted ? '1' : '0';
    out += ',';
    out += r.rejected ? '1' : '0';
    out += '\n';
  }
  return out;
}

/// Everything needed to continue a training run exactly where it stopped:
/// the parameter vector, how many iterations are already done, and the
/// filter parameters in effect after the last one.
struct Checkpoint {
  ThetaParams theta{};
  long iterations_done = 0;
  EnvParams env_filter{};
  std::string mode = "ctd";       ///< ml | ctd | ctd-star
  std::string filter = "true";    ///< true | est
  std::uint64_t seed = 0;
};

inline std::string checkpoint_json(const Checkpoint& c) {
  cjson j{{"mode", c.mode},
          {"filter", c.filter},
          {"seed", c.seed},
          {"iterations_done", c.iterations_done},
          {"env_filter", to_json(c.env_filter)},
          {"theta", cjson{{"m", c.theta.m},
                          {"phi1", c.theta.phi1},
                          {"phi2", c.theta.phi2},
                          {"gamma", c.theta.gamma}}}};
  return j.dump(2) + "\n";
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  cjson j;
  try {
    j = cjson::parse(text);
  } catch (const cjson::exception& e) {
    throw ConfigError(std::string("checkpoint is not valid JSON: ") +
                      e.what());
  }
  detail::require_object(j, "checkpoint");
  detail::check_known(j, "checkpoint", {"mode", "filter", "seed",
                                        "iterations_done", "env_filter",
                                        "theta"});
  Checkpoint c;
  detail::read_field(j, "checkpoint", "mode", c.mode);
  detail::read_field(j, "checkpoint", "filter", c.filter);
  detail::read_field(j, "checkpoint", "seed", c.seed);
  detail::read_field(j, "checkpoint", "iterations_done", c.iterations_done);
  if (j.contains("env_filter"))
    from_json_section(j.at("env_filter"), c.env_filter,
                      "checkpoint.env_filter");
  if (!j.contains("theta"))
    throw ConfigError("checkpoint is missing the parameter block");
  const cjson& t = j.at("theta");
  detail::require_object(t, "checkpoint.theta");
  detail::check_known(t, "checkpoint.theta", {"m", "phi1", "phi2", "gamma"});
  detail::read_field(t, "checkpoint.theta", "m", c.theta.m);
  detail::read_field(t, "checkpoint.theta", "phi1", c.theta.phi1);
  detail::read_field(t, "checkpoint.theta", "phi2", c.theta.phi2);
  detail::read_fixed_array(t, "checkpoint.theta", "gamma", c.theta.gamma);
  c.theta.validate();
  if (c.iterations_done < 0)
    throw ConfigError("checkpoint iteration count must be >= 0");
  return c;
}

// ---------------------------------------------------------------------------
// Benchmark solution artifacts
// ---------------------------------------------------------------------------

inline std::string fd_solution_json(const FdSolution& s) {
  cjson j{{"grid_m", s.grid.m},
          {"env", to_json(s.env)},
          {"lambda", s.lambda},
          {"cap_a", s.cap_a},
          {"kappa1", s.kappa1},
          {"kappa2", s.kappa2},
          {"w1_at0", s.splits.w1_at0},
          {"w1_at1", s.splits.w1_at1},
          {"bval0", s.bval0},
          {"bval1", s.bval1},
          {"residual0", s.residual0},
          {"residual1", s.residual1},
          {"converged", s.converged},
          {"stationary", s.stationary},
          {"outer_iterations", s.outer_iterations},
          {"g1", s.g1},
          {"g2", s.g2}};
  return j.dump(2) + "\n";
}

/// Tidy long-format surface dump for external plotting: one row per
/// (cap, volatility, belief node).
inline std::string fd_surface_csv(const std::vector<FdSolution>& runs) {
  std::string out = "cap_a,sigma,p,g1,g2\n";
  for (const FdSolution& s : runs) {
    const std::string prefix = fmt_full(s.cap_a) + "," + fmt_full(s.env.sigma);
    for (int j = 0; j < s.grid.nodes(); ++j) {
      out += prefix;
      out += ',';
      out += fmt_full(s.grid.p(j));
      out += ',';
      out += fmt_full(s.g1[static_cast<std::size_t>(j)]);
      out += ',';
      out += fmt_full(s.g2[static_cast<std::size_t>(j)]);
      out += '\n';
    }
  }
  return out;
}

/// One diagnostics row per solved configuration.
inline std::string fd_summary_csv(const std::vector<FdSolution>& runs) {
  std::string out =
      "cap_a,sigma,kappa1,kappa2,w1_at0,w1_at1,bval0,bval1,residual0,"
      "residual1,converged,stationary,outer_iterations,value_x1_p05\n";
  for (const FdSolution& s : runs) {
    out += fmt_full(s.cap_a);
    out += ',';
    out += fmt_full(s.env.sigma);
    out += ',';
    out += fmt_full(s.kappa1);
    out += ',';
    out += fmt_full(s.kappa2);
    out += ',';
    out += fmt_full(s.splits.w1_at0);
    out += ',';
    out += fmt_full(s.splits.w1_at1);
    out += ',';
    out += fmt_full(s.bval0);
    out += ',';
    out += fmt_full(s.bval1);
    out += ',';
    out += fmt_full(s.residual0);
    out += ',';
    out += fmt_full(s.residual1);
    out += ',';
    out += s.converged ? '1' : '0';
    out += ',';
    out += s.stationary ? '1' : '0';
    out += ',';
    out += std::to_string(s.outer_iterations);
    out += ',';
    out += fmt_full(s.at(1.0, 0.5).v);
    out += '\n';
  }
  return out;
}

namespace detail {

/// Ordinary least-squares quadratic on the uniform unit grid, with the
/// mean absolute error normalized by the mean absolute value of the data.
struct QuadraticFit {
  std::array<double, 3> coef{};  ///< c0 + c1 p + c2 p^2
  double nmae = 0.0;
};

inline QuadraticFit quadratic_fit(const std::vector<double>& g) {
  const int n = static_cast<int>(g.size());
  if (n < 3) throw ConfigError("quadratic fit needs at least three nodes");
  double S[5] = {0, 0, 0, 0, 0}, T[3] = {0, 0, 0};
  for (int j = 0; j < n; ++j) {
    const double p = static_cast<double>(j) / (n - 1);
    double pk = 1.0;
    for (int k = 0; k <= 4; ++k) {
      S[k] += pk;
      if (k <= 2) T[k] += g[static_cast<std::size_t>(j)] * pk;
      pk *= p;
    }
  }
  const double A[3][3] = {
      {S[0], S[1], S[2]}, {S[1], S[2], S[3]}, {S[2], S[3], S[4]}};
  auto det3 = [](const double M[3][3]) {
    return M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
           M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
           M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
  };
  const double d = det3(A);
  QuadraticFit fit;
  for (int k = 0; k < 3; ++k) {
    double Ak[3][3];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) Ak[r][c] = A[r][c];
    for (int r = 0; r < 3; ++r) Ak[r][k] = T[r];
    fit.coef[static_cast<std::size_t>(k)] = det3(Ak) / d;
  }
  double mae = 0.0, scale = 0.0;
  for (int j = 0; j < n; ++j) {
    const double p = static_cast<double>(j) / (n - 1);
    const double fitted =
        fit.coef[0] + p * (fit.coef[1] + p * fit.coef[2]);
    mae += std::abs(fitted - g[static_cast<std::size_t>(j)]);
    scale += std::abs(g[static_cast<std::size_t>(j)]);
  }
  fit.nmae = mae / scale;  // the 1/n factors cancel
  return fit;
}

}  // namespace detail

/// Quadratic-fit quality per mode profile: coefficients and normalized
/// mean absolute error, one row per (cap, volatility, mode).
inline std::string fd_ols_csv(const std::vector<FdSolution>& runs) {
  std::string out = "cap_a,sigma,mode,c0,c1,c2,nmae\n";
  for (const FdSolution& s : runs) {
    for (int mode = 1; mode <= 2; ++mode) {
      const auto fit = detail::quadratic_fit(mode == 1 ? s.g1 : s.g2);
      out += fmt_full(s.cap_a);
      out += ',';
      out += fmt_full(s.env.sigma);
      out += ',';
      out += std::to_string(mode);
      for (double c : fit.coef) {
        out += ',';
        out += fmt_full(c);
      }
      out += ',';
      out += fmt_full(fit.nmae);
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimation table
// ---------------------------------------------------------------------------

namespace detail {

inline double env_field(const EnvParams& e, int idx) {
  switch (idx) {
    case 0: return e.sigma;
    case 1: return e.mu1;
    case 2: return e.mu2;
    case 3: return e.q12;
    default: return e.q21;
  }
}

struct ColumnStats {
  double mean = 0.0;
  double sd = 0.0;
  long n = 0;
};

/// Mean / sample sd over the finite entries only; parameters a degenerate
/// path could not identify are NaN and drop out of the aggregate.
inline ColumnStats column_stats(const std::vector<EstimationReport>& reports,
                                int idx) {
  ColumnStats st;
  double sum = 0.0;
  for (const auto& r : reports) {
    const double v = env_field(r.estimates, idx);
    if (std::isfinite(v)) {
      sum += v;
      ++st.n;
    }
  }
  if (st.n == 0) {
    st.mean = std::numeric_limits<double>::quiet_NaN();
    st.sd = std::numeric_limits<double>::quiet_NaN();
    return st;
  }
  st.mean = sum / static_cast<double>(st.n);
  if (st.n < 2) {
    st.sd = std::numeric_limits<double>::quiet_NaN();
    return st;
  }
  double ss = 0.0;
  for (const auto& r : reports) {
    const double v = env_field(r.estimates, idx);
    if (std::isfinite(v)) {
      const double d = v - st.mean;
      ss += d * d;
    }
  }
  st.sd = std::sqrt(ss / static_cast<double>(st.n - 1));
  return st;
}

}  // namespace detail

/// Averaged estimates across a path batch, one row per parameter.  The *_n
/// columns count the paths whose estimate was finite (degenerate paths
/// cannot identify every parameter); means and sds are taken over those.
/// Pass an empty EM vector to emit blank EM columns.
inline std::string estimation_table_csv(
    const EnvParams& truth, const std::vector<EstimationReport>& heuristic,
    const std::vector<EstimationReport>& em) {
  static const char* names[5] = {"sigma", "mu1", "mu2", "q12", "q21"};
  std::string out =
      "parameter,true_value,heuristic_mean,heuristic_sd,heuristic_n,"
      "em_mean,em_sd,em_n\n";
  for (int idx = 0; idx < 5; ++idx) {
    out += names[idx];
    out += ',';
    out += fmt_table(detail::env_field(truth, idx));
    const auto h = detail::column_stats(heuristic, idx);
    out += ',';
    out += fmt_table(h.mean);
    out += ',';
    out += fmt_table(h.sd);
    out += ',';
    out += std::to_string(h.n);
    if (em.empty()) {
      out += ",,,0";
    } else {
      const auto m = detail::column_stats(em, idx);
      out += ',';
      out += fmt_table(m.mean);
      out += ',';
      out += fmt_table(m.sd);
      out += ',';
      out += std::to_string(m.n);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation artifacts
// ---------------------------------------------------------------------------

/// One evaluated policy under one filter-parameter choice.
struct EvalRow {
  std::string policy;  ///< e.g. "optimal", "ctd", "ml"
  std::string filter;  ///< "true" or "est"
  EvalReport report{};
};

/// Fixed-schema comparison table: value statistics, annualized ratios, and
/// the regularization-free dividend column, one row per policy/filter.
inline std::string evaluation_table_csv(const std::vector<EvalRow>& rows) {
  std::string out =
      "policy,filter,mean,variance,snr,sharpe_sr,sharpe_ri,mean_dividend,"
      "n_paths,n_ruined\n";
  for (const EvalRow& r : rows) {
    out += r.policy;
    out += ',';
    out += r.filter;
    out += ',';
    out += fmt_table(r.report.mean_value);
    out += ',';
    out += fmt_table(r.report.var_value);
    out += ',';
    out += fmt_table(r.report.snr);
    out += ',';
    out += fmt_table(r.report.sharpe_sr);
    out += ',';
    out += fmt_table(r.report.sharpe_ri);
    out += ',';
    out += fmt_table(r.report.mean_dividend);
    out += ',';
    out += std::to_string(r.report.n_paths);
    out += ',';
    out += std::to_string(r.report.n_ruined);
    out += '\n';
  }
  return out;
}

/// Full-fidelity single-evaluation record.
inline std::string eval_report_json(const EvalRow& row) {
  cjson j{{"policy", row.policy},
          {"filter", row.filter},
          {"mean_value", row.report.mean_value},
          {"var_value", row.report.var_value},
          {"snr", row.report.snr},
          {"sharpe_sr", row.report.sharpe_sr},
          {"sharpe_ri", row.report.sharpe_ri},
          {"mean_dividend", row.report.mean_dividend},
          {"n_paths", row.report.n_paths},
          {"n_ruined", row.report.n_ruined},
          {"pooled_steps", row.report.pooled_steps},
          {"x0", row.report.x0},
          {"p0", row.report.p0},
          {"horizon", row.report.horizon},
          {"dt", row.report.dt}};
  return j.dump(2) + "\n";
}

}  // namespace rsdiv
