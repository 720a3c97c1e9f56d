#pragma once
/**
 * Run configuration: a single nested, human-editable JSON document that
 * wires every module together.  All defaults reproduce the benchmark
 * experiment, so an empty document (or no config file at all) runs the
 * reference setup unchanged.
 *
 * Guarantees:
 *   - serialize -> parse -> serialize is the identity on the emitted text;
 *   - unknown keys are rejected with a ConfigError naming the key (typo
 *     safety for hand-edited files); missing keys keep their defaults;
 *   - wrong-typed values raise ConfigError, never a raw JSON exception.
 *
 * The trainer section deliberately omits the grid, the control weights,
 * and the regularization anchor: those live once at the top level (sim,
 * control, env) and are copied into the trainer by wired_trainer(), so a
 * hand-edited file cannot hold two disagreeing copies.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsdiv/errors.hpp"
#include "rsdiv/estimation.hpp"
#include "rsdiv/evaluation.hpp"
#include "rsdiv/fd.hpp"
#include "rsdiv/market.hpp"
#include "rsdiv/model.hpp"
#include "rsdiv/trainer.hpp"

namespace rsdiv {

using cjson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Sections that exist only at the orchestration level
// ---------------------------------------------------------------------------

/// Batch estimation runs: fresh dividend-free histories under the true
/// market, each fed to the windowed heuristic and (optionally) the EM
/// refinement; the table aggregates across paths.
struct EstimationSetup {
  HeuristicConfig heuristic{};
  EmConfig em{};
  long n_paths = 100;   ///< histories in the batch
  double years = 20.0;  ///< length of each history
  double x0 = 100.0;    ///< start level, high so absorption cannot bite
  bool run_em = true;   ///< also fit the EM columns

  void validate() const {
    if (n_paths < 1) throw ConfigError("estimation needs at least one path");
    if (!(years > 0.0))
      throw ConfigError("estimation window must be positive");
    if (!(x0 > 0.0))
      throw ConfigError("estimation start level must be positive");
    if (heuristic.lookback < 2)
      throw ConfigError("heuristic lookback must be >= 2");
    if (!(heuristic.eta_u > 0.0))
      throw ConfigError("heuristic threshold multiplier must be > 0");
    if (em.max_iters < 1 || !(em.tol > 0.0))
      throw ConfigError("EM iteration cap / tolerance invalid");
  }
};

/// Raw path dumps: surplus under a constant payout rate (0 = dividend-free
/// history).  A payout above the drifts makes absorption visible in the
/// dump.
struct SimulateSetup {
  long n_paths = 100;
  double years = 20.0;
  double x0 = 1.0;
  double dividend_rate = 0.0;

  void validate() const {
    if (n_paths < 1) throw ConfigError("simulate needs at least one path");
    if (!(years > 0.0)) throw ConfigError("simulate horizon must be positive");
    if (!(x0 >= 0.0)) throw ConfigError("simulate x0 must be nonnegative");
    if (!(dividend_rate >= 0.0))
      throw ConfigError("simulate dividend rate must be >= 0");
  }
};

/// Out-of-sample evaluation scale (grid and workers come from the top
/// level).
struct EvaluateSetup {
  long n_paths = 100000;

  void validate() const {
    if (n_paths < 2) throw ConfigError("evaluation needs at least two paths");
  }
};

// ---------------------------------------------------------------------------
// Top-level run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 12345;  ///< master seed; --seed overrides
  int workers = 0;             ///< 0 = all available cores
  std::string out_dir = "out";

  EnvParams env{};          ///< true market parameters
  SimConfig sim{};          ///< episode grid and initial state
  ControlConfig control{};  ///< exploration weight and action cap
  TrainerConfig trainer{};  ///< grid/control/anchor wired per command
  EstimationSetup estimation{};
  FdConfig fd{};
  SimulateSetup simulate{};
  EvaluateSetup evaluate{};

  void validate() const {
    env.validate();
    sim.validate();
    control.validate();
    trainer.validate();
    estimation.validate();
    fd.validate();
    simulate.validate();
    evaluate.validate();
    if (workers < 0) throw ConfigError("workers must be >= 0");
    if (out_dir.empty()) throw ConfigError("output directory must be set");
  }
};

/// Copies the single top-level grid/control sections into the trainer and
/// sets the mode and the regularization anchor for this run.
inline TrainerConfig wired_trainer(const RunConfig& cfg, TrainMode mode,
                                   const EnvParams& anchor) {
  TrainerConfig t = cfg.trainer;
  t.mode = mode;
  t.sim = cfg.sim;
  t.control = cfg.control;
  t.env_reference = anchor;
  return t;
}

// ---------------------------------------------------------------------------
// Mode / filter name parsing (shared by the CLI and checkpoints)
// ---------------------------------------------------------------------------

/// A training scheme: the update rule plus the choice of regularization
/// anchor (true parameters, or the run's own estimates).
struct ModeChoice {
  TrainMode mode = TrainMode::ctd;
  bool anchor_estimates = false;
  std::string name = "ctd";
};

inline ModeChoice parse_mode_name(const std::string& s) {
  if (s == "ml") return {TrainMode::ml, false, "ml"};
  if (s == "ctd") return {TrainMode::ctd, false, "ctd"};
  if (s == "ctd-star") return {TrainMode::ctd, true, "ctd-star"};
  throw ConfigError("unknown mode '" + s +
                    "' (expected ml, ctd, or ctd-star)");
}

enum class FilterChoice { true_params, estimated };

inline FilterChoice parse_filter_name(const std::string& s) {
  if (s == "true") return FilterChoice::true_params;
  if (s == "est") return FilterChoice::estimated;
  throw ConfigError("unknown filter '" + s + "' (expected true or est)");
}

inline const char* filter_name(FilterChoice f) {
  return f == FilterChoice::true_params ? "true" : "est";
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace detail {

inline void require_object(const cjson& j, const char* where) {
  if (!j.is_object())
    throw ConfigError(std::string("config section '") + where +
                      "' must be an object");
}

inline void check_known(const cjson& j, const char* where,
                        std::initializer_list<const char*> keys) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown config key '" + item.key() +
                        "' in section '" + where + "'");
  }
}

template <class T>
void read_field(const cjson& j, const char* where, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).template get<T>();
  } catch (const cjson::exception&) {
    throw ConfigError(std::string("config key '") + key + "' in section '" +
                      where + "' has the wrong type");
  }
}

template <class T, std::size_t N>
void read_fixed_array(const cjson& j, const char* where, const char* key,
                      std::array<T, N>& out) {
  if (!j.contains(key)) return;
  std::vector<T> v;
  try {
    v = j.at(key).template get<std::vector<T>>();
  } catch (const cjson::exception&) {
    throw ConfigError(std::string("config key '") + key + "' in section '" +
                      where + "' must be an array of numbers");
  }
  if (v.size() != N)
    throw ConfigError(std::string("config key '") + key + "' in section '" +
                      where + "' must have exactly " + std::to_string(N) +
                      " entries");
  std::copy(v.begin(), v.end(), out.begin());
}

}  // namespace detail

inline cjson to_json(const EnvParams& e) {
  return cjson{{"mu1", e.mu1},     {"mu2", e.mu2},       {"sigma", e.sigma},
               {"q12", e.q12},     {"q21", e.q21},       {"delta1", e.delta1},
               {"delta2", e.delta2}};
}

inline void from_json_section(const cjson& j, EnvParams& e, const char* where) {
  detail::require_object(j, where);
  detail::check_known(
      j, where, {"mu1", "mu2", "sigma", "q12", "q21", "delta1", "delta2"});
  detail::read_field(j, where, "mu1", e.mu1);
  detail::read_field(j, where, "mu2", e.mu2);
  detail::read_field(j, where, "sigma", e.sigma);
  detail::read_field(j, where, "q12", e.q12);
  detail::read_field(j, where, "q21", e.q21);
  detail::read_field(j, where, "delta1", e.delta1);
  detail::read_field(j, where, "delta2", e.delta2);
}

inline cjson to_json(const SimConfig& s) {
  return cjson{{"x0", s.x0},
               {"p0", s.p0},
               {"T", s.T},
               {"dt", s.dt},
               {"ruin_eps", s.ruin_eps}};
}

inline void from_json_section(const cjson& j, SimConfig& s, const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where, {"x0", "p0", "T", "dt", "ruin_eps"});
  detail::read_field(j, where, "x0", s.x0);
  detail::read_field(j, where, "p0", s.p0);
  detail::read_field(j, where, "T", s.T);
  detail::read_field(j, where, "dt", s.dt);
  detail::read_field(j, where, "ruin_eps", s.ruin_eps);
}

inline cjson to_json(const ControlConfig& c) {
  return cjson{{"lambda", c.lambda}, {"cap_a", c.cap_a}};
}

inline void from_json_section(const cjson& j, ControlConfig& c,
                              const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where, {"lambda", "cap_a"});
  detail::read_field(j, where, "lambda", c.lambda);
  detail::read_field(j, where, "cap_a", c.cap_a);
}

inline cjson to_json(const QuadratureConfig& q) {
  return cjson{{"n", q.n}, {"eps", q.eps}, {"gb0_floor", q.gb0_floor}};
}

inline void from_json_section(const cjson& j, QuadratureConfig& q,
                              const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where, {"n", "eps", "gb0_floor"});
  detail::read_field(j, where, "n", q.n);
  detail::read_field(j, where, "eps", q.eps);
  detail::read_field(j, where, "gb0_floor", q.gb0_floor);
}

inline cjson to_json_trainer(const TrainerConfig& t) {
  return cjson{{"rho", t.rho},
               {"eta_phi", t.eta_phi},
               {"eta_gamma", t.eta_gamma},
               {"lr_decay_exponent", t.lr_decay_exponent},
               {"w_env", t.w_env},
               {"w_bc", t.w_bc},
               {"batch_size", t.batch_size},
               {"n_iterations", t.n_iterations},
               {"grad_clip", t.grad_clip},
               {"degree", t.degree},
               {"reestimate_each_iteration", t.reestimate_each_iteration},
               {"estimation_years", t.estimation_years},
               {"estimation_x0", t.estimation_x0},
               {"loss_ma_window", t.loss_ma_window},
               {"quadrature", to_json(t.quadrature)}};
}

inline void from_json_section(const cjson& j, TrainerConfig& t,
                              const char* where) {
  detail::require_object(j, where);
  detail::check_known(
      j, where,
      {"rho", "eta_phi", "eta_gamma", "lr_decay_exponent", "w_env", "w_bc",
       "batch_size", "n_iterations", "grad_clip", "degree",
       "reestimate_each_iteration", "estimation_years", "estimation_x0",
       "loss_ma_window", "quadrature"});
  detail::read_field(j, where, "rho", t.rho);
  detail::read_fixed_array(j, where, "eta_phi", t.eta_phi);
  detail::read_fixed_array(j, where, "eta_gamma", t.eta_gamma);
  detail::read_field(j, where, "lr_decay_exponent", t.lr_decay_exponent);
  detail::read_fixed_array(j, where, "w_env", t.w_env);
  detail::read_fixed_array(j, where, "w_bc", t.w_bc);
  detail::read_field(j, where, "batch_size", t.batch_size);
  detail::read_field(j, where, "n_iterations", t.n_iterations);
  detail::read_field(j, where, "grad_clip", t.grad_clip);
  detail::read_field(j, where, "degree", t.degree);
  detail::read_field(j, where, "reestimate_each_iteration",
                     t.reestimate_each_iteration);
  detail::read_field(j, where, "estimation_years", t.estimation_years);
  detail::read_field(j, where, "estimation_x0", t.estimation_x0);
  detail::read_field(j, where, "loss_ma_window", t.loss_ma_window);
  if (j.contains("quadrature"))
    from_json_section(j.at("quadrature"), t.quadrature, "trainer.quadrature");
}

inline cjson to_json(const EstimationSetup& e) {
  return cjson{{"n_paths", e.n_paths},
               {"years", e.years},
               {"x0", e.x0},
               {"run_em", e.run_em},
               {"heuristic",
                cjson{{"lookback", e.heuristic.lookback},
                      {"eta_u", e.heuristic.eta_u}}},
               {"em", cjson{{"max_iters", e.em.max_iters},
                            {"tol", e.em.tol}}}};
}

inline void from_json_section(const cjson& j, EstimationSetup& e,
                              const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where,
                      {"n_paths", "years", "x0", "run_em", "heuristic", "em"});
  detail::read_field(j, where, "n_paths", e.n_paths);
  detail::read_field(j, where, "years", e.years);
  detail::read_field(j, where, "x0", e.x0);
  detail::read_field(j, where, "run_em", e.run_em);
  if (j.contains("heuristic")) {
    const cjson& h = j.at("heuristic");
    detail::require_object(h, "estimation.heuristic");
    detail::check_known(h, "estimation.heuristic", {"lookback", "eta_u"});
    detail::read_field(h, "estimation.heuristic", "lookback",
                       e.heuristic.lookback);
    detail::read_field(h, "estimation.heuristic", "eta_u", e.heuristic.eta_u);
  }
  if (j.contains("em")) {
    const cjson& m = j.at("em");
    detail::require_object(m, "estimation.em");
    detail::check_known(m, "estimation.em", {"max_iters", "tol"});
    detail::read_field(m, "estimation.em", "max_iters", e.em.max_iters);
    detail::read_field(m, "estimation.em", "tol", e.em.tol);
  }
}

inline cjson to_json(const FdConfig& f) {
  return cjson{{"grid_m", f.grid.m},
               {"target_slope_p1", f.target_slope_p1},
               {"target_slope_p0", f.target_slope_p0},
               {"relax", f.relax},
               {"eps_residual", f.eps_residual},
               {"eps_split", f.eps_split},
               {"max_outer", f.max_outer},
               {"kappa_gap_tol", f.kappa_gap_tol},
               {"init_w1_at0", f.init_w1_at0},
               {"init_w1_at1", f.init_w1_at1}};
}

inline void from_json_section(const cjson& j, FdConfig& f, const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where,
                      {"grid_m", "target_slope_p1", "target_slope_p0", "relax",
                       "eps_residual", "eps_split", "max_outer",
                       "kappa_gap_tol", "init_w1_at0", "init_w1_at1"});
  detail::read_field(j, where, "grid_m", f.grid.m);
  detail::read_field(j, where, "target_slope_p1", f.target_slope_p1);
  detail::read_field(j, where, "target_slope_p0", f.target_slope_p0);
  detail::read_field(j, where, "relax", f.relax);
  detail::read_field(j, where, "eps_residual", f.eps_residual);
  detail::read_field(j, where, "eps_split", f.eps_split);
  detail::read_field(j, where, "max_outer", f.max_outer);
  detail::read_field(j, where, "kappa_gap_tol", f.kappa_gap_tol);
  detail::read_field(j, where, "init_w1_at0", f.init_w1_at0);
  detail::read_field(j, where, "init_w1_at1", f.init_w1_at1);
}

inline cjson to_json(const SimulateSetup& s) {
  return cjson{{"n_paths", s.n_paths},
               {"years", s.years},
               {"x0", s.x0},
               {"dividend_rate", s.dividend_rate}};
}

inline void from_json_section(const cjson& j, SimulateSetup& s,
                              const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where, {"n_paths", "years", "x0", "dividend_rate"});
  detail::read_field(j, where, "n_paths", s.n_paths);
  detail::read_field(j, where, "years", s.years);
  detail::read_field(j, where, "x0", s.x0);
  detail::read_field(j, where, "dividend_rate", s.dividend_rate);
}

inline cjson to_json(const EvaluateSetup& e) {
  return cjson{{"n_paths", e.n_paths}};
}

inline void from_json_section(const cjson& j, EvaluateSetup& e,
                              const char* where) {
  detail::require_object(j, where);
  detail::check_known(j, where, {"n_paths"});
  detail::read_field(j, where, "n_paths", e.n_paths);
}

inline cjson to_json(const RunConfig& c) {
  return cjson{{"seed", c.seed},
               {"workers", c.workers},
               {"out_dir", c.out_dir},
               {"env", to_json(c.env)},
               {"sim", to_json(c.sim)},
               {"control", to_json(c.control)},
               {"trainer", to_json_trainer(c.trainer)},
               {"estimation", to_json(c.estimation)},
               {"fd", to_json(c.fd)},
               {"simulate", to_json(c.simulate)},
               {"evaluate", to_json(c.evaluate)}};
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

inline std::string serialize_config(const RunConfig& c) {
  return to_json(c).dump(2) + "\n";
}

/// Parses a configuration document.  Missing sections and keys keep their
/// defaults; unknown keys, malformed JSON, and wrong types all raise
/// ConfigError.  Does not validate ranges — call cfg.validate() before use.
inline RunConfig parse_config(const std::string& text) {
  cjson j;
  try {
    j = cjson::parse(text);
  } catch (const cjson::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::require_object(j, "top level");
  detail::check_known(j, "top level",
                      {"seed", "workers", "out_dir", "env", "sim", "control",
                       "trainer", "estimation", "fd", "simulate", "evaluate"});
  RunConfig c;
  detail::read_field(j, "top level", "seed", c.seed);
  detail::read_field(j, "top level", "workers", c.workers);
  detail::read_field(j, "top level", "out_dir", c.out_dir);
  if (j.contains("env")) from_json_section(j.at("env"), c.env, "env");
  if (j.contains("sim")) from_json_section(j.at("sim"), c.sim, "sim");
  if (j.contains("control"))
    from_json_section(j.at("control"), c.control, "control");
  if (j.contains("trainer"))
    from_json_section(j.at("trainer"), c.trainer, "trainer");
  if (j.contains("estimation"))
    from_json_section(j.at("estimation"), c.estimation, "estimation");
  if (j.contains("fd")) from_json_section(j.at("fd"), c.fd, "fd");
  if (j.contains("simulate"))
    from_json_section(j.at("simulate"), c.simulate, "simulate");
  if (j.contains("evaluate"))
    from_json_section(j.at("evaluate"), c.evaluate, "evaluate");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline void save_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << serialize_config(c);
  if (!out) throw ConfigError("failed writing config file '" + path + "'");
}

}  // namespace rsdiv
