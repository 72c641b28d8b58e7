#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpmm/analysis.hpp"
#include "cpmm/errors.hpp"
#include "cpmm/imaging.hpp"
#include "cpmm/operator_norm.hpp"
#include "cpmm/scenarios.hpp"
#include "cpmm/solver.hpp"
#include "cpmm/stepsize.hpp"

namespace cpmm {

/// Everything needed to re-run one experiment. Zero max_iter / rel_tol
/// select the experiment's default.
struct ExperimentConfig {
  std::string experiment = "quadratic";
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int max_iter = 0;
  double rel_tol = 0.0;

  std::string planner = "auto";  // auto, thm32, cor33, thm31, classical, manual
  double kappa = 0.01;
  std::optional<double> tau, sigma, omega;
  int certificate_iters = 1000;

  // quadratic
  int n = 100;
  int m = 50;
  double alpha = 0.15;
  double beta = 1.0;
  double mismatch_scale = 0.05;
  bool allow_infeasible = false;

  // counterexample
  int cx_n = 5;
  double alpha_mm = 1.0;
  double cx_tau = 0.5;
  double cx_sigma = 0.5;
  double cx_x0 = 1.0;
  double cx_y0 = 1.0;

  // divergence
  double z = 1.0;
  double tau0 = 0.5;
  double sigma0 = 0.9;

  // ct
  int rows = 64;
  int cols = 64;
  int n_angles = 20;
  int n_bins = 90;
  double lambda0 = 1.0;
  std::vector<double> lambda1{1.2};
  double lambda2 = 0.01;
  double eps = 0.01;
  double noise_rel = 0.15;
  double step_ratio = 100.0;
  bool strict = false;

  // certify
  double gamma_G = 1.0;
  double gamma_Fstar = 1.0;
  double norm_V = 1.0;
  double norm_AmV = 0.1;
};

inline int default_max_iter(const std::string& experiment) {
  if (experiment == "divergence") return 10000;
  if (experiment == "ct") return 5000;
  return 1000;
}

inline double default_rel_tol(const std::string& experiment) {
  if (experiment == "ct") return 1e-8;
  if (experiment == "counterexample" || experiment == "divergence") return 1e-300;
  return 1e-13;
}

/// Fills experiment defaults and validates the tag.
inline ExperimentConfig resolve_config(ExperimentConfig cfg) {
  static const std::vector<std::string> kTags{"quadratic", "counterexample", "divergence", "ct", "certify"};
  if (std::find(kTags.begin(), kTags.end(), cfg.experiment) == kTags.end())
    throw Error(ErrorKind::InvalidParameter, "experiment", "unknown experiment '" + cfg.experiment + "'");
  if (cfg.max_iter == 0) cfg.max_iter = default_max_iter(cfg.experiment);
  if (cfg.rel_tol == 0.0) cfg.rel_tol = default_rel_tol(cfg.experiment);
  require(cfg.max_iter >= 1, ErrorKind::InvalidParameter, "max-iter must be >= 1");
  require(cfg.rel_tol > 0.0, ErrorKind::InvalidParameter, "rel-tol must be positive");
  require(cfg.certificate_iters >= 1, ErrorKind::InvalidParameter, "certificate-iters must be >= 1");
  return cfg;
}

namespace detail {

// Option name, JSON value, and TOML text for each config field that belongs
// to the given experiment (plus the shared ones). out_dir is excluded: it
// names where a run goes, not what it computes.
inline std::vector<std::pair<std::string, nlohmann::json>> config_fields(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, nlohmann::json>> f{
      {"seed", c.seed},          {"max-iter", c.max_iter}, {"rel-tol", c.rel_tol},
      {"planner", c.planner},    {"kappa", c.kappa},       {"certificate-iters", c.certificate_iters},
  };
  if (c.tau) f.emplace_back("tau", *c.tau);
  if (c.sigma) f.emplace_back("sigma", *c.sigma);
  if (c.omega) f.emplace_back("omega", *c.omega);
  const std::string& e = c.experiment;
  if (e == "quadratic") {
    f.insert(f.end(), {{"n", c.n},
                       {"m", c.m},
                       {"alpha", c.alpha},
                       {"beta", c.beta},
                       {"mismatch-scale", c.mismatch_scale},
                       {"allow-infeasible", c.allow_infeasible}});
  } else if (e == "counterexample") {
    f.insert(f.end(), {{"n", c.cx_n},
                       {"alpha-mm", c.alpha_mm},
                       {"step-tau", c.cx_tau},
                       {"step-sigma", c.cx_sigma},
                       {"x0", c.cx_x0},
                       {"y0", c.cx_y0}});
  } else if (e == "divergence") {
    f.insert(f.end(), {{"z", c.z}, {"tau0", c.tau0}, {"sigma0", c.sigma0}});
  } else if (e == "ct") {
    f.insert(f.end(), {{"rows", c.rows},
                       {"cols", c.cols},
                       {"angles", c.n_angles},
                       {"bins", c.n_bins},
                       {"lambda0", c.lambda0},
                       {"lambda1", c.lambda1},
                       {"lambda2", c.lambda2},
                       {"eps", c.eps},
                       {"noise-rel", c.noise_rel},
                       {"step-ratio", c.step_ratio},
                       {"strict", c.strict}});
  } else if (e == "certify") {
    f.insert(f.end(), {{"gamma-g", c.gamma_G},
                       {"gamma-fstar", c.gamma_Fstar},
                       {"norm-v", c.norm_V},
                       {"norm-amv", c.norm_AmV}});
  }
  return f;
}

inline std::string toml_value(const nlohmann::json& v) {
  if (v.is_string()) return '"' + v.get<std::string>() + '"';
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + toml_value(v[k]);
    return out + "]";
  }
  return v.dump();
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  for (const auto& [key, value] : detail::config_fields(cfg)) j[key] = value;
  return j;
}

/// Config file readable by the CLI's --config (one section per experiment).
inline std::string config_to_toml(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << '[' << cfg.experiment << "]\n";
  for (const auto& [key, value] : detail::config_fields(cfg)) os << key << '=' << detail::toml_value(value) << '\n';
  return os.str();
}

struct ExperimentReport {
  nlohmann::json json;
  std::vector<std::string> artifacts;
  bool behavior_ok = true;
  std::string behavior_message;
};

// ---------------------------------------------------------------------------
// JSON helpers

inline nlohmann::json to_json(const StepPlan& p) {
  return {{"provenance", to_string(p.provenance)},
          {"tau", json_number(p.tau)},
          {"sigma", json_number(p.sigma)},
          {"omega", json_number(p.omega)},
          {"kappa", json_number(p.kappa)},
          {"delta", json_number(p.delta)},
          {"epsilon", json_number(p.epsilon)},
          {"a", json_number(p.a)},
          {"b", json_number(p.b)},
          {"mu_G", json_number(p.mu_G)},
          {"mu_Fstar", json_number(p.mu_Fstar)}};
}

inline nlohmann::json to_json(const CertificateReport& r) {
  nlohmann::json j{{"passed", r.passed}, {"iterations_checked", r.iterations_checked}};
  if (r.first_violation)
    j["first_violation"] = {{"condition", r.first_violation->condition},
                            {"iteration", r.first_violation->iteration},
                            {"slack", json_number(r.first_violation->slack)}};
  nlohmann::json slack = nlohmann::json::object();
  for (const auto& [name, value] : r.min_slack) slack[name] = json_number(value);
  j["min_slack"] = slack;
  return j;
}

inline nlohmann::json to_json(const NormData& n) {
  return {{"norm_V", json_number(n.norm_V)}, {"norm_AmV", json_number(n.norm_AmV)}};
}

inline nlohmann::json to_json(const PreconditionStatus& p) {
  return {{"holds", p.holds},
          {"gammaG_gammaFstar", json_number(p.product)},
          {"two_mismatch_sq", json_number(p.required)},
          {"message", p.message}};
}

inline nlohmann::json to_json(const RateEstimate& r) {
  return {{"empirical_log_rate", json_number(r.empirical_log_rate)},
          {"r_squared", json_number(r.r_squared)},
          {"theoretical_log_rate", json_number(r.theoretical_log_rate)},
          {"tail_start", r.tail_start},
          {"n_points", r.n_points}};
}

// ---------------------------------------------------------------------------
// Artifacts

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::InvalidParameter, "out", "cannot create output directory " + dir + ": " + ec.message());
  return p;
}

inline void write_file(ExperimentReport& report, const std::filesystem::path& dir, const std::string& name,
                       const std::function<void(std::ostream&)>& body, bool binary = false) {
  std::ofstream os(dir / name, binary ? std::ios::binary : std::ios::out);
  if (!os) throw Error(ErrorKind::InvalidParameter, "out", "cannot write " + (dir / name).string());
  body(os);
  report.artifacts.push_back(name);
}

inline void write_trace(ExperimentReport& report, const std::filesystem::path& dir, const std::string& name,
                        const RunTrace& trace) {
  write_file(report, dir, name, [&](std::ostream& os) { write_trace_csv(os, trace); });
}

}  // namespace detail

/// Chooses a plan from the config: an explicit planner, or the scenario's
/// hint for "auto"; tau/sigma/omega overrides turn it into a manual plan.
inline StepPlan plan_from_config(const ExperimentConfig& cfg, const ConvexityData& conv, const NormData& norms,
                                 const PlanHint& hint) {
  std::string planner = cfg.planner;
  if (planner == "auto") {
    switch (hint.planner) {
      case Provenance::thm32: planner = "thm32"; break;
      case Provenance::cor33: planner = "cor33"; break;
      case Provenance::thm31: planner = "thm31"; break;
      case Provenance::classical: planner = "classical"; break;
      case Provenance::manual: planner = "manual"; break;
    }
  }
  StepPlan plan;
  if (planner == "thm32") {
    plan = plan_thm32(conv, cfg.kappa, norms);
  } else if (planner == "cor33") {
    plan = plan_cor33(conv, cfg.kappa, norms);
  } else if (planner == "thm31") {
    auto found = search_thm31(conv, norms, cfg.kappa);
    if (!found) throw Error(ErrorKind::ConditionViolated, "thm31", "no admissible (mu_G, mu_F*, eps) on the search grid");
    plan = *found;
  } else if (planner == "classical") {
    plan = plan_classical(conv, cfg.kappa, norms.norm_V);
  } else if (planner == "manual") {
    if (hint.manual && !(cfg.tau || cfg.sigma || cfg.omega)) return *hint.manual;
    if (!(cfg.tau && cfg.sigma && cfg.omega))
      throw Error(ErrorKind::InvalidParameter, "planner", "manual planner needs tau, sigma and omega");
    return manual_plan(*cfg.tau, *cfg.sigma, *cfg.omega);
  } else {
    throw Error(ErrorKind::InvalidParameter, "planner", "unknown planner '" + planner + "'");
  }
  if (cfg.tau || cfg.sigma || cfg.omega) {
    if (cfg.tau) plan.tau = *cfg.tau;
    if (cfg.sigma) plan.sigma = *cfg.sigma;
    if (cfg.omega) plan.omega = *cfg.omega;
    plan.provenance = Provenance::manual;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Experiments

inline ExperimentReport run_quadratic(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  ExperimentReport report;
  const auto dir = detail::prepare_dir(cfg.out_dir);
  Scenario sc = build_quadratic(cfg.n, cfg.m, cfg.alpha, cfg.beta, cfg.mismatch_scale, cfg.seed, cfg.allow_infeasible);
  const ConvexityData conv = sc.problem.conv();
  const StepPlan plan = plan_from_config(cfg, conv, sc.norms, sc.plan_hint);

  SolveOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.rel_tol = cfg.rel_tol;
  opt.references = sc.references;
  opt.objective = sc.primal_objective;
  const RunTrace trace = solve(sc.problem, plan, sc.x0, sc.y0, opt);

  const Vec& y_hat = *sc.references[0].y;
  const double bound = error_bound(conv.gamma_G, sc.problem.forward, sc.problem.surrogate, y_hat);
  const double fp_gap = (sc.references[0].x - sc.references[1].x).norm();

  detail::write_trace(report, dir, "trace.csv", trace);
  detail::write_file(report, dir, "distances.csv", [&](std::ostream& os) {
    os << "iter,dist_x_fixed_point,dist_x_true_solution,error_bound\n";
    for (const auto& r : trace.records)
      os << r.iter << ',' << format_double(r.primal_dist[0]) << ',' << format_double(r.primal_dist[1]) << ','
         << format_double(bound) << '\n';
  });

  nlohmann::json j;
  j["experiment"] = "quadratic";
  j["config"] = config_to_json(cfg);
  j["norms"] = to_json(sc.norms);
  j["precondition"] = to_json(sc.precondition);
  j["plan"] = to_json(plan);
  j["certificate"] = to_json(verify_certificate(plan, sc.norms, conv, cfg.certificate_iters));
  j["termination"] = to_string(trace.termination);
  j["iterations"] = trace.records.size();
  const auto& last = trace.records.back();
  j["final"] = {{"residual", json_number(last.residual)},
                {"dist_u_fixed_point", json_number(last.dist[0])},
                {"dist_x_fixed_point", json_number(last.primal_dist[0])},
                {"dist_x_true_solution", json_number(last.primal_dist[1])},
                {"objective", json_number(last.objective)}};
  j["error_bound"] = {{"bound", json_number(bound)},
                      {"fixed_point_gap", json_number(fp_gap)},
                      {"final_dist_below_bound", last.primal_dist[1] <= bound * (1.0 + 1e-10)}};
  try {
    const RateEstimate rate = estimate_linear_rate(trace, 0, plan.omega);
    j["rate"] = to_json(rate);
    j["rate"]["within_theory"] = rate.empirical_log_rate <= rate.theoretical_log_rate + 1e-3;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientData) throw;
    j["rate"] = {{"error", e.what()}};
  }
  report.json = std::move(j);
  return report;
}

inline ExperimentReport run_counterexample(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  ExperimentReport report;
  const auto dir = detail::prepare_dir(cfg.out_dir);
  const Index n = cfg.cx_n;
  Scenario sc = build_l1_counterexample(n, cfg.alpha_mm, cfg.cx_tau, cfg.cx_sigma, Vec::Constant(n, cfg.cx_x0),
                                        Vec::Constant(n, cfg.cx_y0));
  const StepPlan plan = plan_from_config(cfg, sc.problem.conv(), sc.norms, sc.plan_hint);

  struct Growth {
    int iter;
    double min_inc, max_inc, x_mean, y_min;
  };
  std::vector<Growth> growth;
  bool monotone = true;
  int first_non_increase = -1;
  int saturation_iter = -1;
  double max_dev = 0.0;
  Vec prev_x = sc.x0;
  Vec prev_y = sc.y0;
  SolveOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.rel_tol = cfg.rel_tol;
  opt.references = sc.references;
  opt.objective = sc.primal_objective;
  opt.observer = [&](const IterateState& s) {
    const Vec inc = s.x - prev_x;
    if (!(inc.minCoeff() > 0.0)) {
      if (monotone) first_non_increase = s.iter;
      monotone = false;
    }
    // Increments equal alpha_mm * tau once the dual entering the step is saturated at 1.
    if ((prev_y.array() == 1.0).all()) {
      if (saturation_iter < 0) saturation_iter = s.iter;
      max_dev = std::max(max_dev, (inc.array() - cfg.alpha_mm * plan.tau).abs().maxCoeff());
    }
    growth.push_back({s.iter, inc.minCoeff(), inc.maxCoeff(), s.x.mean(), s.y.minCoeff()});
    prev_x = s.x;
    prev_y = s.y;
  };
  const RunTrace trace = solve(sc.problem, plan, sc.x0, sc.y0, opt);

  detail::write_trace(report, dir, "trace.csv", trace);
  detail::write_file(report, dir, "growth.csv", [&](std::ostream& os) {
    os << "iter,min_increment,max_increment,x_mean,y_min\n";
    for (const auto& g : growth)
      os << g.iter << ',' << format_double(g.min_inc) << ',' << format_double(g.max_inc) << ','
         << format_double(g.x_mean) << ',' << format_double(g.y_min) << '\n';
  });

  const bool increments_ok = saturation_iter < 0 || max_dev <= 1e-12;
  report.behavior_ok = monotone && increments_ok;
  if (!monotone)
    report.behavior_message = "primal entries stopped increasing at iteration " + std::to_string(first_non_increase);
  else if (!increments_ok)
    report.behavior_message = "saturated increments deviate from alpha_mm*tau by " + format_double(max_dev);

  nlohmann::json j;
  j["experiment"] = "counterexample";
  j["config"] = config_to_json(cfg);
  j["plan"] = to_json(plan);
  j["expected_behavior"] = to_string(sc.expected);
  j["termination"] = to_string(trace.termination);
  j["iterations"] = trace.records.size();
  j["monotone_increase"] = monotone;
  j["first_non_increase"] = first_non_increase;
  j["dual_saturation_iter"] = saturation_iter;
  j["expected_increment"] = json_number(cfg.alpha_mm * plan.tau);
  j["max_increment_deviation"] = json_number(max_dev);
  j["final_x_mean"] = json_number(trace.final_state.x.mean());
  j["final_dist_to_saddle"] = json_number(trace.records.back().dist[0]);
  j["behavior_ok"] = report.behavior_ok;
  report.json = std::move(j);
  return report;
}

inline ExperimentReport run_divergence(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  ExperimentReport report;
  const auto dir = detail::prepare_dir(cfg.out_dir);
  Scenario sc = build_divergence_example(cfg.z, cfg.tau0, cfg.sigma0);
  const SaddleProblem& prob = sc.problem;
  AccelState state = *sc.accel;
  Vec z(1);
  z << cfg.z;
  const Vec vtz = prob.surrogate.apply_transpose(z);

  struct Row {
    int iter;
    double tau, sigma, x_norm, y_dev, x_formula_dev;
  };
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(cfg.max_iter) + 1);
  double tau_sum = 0.0;
  double max_y_dev = 0.0, max_formula_dev = 0.0, min_tau_margin = std::numeric_limits<double>::infinity();
  bool tau_bound_ok = true, norm_increasing = true, zero_iterates = true;
  double prev_norm = 0.0;
  rows.push_back({0, state.tau, state.sigma, 0.0, (state.y + z).cwiseAbs().maxCoeff(), 0.0});
  double norm_at_100 = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < cfg.max_iter; ++i) {
    const double bound = 1.0 / (i + 1.0 / cfg.tau0);
    min_tau_margin = std::min(min_tau_margin, state.tau - bound);
    if (state.tau < bound) tau_bound_ok = false;
    tau_sum += state.tau;
    state = step_accelerated(state, prob);
    const double xn = state.x.norm();
    const double ydev = (state.y + z).cwiseAbs().maxCoeff();
    const double fdev = (state.x - tau_sum * vtz).norm() / std::max(1.0, (tau_sum * vtz).norm());
    max_y_dev = std::max(max_y_dev, ydev);
    max_formula_dev = std::max(max_formula_dev, fdev);
    if (!(xn > prev_norm)) norm_increasing = false;
    if (xn != 0.0 || state.y.norm() != 0.0) zero_iterates = false;
    prev_norm = xn;
    if (state.iter == 100) norm_at_100 = xn;
    rows.push_back({state.iter, state.tau, state.sigma, xn, ydev, fdev});
  }
  const double final_norm = state.x.norm();

  detail::write_file(report, dir, "divergence.csv", [&](std::ostream& os) {
    os << "iter,tau,sigma,x_norm,y_plus_z_maxabs,x_formula_rel_dev\n";
    for (const auto& r : rows)
      os << r.iter << ',' << format_double(r.tau) << ',' << format_double(r.sigma) << ',' << format_double(r.x_norm)
         << ',' << format_double(r.y_dev) << ',' << format_double(r.x_formula_dev) << '\n';
  });

  const double ytol = 1e-12 * std::max(1.0, std::abs(cfg.z));
  nlohmann::json j;
  j["experiment"] = "divergence";
  j["config"] = config_to_json(cfg);
  j["expected_behavior"] = to_string(sc.expected);
  j["iterations"] = cfg.max_iter;
  j["max_y_deviation"] = json_number(max_y_dev);
  j["max_x_formula_rel_deviation"] = json_number(max_formula_dev);
  j["tau_lower_bound_holds"] = tau_bound_ok;
  j["min_tau_margin"] = json_number(min_tau_margin);
  j["final_tau"] = json_number(state.tau);
  j["final_sigma"] = json_number(state.sigma);
  j["final_x_norm"] = json_number(final_norm);
  j["x_norm_at_100"] = json_number(norm_at_100);
  j["tau_sum"] = json_number(tau_sum);
  if (sc.expected == ExpectedBehavior::stationary) {
    j["stationary"] = zero_iterates;
    report.behavior_ok = zero_iterates;
    if (!zero_iterates) report.behavior_message = "z = 0 but iterates left the origin";
  } else {
    const bool growth_ok = cfg.max_iter < 10000 ? final_norm > norm_at_100 || cfg.max_iter <= 100
                                                : final_norm > 1.5 * norm_at_100;
    j["x_norm_strictly_increasing"] = norm_increasing;
    j["harmonic_growth"] = growth_ok;
    report.behavior_ok = max_y_dev <= ytol && tau_bound_ok && norm_increasing && growth_ok;
    if (!report.behavior_ok) {
      std::string why;
      if (max_y_dev > ytol) why += " dual left -z;";
      if (!tau_bound_ok) why += " tau fell below 1/(i+1/tau0);";
      if (!norm_increasing) why += " |x| not strictly increasing;";
      if (!growth_ok) why += " |x| growth too small;";
      report.behavior_message = "divergence predicate failed:" + why;
    }
  }
  j["behavior_ok"] = report.behavior_ok;
  report.json = std::move(j);
  return report;
}

struct CtRunSummary {
  std::string label;
  StepPlan plan;
  std::string plan_source;
  RunTrace trace;
  double seconds_per_iter = 0.0;
};

namespace detail {

// thm32, then the plan_thm31 grid search, then classical steps with the
// measured ‖V‖ and the configured dual/primal step ratio.
inline std::pair<StepPlan, std::string> ct_plan(const ExperimentConfig& cfg, const ConvexityData& conv,
                                                const NormData& norms) {
  if (cfg.planner != "auto") {
    PlanHint hint{Provenance::classical, cfg.kappa, std::nullopt};
    if (cfg.planner == "classical")
      return {plan_classical(conv, cfg.kappa, norms.norm_V, cfg.step_ratio), "classical (configured)"};
    return {plan_from_config(cfg, conv, norms, hint), cfg.planner + " (configured)"};
  }
  if (norms.norm_AmV > 0.0) {
    try {
      return {plan_thm32(conv, cfg.kappa, norms), "thm32"};
    } catch (const Error&) {
    }
    if (auto found = search_thm31(conv, norms, cfg.kappa)) return {*found, "thm31 grid search"};
  }
  return {plan_classical(conv, cfg.kappa, norms.norm_V, cfg.step_ratio),
          norms.norm_AmV > 0.0 ? "classical fallback (mismatch conditions infeasible)" : "classical"};
}

inline nlohmann::json ct_run_json(const CtRunSummary& run, const CtData& ct, const NormData& norms,
                                  const ConvexityData& conv, int certificate_iters) {
  const auto& recs = run.trace.records;
  const double phantom_norm = ct.phantom.values.norm();
  double min_res = std::numeric_limits<double>::infinity();
  int first_below = -1;
  for (const auto& r : recs) {
    min_res = std::min(min_res, r.residual);
    if (first_below < 0 && r.residual < 1e-4) first_below = r.iter;
  }
  // Objective monotonicity over the second half of the run.
  int increases = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = recs.size() / 2 + 1; k < recs.size(); ++k) {
    const double prev = recs[k - 1].objective;
    const double rel = (recs[k].objective - prev) / std::max(1.0, std::abs(prev));
    worst = std::max(worst, rel);
    if (rel > 1e-8) ++increases;
  }
  const auto& last = recs.back();
  return {{"plan", to_json(run.plan)},
          {"plan_source", run.plan_source},
          {"certificate", to_json(verify_certificate(run.plan, norms, conv, certificate_iters))},
          {"termination", to_string(run.trace.termination)},
          {"iterations", recs.size()},
          {"final_residual", json_number(last.residual)},
          {"min_residual", json_number(min_res)},
          {"first_iter_residual_below_1e-4", first_below},
          {"final_objective", json_number(last.objective)},
          {"final_rel_dist_to_phantom", json_number(last.dist[0] / phantom_norm)},
          {"tail_objective_increases", increases},
          {"tail_worst_rel_increase", json_number(worst)}};
}

}  // namespace detail

inline std::string lambda_tag(double l) {
  std::ostringstream os;
  os << l;
  return os.str();
}

/// Matched and mismatched solves on identical data for each λ₁.
inline ExperimentReport run_ct(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  require(!cfg.lambda1.empty(), ErrorKind::InvalidParameter, "ct: lambda1 list is empty");
  ExperimentReport report;
  const auto dir = detail::prepare_dir(cfg.out_dir);
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream timing;
  timing << "lambda1,run,seconds_per_iter\n";

  for (const double l1 : cfg.lambda1) {
    CtParams prm;
    prm.rows = cfg.rows;
    prm.cols = cfg.cols;
    prm.geometry = SinogramGeometry{cfg.n_angles, cfg.n_bins, 1.0, 1.0};
    prm.lambda0 = cfg.lambda0;
    prm.lambda1 = l1;
    prm.lambda2 = cfg.lambda2;
    prm.eps = cfg.eps;
    prm.noise_rel = cfg.noise_rel;
    prm.seed = cfg.seed;
    prm.policy = cfg.strict ? PreconditionPolicy::enforce : PreconditionPolicy::report;
    Scenario sc = build_tv_ct(prm);
    const CtData& ct = *sc.ct;
    const ConvexityData conv = sc.problem.conv();
    const NormData matched_norms{ct.norm_A, 0.0};

    std::vector<CtRunSummary> runs;
    for (const bool matched : {true, false}) {
      const SaddleProblem prob = matched ? matched_problem(sc.problem) : sc.problem;
      const NormData& norms = matched ? matched_norms : sc.norms;
      auto [plan, source] = detail::ct_plan(cfg, conv, norms);
      SolveOptions opt;
      opt.max_iter = cfg.max_iter;
      opt.rel_tol = cfg.rel_tol;
      opt.references = sc.references;
      opt.objective = sc.primal_objective;
      const auto t0 = std::chrono::steady_clock::now();
      RunTrace trace = solve(prob, plan, sc.x0, sc.y0, opt);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const double per_iter = secs / static_cast<double>(trace.records.size());
      runs.push_back({matched ? "matched" : "mismatched", plan, source, std::move(trace), per_iter});
    }
    const CtRunSummary& mt = runs[0];
    const CtRunSummary& mm = runs[1];
    const std::string tag = "l1_" + lambda_tag(l1);
    for (const auto& run : runs) timing << lambda_tag(l1) << ',' << run.label << ',' << run.seconds_per_iter << '\n';

    for (const auto& run : runs) {
      detail::write_trace(report, dir, tag + "_trace_" + run.label + ".csv", run.trace);
      ImageGrid recon(cfg.rows, cfg.cols, run.trace.final_state.x);
      ImageGrid err(cfg.rows, cfg.cols, (run.trace.final_state.x - ct.phantom.values).cwiseAbs());
      detail::write_file(report, dir, tag + "_recon_" + run.label + ".pgm",
                         [&](std::ostream& os) { write_pgm(os, recon); }, true);
      detail::write_file(report, dir, tag + "_abserr_" + run.label + ".pgm",
                         [&](std::ostream& os) { write_pgm(os, err); }, true);
      detail::write_file(report, dir, tag + "_recon_" + run.label + ".csv",
                         [&](std::ostream& os) { write_image_csv(os, recon); });
    }
    detail::write_file(report, dir, tag + "_curves.csv", [&](std::ostream& os) {
      const double pn = ct.phantom.values.norm();
      os << "iter,rel_dist_matched,rel_dist_mismatched,objective_matched,objective_mismatched\n";
      const std::size_t len = std::max(mt.trace.records.size(), mm.trace.records.size());
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t k = 0; k < len; ++k) {
        const TraceRecord* a = k < mt.trace.records.size() ? &mt.trace.records[k] : nullptr;
        const TraceRecord* b = k < mm.trace.records.size() ? &mm.trace.records[k] : nullptr;
        os << (k + 1) << ',' << format_double(a ? a->dist[0] / pn : nan) << ','
           << format_double(b ? b->dist[0] / pn : nan) << ',' << format_double(a ? a->objective : nan) << ','
           << format_double(b ? b->objective : nan) << '\n';
      }
    });

    const double obj_mt = mt.trace.records.back().objective;
    const double obj_mm = mm.trace.records.back().objective;
    nlohmann::json row;
    row["lambda1"] = l1;
    row["norm_A"] = json_number(ct.norm_A);
    row["norms"] = to_json(sc.norms);
    row["gamma_G"] = conv.gamma_G;
    row["gamma_Fstar"] = conv.gamma_Fstar;
    row["precondition"] = to_json(sc.precondition);
    row["adjointness_defect"] = {
        {"strip", json_number(adjointness_defect(ct.radon_strip, 20, cfg.seed))},
        {"line", json_number(adjointness_defect(ct.radon_line, 20, cfg.seed))},
        {"cross", json_number(adjointness_defect(with_transpose_of(ct.radon_strip, ct.radon_line), 20, cfg.seed))}};
    row["matched"] = detail::ct_run_json(mt, ct, matched_norms, conv, cfg.certificate_iters);
    row["mismatched"] = detail::ct_run_json(mm, ct, sc.norms, conv, cfg.certificate_iters);
    row["matched_objective_le_mismatched"] = obj_mt <= obj_mm;
    rows.push_back(row);
  }
  const ImageGrid phantom = shepp_logan(cfg.rows, cfg.cols);
  detail::write_file(report, dir, "phantom.pgm", [&](std::ostream& os) { write_pgm(os, phantom); }, true);
  detail::write_file(report, dir, "timing.txt", [&](std::ostream& os) { os << timing.str(); });

  nlohmann::json j;
  j["experiment"] = "ct";
  j["config"] = config_to_json(cfg);
  j["rows"] = rows;
  report.json = std::move(j);
  return report;
}

/// Plans from every applicable planner with their certificate verdicts.
inline ExperimentReport run_certify(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  ExperimentReport report;
  const auto dir = detail::prepare_dir(cfg.out_dir);
  const ConvexityData conv{cfg.gamma_G, cfg.gamma_Fstar};
  const NormData norms{cfg.norm_V, cfg.norm_AmV};
  const PreconditionStatus pre = check_precondition(conv, norms);

  nlohmann::json planners = nlohmann::json::array();
  std::ostringstream text;
  auto add = [&](const std::string& name, const std::function<std::optional<StepPlan>()>& make,
                 const std::string& note) {
    nlohmann::json row{{"planner", name}};
    if (!note.empty()) row["note"] = note;
    text << "== " << name << '\n';
    try {
      const auto plan = make();
      if (!plan) {
        row["status"] = "infeasible";
        text << "infeasible\n";
      } else {
        const CertificateReport cert = verify_certificate(*plan, norms, conv, cfg.certificate_iters);
        row["status"] = "ok";
        row["plan"] = to_json(*plan);
        row["certificate"] = to_json(cert);
        text << "tau " << format_double(plan->tau) << " sigma " << format_double(plan->sigma) << " omega "
             << format_double(plan->omega) << '\n'
             << cert.to_text();
      }
    } catch (const Error& e) {
      row["status"] = std::string(to_string(e.kind()));
      row["error"] = e.what();
      if (!e.detail().empty()) row["detail"] = e.detail();
      text << e.what() << '\n';
    }
    planners.push_back(row);
  };
  add("thm32", [&]() -> std::optional<StepPlan> { return plan_thm32(conv, cfg.kappa, norms); }, "");
  add("cor33", [&]() -> std::optional<StepPlan> { return plan_cor33(conv, cfg.kappa, norms); }, "");
  add("thm31", [&]() { return search_thm31(conv, norms, cfg.kappa); }, "grid search over (mu_G, mu_F*, eps)");
  add("classical", [&]() -> std::optional<StepPlan> { return plan_classical(conv, cfg.kappa, norms.norm_V); },
      norms.norm_AmV == 0.0 ? "zero mismatch: classical steps apply" : "ignores the mismatch terms");

  detail::write_file(report, dir, "certificate.txt", [&](std::ostream& os) { os << text.str(); });
  nlohmann::json j;
  j["experiment"] = "certify";
  j["config"] = config_to_json(cfg);
  j["precondition"] = to_json(pre);
  j["planners"] = planners;
  report.json = std::move(j);
  return report;
}

/// Runs the configured experiment and writes report.json and config.toml
/// next to its other artifacts.
inline ExperimentReport run_experiment(const ExperimentConfig& raw) {
  const ExperimentConfig cfg = resolve_config(raw);
  ExperimentReport report;
  if (cfg.experiment == "quadratic")
    report = run_quadratic(cfg);
  else if (cfg.experiment == "counterexample")
    report = run_counterexample(cfg);
  else if (cfg.experiment == "divergence")
    report = run_divergence(cfg);
  else if (cfg.experiment == "ct")
    report = run_ct(cfg);
  else
    report = run_certify(cfg);
  const auto dir = detail::prepare_dir(cfg.out_dir);
  detail::write_file(report, dir, "config.toml", [&](std::ostream& os) { os << config_to_toml(cfg); });
  report.artifacts.push_back("report.json");
  report.json["artifacts"] = report.artifacts;
  std::ofstream os(dir / "report.json");
  if (!os) throw Error(ErrorKind::InvalidParameter, "out", "cannot write report.json");
  os << report.json.dump(2) << '\n';
  return report;
}

}  // namespace cpmm
