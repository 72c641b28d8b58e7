#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cpmm/errors.hpp"
#include "cpmm/linear_map.hpp"
#include "cpmm/prox.hpp"
#include "cpmm/stepsize.hpp"

namespace cpmm {

/// min_x max_y G(x) + <Ax, y> - F*(y), iterated with V^T in place of A^T.
struct SaddleProblem {
  ProxFn prox_G;
  ProxFn prox_Fstar;
  LinearMap forward;
  LinearMap surrogate;

  SaddleProblem(ProxFn g, ProxFn fstar, LinearMap a, LinearMap v)
      : prox_G(std::move(g)), prox_Fstar(std::move(fstar)), forward(std::move(a)), surrogate(std::move(v)) {
    if (forward.rows() != surrogate.rows() || forward.cols() != surrogate.cols())
      throw Error(ErrorKind::DimensionMismatch, "saddle problem: A and V shapes differ");
    if (prox_G.dim() != forward.cols())
      throw Error(ErrorKind::DimensionMismatch, "saddle problem: prox_G dimension != cols(A)");
    if (prox_Fstar.dim() != forward.rows())
      throw Error(ErrorKind::DimensionMismatch, "saddle problem: prox_F* dimension != rows(A)");
  }

  ConvexityData conv() const { return {prox_G.strong_convexity(), prox_Fstar.strong_convexity()}; }
  Index primal_dim() const { return forward.cols(); }
  Index dual_dim() const { return forward.rows(); }
};

struct IterateState {
  Vec x;
  Vec y;
  Vec x_prev;
  int iter = 0;
};

inline IterateState initial_state(Vec x0, Vec y0) {
  IterateState s;
  s.x_prev = x0;
  s.x = std::move(x0);
  s.y = std::move(y0);
  return s;
}

namespace detail {

inline void check_finite(const IterateState& s) {
  if (!s.x.allFinite() || !s.y.allFinite())
    throw Error(ErrorKind::NonFiniteIterate, "iterate " + std::to_string(s.iter),
                "non-finite entry in iterate " + std::to_string(s.iter));
}

inline void check_plan(const StepPlan& plan) {
  require(std::isfinite(plan.tau) && std::isfinite(plan.sigma) && std::isfinite(plan.omega) &&
              plan.tau > 0.0 && plan.sigma > 0.0,
          ErrorKind::InvalidParameter, "step plan must have finite positive tau, sigma and finite omega");
}

inline void check_state(const IterateState& s, const SaddleProblem& prob) {
  if (s.x.size() != prob.primal_dim() || s.y.size() != prob.dual_dim())
    throw Error(ErrorKind::DimensionMismatch, "iterate dimensions do not match the problem");
}

inline IterateState primal_dual_step(const IterateState& s, const StepPlan& plan, const SaddleProblem& prob,
                                     const LinearMap& backward) {
  IterateState next;
  next.x = prob.prox_G(s.x - plan.tau * backward.apply_transpose(s.y), plan.tau);
  const Vec x_bar = next.x + plan.omega * (next.x - s.x);
  next.y = prob.prox_Fstar(s.y + plan.sigma * prob.forward.apply(x_bar), plan.sigma);
  next.x_prev = s.x;
  next.iter = s.iter + 1;
  check_finite(next);
  return next;
}

}  // namespace detail

/// One step x⁺ = prox_{τG}(x − τVᵀy), x̄ = x⁺ + ω(x⁺ − x),
/// y⁺ = prox_{σF*}(y + σAx̄).
inline IterateState step_mismatched(const IterateState& state, const StepPlan& plan,
                                    const SaddleProblem& prob) {
  detail::check_plan(plan);
  detail::check_state(state, prob);
  return detail::primal_dual_step(state, plan, prob, prob.surrogate);
}

/// The same step with the true transpose of A.
inline IterateState step_classical(const IterateState& state, const StepPlan& plan,
                                   const SaddleProblem& prob) {
  detail::check_plan(plan);
  detail::check_state(state, prob);
  return detail::primal_dual_step(state, plan, prob, prob.forward);
}

/// Joint Euclidean norm of (x, y).
inline double joint_norm(const Vec& x, const Vec& y) {
  const double plain = std::sqrt(x.squaredNorm() + y.squaredNorm());
  return std::isfinite(plain) ? plain : std::hypot(x.stableNorm(), y.stableNorm());
}

/// Reference point for distance tracking. Without `y` distances are primal only.
struct Reference {
  std::string name;
  Vec x;
  std::optional<Vec> y;
};

struct TraceRecord {
  int iter = 0;
  double residual = 0.0;
  std::vector<double> dist;         // joint distance to each reference
  std::vector<double> primal_dist;  // ‖x − ref.x‖
  double objective = std::numeric_limits<double>::quiet_NaN();
  double tau = 0.0;
  double sigma = 0.0;
};

enum class Termination { converged, max_iter, diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iter: return "max_iter";
    case Termination::diverged: return "diverged";
  }
  return "unknown";
}

struct RunTrace {
  std::vector<std::string> reference_names;
  std::vector<TraceRecord> records;
  IterateState final_state;
  Termination termination = Termination::max_iter;
  std::string message;
};

/// Thrown when an iterate becomes non-finite; carries the trace up to the
/// last finite iterate.
class DivergenceError : public Error {
 public:
  DivergenceError(RunTrace trace, const std::string& message)
      : Error(ErrorKind::NonFiniteIterate, "diverged", message), trace_(std::move(trace)) {}
  const RunTrace& trace() const noexcept { return trace_; }

 private:
  RunTrace trace_;
};

struct SolveOptions {
  int max_iter = 1000;
  double rel_tol = 1e-10;
  std::vector<Reference> references;
  std::function<double(const Vec&)> objective;
  int objective_every = 1;
  bool classical = false;  // use A^T instead of V^T
  /// Optional per-iteration hook, called after each recorded step.
  std::function<void(const IterateState&)> observer;
};

namespace detail {

inline TraceRecord make_record(const IterateState& prev, const IterateState& next, const SolveOptions& opt,
                               double tau, double sigma) {
  TraceRecord r;
  r.iter = next.iter;
  r.residual = joint_norm(next.x - prev.x, next.y - prev.y);
  r.tau = tau;
  r.sigma = sigma;
  for (const auto& ref : opt.references) {
    const double px = (next.x - ref.x).norm();
    r.primal_dist.push_back(px);
    r.dist.push_back(ref.y ? joint_norm(next.x - ref.x, next.y - *ref.y) : px);
  }
  if (opt.objective && opt.objective_every > 0 && next.iter % opt.objective_every == 0)
    r.objective = opt.objective(next.x);
  return r;
}

inline void check_references(const SolveOptions& opt, const SaddleProblem& prob) {
  for (const auto& ref : opt.references) {
    if (ref.x.size() != prob.primal_dim() || (ref.y && ref.y->size() != prob.dual_dim()))
      throw Error(ErrorKind::DimensionMismatch, "reference " + ref.name + " has wrong dimensions");
  }
}

}  // namespace detail

/// Iterates until ‖u^{i+1} − u^i‖ ≤ rel_tol·(1 + ‖u^{i+1}‖) or max_iter.
/// Non-finite iterates raise DivergenceError with the partial trace.
inline RunTrace solve(const SaddleProblem& prob, const StepPlan& plan, const Vec& x0, const Vec& y0,
                      const SolveOptions& opt) {
  require(opt.max_iter >= 1, ErrorKind::InvalidParameter, "solve: max_iter must be >= 1");
  require(opt.rel_tol > 0.0, ErrorKind::InvalidParameter, "solve: rel_tol must be positive");
  detail::check_plan(plan);
  detail::check_references(opt, prob);

  RunTrace trace;
  for (const auto& ref : opt.references) trace.reference_names.push_back(ref.name);
  trace.records.reserve(static_cast<std::size_t>(opt.max_iter));
  IterateState state = initial_state(x0, y0);
  detail::check_state(state, prob);
  const LinearMap& backward = opt.classical ? prob.forward : prob.surrogate;

  for (int k = 0; k < opt.max_iter; ++k) {
    IterateState next;
    try {
      next = detail::primal_dual_step(state, plan, prob, backward);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteIterate) throw;
      trace.final_state = std::move(state);
      trace.termination = Termination::diverged;
      trace.message = e.what();
      throw DivergenceError(std::move(trace), e.what());
    }
    trace.records.push_back(detail::make_record(state, next, opt, plan.tau, plan.sigma));
    if (opt.observer) opt.observer(next);
    const double residual = trace.records.back().residual;
    state = std::move(next);
    if (std::isfinite(residual) && residual <= opt.rel_tol * (1.0 + joint_norm(state.x, state.y))) {
      trace.termination = Termination::converged;
      break;
    }
    trace.termination = Termination::max_iter;
  }
  if (opt.objective && std::isnan(trace.records.back().objective))
    trace.records.back().objective = opt.objective(state.x);
  trace.final_state = std::move(state);
  return trace;
}

// ---------------------------------------------------------------------------
// Accelerated variant with varying steps

struct AccelState {
  Vec x;
  Vec y;
  Vec x_prev;
  double tau = 0.0;
  double sigma = 0.0;
  double gamma = 1.0;
  int iter = 0;
};

/// x⁺ = prox_{τ_i G}(x − τ_i Vᵀy), θ_i = 1/sqrt(1+2τ_iγ), τ_{i+1} = θ_iτ_i,
/// σ_{i+1} = σ_i/θ_i, y⁺ = prox_{σ_{i+1}F*}(y + σ_{i+1}A(x⁺ + θ_i(x⁺ − x))).
inline AccelState step_accelerated(const AccelState& s, const SaddleProblem& prob) {
  require(s.gamma > 0.0, ErrorKind::InvalidParameter, "step_accelerated: gamma must be positive");
  require(s.tau > 0.0 && s.sigma > 0.0, ErrorKind::InvalidParameter, "step_accelerated: steps must be positive");
  if (s.x.size() != prob.primal_dim() || s.y.size() != prob.dual_dim())
    throw Error(ErrorKind::DimensionMismatch, "accelerated iterate dimensions do not match the problem");
  AccelState next;
  next.gamma = s.gamma;
  next.x = prob.prox_G(s.x - s.tau * prob.surrogate.apply_transpose(s.y), s.tau);
  const double theta = 1.0 / std::sqrt(1.0 + 2.0 * s.tau * s.gamma);
  next.tau = theta * s.tau;
  next.sigma = s.sigma / theta;
  const Vec x_bar = next.x + theta * (next.x - s.x);
  next.y = prob.prox_Fstar(s.y + next.sigma * prob.forward.apply(x_bar), next.sigma);
  next.x_prev = s.x;
  next.iter = s.iter + 1;
  if (!next.x.allFinite() || !next.y.allFinite())
    throw Error(ErrorKind::NonFiniteIterate, "iterate " + std::to_string(next.iter),
                "non-finite entry in accelerated iterate " + std::to_string(next.iter));
  return next;
}

/// Runs step_accelerated for max_iter steps (no convergence stop); the
/// record's tau/sigma are the steps used to produce that iterate.
inline RunTrace solve_accelerated(const SaddleProblem& prob, AccelState state, int max_iter,
                                  const std::vector<Reference>& references = {}) {
  require(max_iter >= 1, ErrorKind::InvalidParameter, "solve_accelerated: max_iter must be >= 1");
  SolveOptions opt;
  opt.references = references;
  detail::check_references(opt, prob);
  RunTrace trace;
  for (const auto& ref : references) trace.reference_names.push_back(ref.name);
  trace.records.reserve(static_cast<std::size_t>(max_iter));
  for (int k = 0; k < max_iter; ++k) {
    AccelState next;
    try {
      next = step_accelerated(state, prob);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteIterate) throw;
      trace.final_state = IterateState{state.x, state.y, state.x_prev, state.iter};
      trace.termination = Termination::diverged;
      trace.message = e.what();
      throw DivergenceError(std::move(trace), e.what());
    }
    const IterateState a{state.x, state.y, state.x_prev, state.iter};
    const IterateState b{next.x, next.y, next.x_prev, next.iter};
    trace.records.push_back(detail::make_record(a, b, opt, state.tau, next.sigma));
    state = std::move(next);
  }
  trace.termination = Termination::max_iter;
  trace.final_state = IterateState{state.x, state.y, state.x_prev, state.iter};
  return trace;
}

// ---------------------------------------------------------------------------
// Export

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV columns: iter, residual, dist_to_ref1, dist_to_ref2, objective.
/// Missing references or objective values are written as nan.
inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << "iter,residual,dist_to_ref1,dist_to_ref2,objective\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : trace.records) {
    os << r.iter << ',' << format_double(r.residual) << ','
       << format_double(r.dist.size() > 0 ? r.dist[0] : nan) << ','
       << format_double(r.dist.size() > 1 ? r.dist[1] : nan) << ',' << format_double(r.objective) << '\n';
  }
}

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline nlohmann::json trace_to_json(const RunTrace& trace) {
  nlohmann::json j;
  j["termination"] = to_string(trace.termination);
  j["iterations"] = trace.records.size();
  j["references"] = trace.reference_names;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : trace.records) {
    nlohmann::json row;
    row["iter"] = r.iter;
    row["residual"] = json_number(r.residual);
    nlohmann::json d = nlohmann::json::array();
    for (double v : r.dist) d.push_back(json_number(v));
    row["dist"] = d;
    nlohmann::json pd = nlohmann::json::array();
    for (double v : r.primal_dist) pd.push_back(json_number(v));
    row["primal_dist"] = pd;
    row["objective"] = json_number(r.objective);
    rows.push_back(row);
  }
  j["records"] = rows;
  if (!trace.message.empty()) j["message"] = trace.message;
  return j;
}

}  // namespace cpmm
