#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpmm/errors.hpp"

namespace cpmm {

/// Strong-convexity moduli of G and F*.
struct ConvexityData {
  double gamma_G = 0.0;
  double gamma_Fstar = 0.0;
};

/// ‖V‖ and ‖A - V‖.
struct NormData {
  double norm_V = 0.0;
  double norm_AmV = 0.0;
};

enum class Provenance { thm31, thm32, cor33, classical, manual };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::thm31: return "thm31";
    case Provenance::thm32: return "thm32";
    case Provenance::cor33: return "cor33";
    case Provenance::classical: return "classical";
    case Provenance::manual: return "manual";
  }
  return "unknown";
}

/// Constant step lengths plus the planner internals that the certificate
/// needs to re-check the step-length conditions.
struct StepPlan {
  double tau = 0.0;
  double sigma = 0.0;
  double omega = 1.0;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double b = std::numeric_limits<double>::quiet_NaN();
  double a = std::numeric_limits<double>::quiet_NaN();
  double mu_G = 0.0;
  double mu_Fstar = 0.0;
  Provenance provenance = Provenance::manual;
};

inline StepPlan manual_plan(double tau, double sigma, double omega) {
  require(tau > 0.0 && sigma > 0.0, ErrorKind::InvalidParameter, "manual plan: steps must be positive");
  StepPlan p;
  p.tau = tau;
  p.sigma = sigma;
  p.omega = omega;
  return p;
}

namespace detail {

constexpr double kRelTol = 1e-10;

// Signed relative slack of lhs >= rhs.
inline double rel_slack(double lhs, double rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return (lhs - rhs) / scale;
}

inline bool holds(double lhs, double rhs) { return rel_slack(lhs, rhs) >= -kRelTol; }

inline void check_inputs(const ConvexityData& conv, const NormData& norms) {
  require(conv.gamma_G >= 0.0 && conv.gamma_Fstar >= 0.0, ErrorKind::InvalidParameter,
          "strong convexity moduli must be nonnegative");
  require(norms.norm_V >= 0.0 && norms.norm_AmV >= 0.0, ErrorKind::InvalidParameter,
          "operator norms must be nonnegative");
  require(std::isfinite(norms.norm_V) && std::isfinite(norms.norm_AmV), ErrorKind::InvalidParameter,
          "operator norms must be finite");
}

inline void check_kappa(double kappa) {
  require(kappa > 0.0 && kappa < 1.0, ErrorKind::InvalidParameter, "kappa must lie in (0, 1)");
}

inline void check_precondition(const ConvexityData& conv, const NormData& norms) {
  const double product = conv.gamma_G * conv.gamma_Fstar;
  const double needed = 2.0 * norms.norm_AmV * norms.norm_AmV;
  if (!(product > needed)) {
    std::ostringstream msg;
    msg << "gamma_G*gamma_F* = " << product << " must exceed 2*|A-V|^2 = " << needed
        << " (|A-V| = " << norms.norm_AmV << ")";
    throw Error(ErrorKind::PreconditionViolated, "gammaG*gammaF>2|A-V|^2", msg.str());
  }
}

}  // namespace detail

/// Stepsizes for prescribed (μ_G, μ_F*, ε, δ, κ):
/// τ = min{δ/(ε‖A−V‖), sqrt((1−κ)μ_F*/(‖V‖²μ_G))}, σ = (μ_G/μ_F*)τ,
/// ω = 1/(1+2τμ_G). Throws ConditionViolated if the strong-convexity
/// conditions fail at the resulting ω.
inline StepPlan plan_thm31(const ConvexityData& conv, double mu_G, double mu_Fstar, double epsilon,
                           double delta, double kappa, const NormData& norms) {
  detail::check_inputs(conv, norms);
  detail::check_kappa(kappa);
  require(delta > 0.0 && delta <= kappa, ErrorKind::InvalidParameter, "delta must lie in (0, kappa]");
  require(mu_G > 0.0 && mu_Fstar > 0.0, ErrorKind::InvalidParameter, "mu_G and mu_F* must be positive");
  require(epsilon > 0.0, ErrorKind::InvalidParameter, "epsilon must be positive");
  require(norms.norm_V > 0.0, ErrorKind::InvalidParameter, "|V| must be positive");

  const double d = norms.norm_AmV;
  const double first = d > 0.0 ? delta / (epsilon * d) : std::numeric_limits<double>::infinity();
  const double second =
      std::sqrt((1.0 - kappa) * mu_Fstar / (norms.norm_V * norms.norm_V * mu_G));

  StepPlan p;
  p.tau = std::min(first, second);
  p.sigma = mu_G / mu_Fstar * p.tau;
  p.omega = 1.0 / (1.0 + 2.0 * p.tau * mu_G);
  p.kappa = kappa;
  p.delta = delta;
  p.epsilon = epsilon;
  p.mu_G = mu_G;
  p.mu_Fstar = mu_Fstar;
  p.a = conv.gamma_Fstar > 0.0 ? mu_Fstar / conv.gamma_Fstar : std::numeric_limits<double>::quiet_NaN();
  p.b = conv.gamma_G > 0.0 ? mu_G / conv.gamma_G : std::numeric_limits<double>::quiet_NaN();
  p.provenance = Provenance::thm31;

  const double rhs_G = epsilon / (2.0 * p.omega) * d + mu_G;
  if (!detail::holds(conv.gamma_G, rhs_G))
    throw Error(ErrorKind::ConditionViolated, "cond-gammaG",
                "gamma_G = " + std::to_string(conv.gamma_G) +
                    " < eps/(2 omega)|A-V| + mu_G = " + std::to_string(rhs_G));
  const double rhs_F = (1.0 + p.omega) / (2.0 * epsilon) * d + mu_Fstar;
  if (!detail::holds(conv.gamma_Fstar, rhs_F))
    throw Error(ErrorKind::ConditionViolated, "cond-gammaFstar",
                "gamma_F* = " + std::to_string(conv.gamma_Fstar) +
                    " < (1+omega)/(2 eps)|A-V| + mu_F* = " + std::to_string(rhs_F));
  return p;
}

/// Parameter-free planner under γ_G γ_F* > 2‖A−V‖².
///
/// b follows the closed form with a = 1/2, μ_G = bγ_G, μ_F* = γ_F*/2,
/// ε = ‖A−V‖/((1−a)γ_F*), δ = κ. τ is the plan_thm31 minimum evaluated at
/// those internals; whenever b is not pinned by its third bound the square
/// root term alone would break φ_i ≥ εη_i‖A−V‖/δ.
inline StepPlan plan_thm32(const ConvexityData& conv, double kappa, const NormData& norms) {
  detail::check_inputs(conv, norms);
  detail::check_kappa(kappa);
  require(norms.norm_V > 0.0, ErrorKind::InvalidParameter, "|V| must be positive");
  detail::check_precondition(conv, norms);
  const double d = norms.norm_AmV;
  if (d == 0.0)
    throw Error(ErrorKind::Degenerate, "zero-mismatch",
                "|A-V| = 0 forces b = 0; use plan_classical");

  const double gg = conv.gamma_G * conv.gamma_Fstar;
  const double d2 = d * d;
  const double nv2 = norms.norm_V * norms.norm_V;
  const double b = std::min({0.5, (0.5 - d2 / gg) / kappa,
                             (1.0 - kappa) / (kappa * kappa) * (d2 * d2 / nv2) * (2.0 / gg)});
  const double a = 0.5;

  StepPlan p;
  p.kappa = kappa;
  p.delta = kappa;
  p.a = a;
  p.b = b;
  p.mu_G = b * conv.gamma_G;
  p.mu_Fstar = a * conv.gamma_Fstar;
  p.epsilon = d / ((1.0 - a) * conv.gamma_Fstar);
  const double root = std::sqrt((1.0 - kappa) * conv.gamma_Fstar / (2.0 * b * nv2 * conv.gamma_G));
  p.tau = std::min(p.delta / (p.epsilon * d), root);
  p.sigma = 2.0 * b * (conv.gamma_G / conv.gamma_Fstar) * p.tau;
  p.omega = 1.0 / (1.0 + 2.0 * b * p.tau * conv.gamma_G);
  p.provenance = Provenance::thm32;
  return p;
}

/// Simplified planner with b = 1/2 for κ small enough.
inline StepPlan plan_cor33(const ConvexityData& conv, double kappa, const NormData& norms) {
  detail::check_inputs(conv, norms);
  require(norms.norm_V > 0.0, ErrorKind::InvalidParameter, "|V| must be positive");
  detail::check_precondition(conv, norms);
  const double d = norms.norm_AmV;
  if (d == 0.0)
    throw Error(ErrorKind::Degenerate, "zero-mismatch",
                "|A-V| = 0 collapses the admissible kappa range to {0}; use plan_classical");

  const double gg = conv.gamma_G * conv.gamma_Fstar;
  const double d2 = d * d;
  const std::array<std::pair<const char*, double>, 3> bounds{{
      {"1/2", 0.5},
      {"1-2|A-V|^2/(gG gF)", 1.0 - 2.0 * d2 / gg},
      {"|A-V|^2/|V| sqrt(2/(gG gF))", d2 / norms.norm_V * std::sqrt(2.0 / gg)},
  }};
  const auto binding = *std::min_element(bounds.begin(), bounds.end(),
                                         [](const auto& l, const auto& r) { return l.second < r.second; });
  if (!(kappa > 0.0) || kappa > binding.second)
    throw Error(ErrorKind::KappaOutOfRange, binding.first,
                "kappa = " + std::to_string(kappa) + " must lie in (0, " +
                    std::to_string(binding.second) + "], bound " + binding.first);

  StepPlan p;
  p.kappa = kappa;
  p.delta = kappa;
  p.a = 0.5;
  p.b = 0.5;
  p.mu_G = 0.5 * conv.gamma_G;
  p.mu_Fstar = 0.5 * conv.gamma_Fstar;
  p.epsilon = d / (0.5 * conv.gamma_Fstar);
  const double root =
      std::sqrt((1.0 - kappa) * conv.gamma_Fstar / (norms.norm_V * norms.norm_V * conv.gamma_G));
  p.tau = std::min(p.delta / (p.epsilon * d), root);
  p.sigma = (conv.gamma_G / conv.gamma_Fstar) * p.tau;
  p.omega = 1.0 / (1.0 + p.tau * conv.gamma_G);
  p.provenance = Provenance::cor33;
  return p;
}

/// Exact-adjoint stepsizes (no mismatch terms) with τσ‖V‖² = 1 − κ.
///
/// Without `step_ratio`, μ = γ and σ/τ = γ_G/γ_F*. A step ratio ρ = σ/τ
/// uses the largest moduli with μ_G/μ_F* = ρ, i.e. μ_F* = min(γ_F*, γ_G/ρ)
/// and μ_G = ρμ_F*, so ω = 1/(1+2τμ_G).
inline StepPlan plan_classical(const ConvexityData& conv, double kappa, double norm_V,
                               std::optional<double> step_ratio = std::nullopt) {
  require(conv.gamma_G > 0.0 && conv.gamma_Fstar > 0.0, ErrorKind::InvalidParameter,
          "plan_classical needs gamma_G, gamma_F* > 0");
  detail::check_kappa(kappa);
  require(norm_V > 0.0 && std::isfinite(norm_V), ErrorKind::InvalidParameter, "|V| must be positive");
  StepPlan p;
  p.mu_G = conv.gamma_G;
  p.mu_Fstar = conv.gamma_Fstar;
  if (step_ratio) {
    const double rho = *step_ratio;
    require(rho > 0.0 && std::isfinite(rho), ErrorKind::InvalidParameter, "step ratio must be positive");
    p.mu_Fstar = std::min(conv.gamma_Fstar, conv.gamma_G / rho);
    p.mu_G = rho * p.mu_Fstar;
  }
  p.tau = std::sqrt((1.0 - kappa) * p.mu_Fstar / (norm_V * norm_V * p.mu_G));
  p.sigma = (p.mu_G / p.mu_Fstar) * p.tau;
  p.omega = 1.0 / (1.0 + 2.0 * p.tau * p.mu_G);
  p.kappa = kappa;
  p.delta = kappa;
  p.epsilon = 1.0;
  p.a = p.mu_Fstar / conv.gamma_Fstar;
  p.b = p.mu_G / conv.gamma_G;
  p.provenance = Provenance::classical;
  return p;
}

// ---------------------------------------------------------------------------
// Runtime certificate

/// Test-operator weights (φ_i, ψ_i, η_i). Stored values are the true ones
/// divided by exp(log_scale); every checked condition is homogeneous of
/// degree one in them.
struct CertificateState {
  double phi = 1.0;
  double psi = 1.0;
  double eta = 1.0;
  int iter = 0;
  double log_scale = 0.0;
};

inline CertificateState initial_certificate(const StepPlan& plan) {
  CertificateState s;
  s.phi = 1.0 / plan.tau;
  s.psi = 1.0 / plan.sigma;
  s.eta = s.phi * plan.tau;
  return s;
}

inline CertificateState advance_certificate(const CertificateState& state, const StepPlan& plan) {
  CertificateState next;
  next.phi = state.phi * (1.0 + 2.0 * plan.tau * plan.mu_G);
  next.psi = state.psi * (1.0 + 2.0 * plan.sigma * plan.mu_Fstar);
  next.eta = next.phi * plan.tau;
  next.iter = state.iter + 1;
  next.log_scale = state.log_scale;
  const double big = std::max({next.phi, next.psi, next.eta});
  if (big > 1e100) {
    next.phi /= big;
    next.psi /= big;
    next.eta /= big;
    next.log_scale += std::log(big);
  }
  return next;
}

struct CertificateViolation {
  std::string condition;
  int iteration = 0;
  double slack = 0.0;  // relative; negative means violated
};

struct CertificateReport {
  bool passed = true;
  int iterations_checked = 0;
  std::optional<CertificateViolation> first_violation;
  /// Smallest relative slack seen per condition, in check order.
  std::vector<std::pair<std::string, double>> min_slack;

  std::string to_text() const {
    std::ostringstream os;
    os.precision(12);
    os << "certificate " << (passed ? "pass" : "fail") << " iterations " << iterations_checked << '\n';
    if (first_violation)
      os << "violation " << first_violation->condition << ' ' << first_violation->iteration << ' '
         << first_violation->slack << '\n';
    for (const auto& [name, slack] : min_slack) os << "slack " << name << ' ' << slack << '\n';
    return os.str();
  }
};

/// Evolves the test-operator weights for `n_iters` steps and checks every
/// step-length condition at each step. Violations are report entries.
inline CertificateReport verify_certificate(const StepPlan& plan, const NormData& norms,
                                            const ConvexityData& conv, int n_iters) {
  CertificateReport report;
  const double d = norms.norm_AmV;
  const double nv2 = norms.norm_V * norms.norm_V;

  static constexpr std::array<const char*, 10> kNames{
      "params",  "cond-psi",   "S-diag2",  "cond-phi", "S-diag1", "cond-gammaG", "cond-gammaFstar",
      "adjointpd", "def-eta", "def-omega"};
  std::array<double, kNames.size()> min_slack;
  min_slack.fill(std::numeric_limits<double>::infinity());

  auto record = [&](std::size_t idx, int iter, double slack) {
    if (std::isnan(slack)) slack = -std::numeric_limits<double>::infinity();
    min_slack[idx] = std::min(min_slack[idx], slack);
    if (slack < -detail::kRelTol && !report.first_violation) {
      report.passed = false;
      report.first_violation = CertificateViolation{kNames[idx], iter, slack};
    }
  };
  auto equality = [](double lhs, double rhs) { return -std::abs(detail::rel_slack(lhs, rhs)); };

  const bool params_ok = plan.tau > 0.0 && plan.sigma > 0.0 && plan.kappa > 0.0 && plan.kappa < 1.0 &&
                         plan.delta > 0.0 && plan.delta <= plan.kappa && plan.epsilon > 0.0 &&
                         plan.mu_G >= 0.0 && plan.mu_Fstar >= 0.0;
  record(0, 0, params_ok ? 0.0 : -1.0);
  if (!params_ok) {
    report.min_slack.emplace_back(kNames[0], min_slack[0]);
    return report;
  }

  CertificateState state = initial_certificate(plan);
  for (int i = 0; i < n_iters; ++i) {
    const CertificateState next = advance_certificate(state, plan);
    // Bring both states to a common scale (next may have been renormalized).
    const double rescale = std::exp(state.log_scale - next.log_scale);
    const double phi = state.phi * rescale;
    const double psi = state.psi * rescale;
    const double eta = state.eta * rescale;
    const double psi_next = next.psi;
    const double eta_next = next.eta;

    const double psi_bound = eta * eta * nv2 / (phi * (1.0 - plan.kappa));
    record(1, i, detail::rel_slack(psi_next, psi_bound));
    record(2, i, detail::rel_slack(psi_next * phi * (1.0 - plan.kappa), eta * eta * nv2));
    const double phi_bound = plan.epsilon * eta * d / plan.delta;
    record(3, i, detail::rel_slack(phi, phi_bound));
    record(4, i, detail::rel_slack(plan.delta * phi, plan.epsilon * eta * d));
    record(5, i, detail::rel_slack(conv.gamma_G, plan.epsilon / (2.0 * plan.omega) * d + plan.mu_G));
    record(6, i, detail::rel_slack(conv.gamma_Fstar,
                                   (1.0 + plan.omega) / (2.0 * plan.epsilon) * d + plan.mu_Fstar));
    record(7, i, equality(plan.omega * plan.sigma * psi_next, plan.tau * phi));
    record(8, i, equality(eta, psi * plan.sigma));
    record(9, i, equality(plan.omega, eta / eta_next));

    state = next;
    report.iterations_checked = i + 1;
  }
  for (std::size_t k = 0; k < kNames.size(); ++k) report.min_slack.emplace_back(kNames[k], min_slack[k]);
  return report;
}

/// Grid search for plan_thm31 internals (μ_G = bγ_G, μ_F* = aγ_F*,
/// ε on a log grid, δ = κ) that satisfy all conditions; returns the plan
/// with the smallest ω that also passes the certificate over `n_iters`.
inline std::optional<StepPlan> search_thm31(const ConvexityData& conv, const NormData& norms,
                                            double kappa, int n_iters = 200) {
  if (!(conv.gamma_G > 0.0 && conv.gamma_Fstar > 0.0 && norms.norm_V > 0.0)) return std::nullopt;
  // The two strong-convexity conditions multiply to γ_Gγ_F* ≥ (1+ω)‖A−V‖²/(4ω) ≥ ‖A−V‖²/2.
  if (conv.gamma_G * conv.gamma_Fstar < 0.5 * norms.norm_AmV * norms.norm_AmV) return std::nullopt;
  const double eps0 = std::sqrt(conv.gamma_G / conv.gamma_Fstar);
  std::optional<StepPlan> best;
  for (int ib = 1; ib < 40; ++ib) {
    const double b = ib / 40.0;
    for (int ia = 1; ia < 40; ++ia) {
      const double a = ia / 40.0;
      for (int je = -60; je <= 60; ++je) {
        const double eps = eps0 * std::pow(10.0, je / 10.0);
        try {
          StepPlan p = plan_thm31(conv, b * conv.gamma_G, a * conv.gamma_Fstar, eps, kappa, kappa, norms);
          if (!best || p.omega < best->omega) {
            if (verify_certificate(p, norms, conv, n_iters).passed) best = p;
          }
        } catch (const Error&) {
        }
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Q-matrix obstruction

struct QCheck {
  bool is_psd = false;
  double min_eigenvalue = 0.0;
  Eigen::Matrix4d matrix;
};

/// Symmetric 4×4 matrix of the quadratic form in
/// (‖x⁺−x̂‖, ‖y⁺−ŷ‖, ‖x⁺−x‖, ‖y⁺−y‖) from one step of the descent
/// inequality.
inline Eigen::Matrix4d assemble_q(const ConvexityData& conv, double mu_G, double mu_Fstar,
                                  const NormData& norms, double eta_i, double eta_ip1, double phi_i,
                                  double psi_ip1) {
  const double d = norms.norm_AmV;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = eta_i * (conv.gamma_G - mu_G);
  q(0, 1) = q(1, 0) = -0.5 * eta_ip1 * d;
  q(1, 1) = eta_ip1 * (conv.gamma_Fstar - mu_Fstar);
  q(1, 2) = q(2, 1) = -0.5 * eta_i * d;
  q(2, 2) = phi_i;
  q(2, 3) = q(3, 2) = -eta_i * norms.norm_V;
  q(3, 3) = psi_ip1;
  return q;
}

inline QCheck check_q_psd(const ConvexityData& conv, double mu_G, double mu_Fstar,
                          const NormData& norms, double eta_i, double eta_ip1, double phi_i,
                          double psi_ip1) {
  QCheck out;
  out.matrix = assemble_q(conv, mu_G, mu_Fstar, norms, eta_i, eta_ip1, phi_i, psi_ip1);
  require(out.matrix.allFinite(), ErrorKind::InvalidParameter, "check_q_psd: non-finite input");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(out.matrix, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = solver.eigenvalues().minCoeff();
  out.is_psd = out.min_eigenvalue >= -1e-10;
  return out;
}

}  // namespace cpmm
