#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cpmm/analysis.hpp"
#include "cpmm/errors.hpp"
#include "cpmm/imaging.hpp"
#include "cpmm/linear_map.hpp"
#include "cpmm/operator_norm.hpp"
#include "cpmm/prox.hpp"
#include "cpmm/radon.hpp"
#include "cpmm/solver.hpp"
#include "cpmm/stepsize.hpp"

namespace cpmm {

enum class ExpectedBehavior { converges_linear, diverges_monotone, diverges_unbounded, stationary };

inline const char* to_string(ExpectedBehavior b) {
  switch (b) {
    case ExpectedBehavior::converges_linear: return "converges_linear";
    case ExpectedBehavior::diverges_monotone: return "diverges_monotone";
    case ExpectedBehavior::diverges_unbounded: return "diverges_unbounded";
    case ExpectedBehavior::stationary: return "stationary";
  }
  return "unknown";
}

/// Recommended planner. `manual` carries fixed steps.
struct PlanHint {
  Provenance planner = Provenance::thm32;
  double kappa = 0.01;
  std::optional<StepPlan> manual;
};

struct PreconditionStatus {
  bool holds = false;
  double product = 0.0;  // γ_G γ_F*
  double required = 0.0;  // 2‖A − V‖²
  std::string message;
};

enum class PreconditionPolicy { enforce, report };

/// Extra data for tomography scenarios.
struct CtData {
  ImageGrid phantom;
  SinogramGeometry geometry;
  Vec sinogram;  // clean, from the strip projector
  Vec data;      // noisy sinogram z
  LinearMap radon_strip;
  LinearMap radon_line;
  LinearMap gradient;
  double lambda0 = 1.0, lambda1 = 1.0, lambda2 = 1.0, eps = 0.0, noise_rel = 0.0;
  double norm_A = 0.0;
};

struct Scenario {
  std::string name;
  SaddleProblem problem;
  PlanHint plan_hint;
  std::vector<Reference> references;
  std::function<double(const Vec&)> primal_objective;
  ExpectedBehavior expected = ExpectedBehavior::converges_linear;
  Vec x0;
  Vec y0;
  NormData norms;
  PreconditionStatus precondition;
  std::optional<QuadraticProblem> quadratic;
  std::optional<AccelState> accel;
  std::optional<CtData> ct;
};

/// F(Ax) + G(x) through the scenario's objective closure.
inline double primal_objective(const Scenario& sc, const Vec& x) {
  if (!sc.primal_objective) throw Error(ErrorKind::Unavailable, sc.name + ": no primal objective attached");
  return sc.primal_objective(x);
}

inline PreconditionStatus check_precondition(const ConvexityData& conv, const NormData& norms) {
  PreconditionStatus st;
  st.product = conv.gamma_G * conv.gamma_Fstar;
  st.required = 2.0 * norms.norm_AmV * norms.norm_AmV;
  st.holds = st.product > st.required;
  std::ostringstream os;
  os.precision(6);
  os << "gamma_G*gamma_F* = " << st.product << (st.holds ? " > " : " <= ") << "2*|A-V|^2 = " << st.required
     << " (|A-V| = " << norms.norm_AmV << ")";
  st.message = os.str();
  return st;
}

/// Random quadratic testbed with V = A + E.
inline Scenario build_quadratic(Index n, Index m, double alpha, double beta, double mismatch_scale,
                                std::uint64_t seed, bool allow_precondition_violation = false) {
  QuadraticProblem q = random_quadratic(n, m, alpha, beta, mismatch_scale, seed);
  LinearMap A = dense_map(q.A, "A");
  LinearMap V = dense_map(q.V, "V");
  MismatchedPair pair(A, V);
  NormData norms;
  norms.norm_V = estimate_operator_norm(V, 1e-13, 100000, seed).value;
  norms.norm_AmV = mismatch_norm(pair, 1e-13, seed, 100000);
  const ConvexityData conv{alpha, beta};
  PreconditionStatus pre = check_precondition(conv, norms);
  if (!pre.holds && !allow_precondition_violation)
    throw Error(ErrorKind::PreconditionViolated, "gammaG*gammaF>2|A-V|^2", pre.message);

  const Vec x_star = quadratic_true_solution(q);
  const FixedPointPair saddle = quadratic_true_saddle(q);
  const FixedPointPair fp = quadratic_mismatched_fixed_point(q);

  Scenario sc{"quadratic",
              SaddleProblem(prox_scaled_sqnorm(alpha, n), prox_quadratic_dual(beta, q.z), A, V),
              PlanHint{Provenance::thm32, 0.01, std::nullopt},
              {Reference{"fixed_point", fp.x_hat, fp.y_hat}, Reference{"true_solution", x_star, saddle.y_hat}},
              {},
              ExpectedBehavior::converges_linear,
              Vec::Zero(n),
              Vec::Zero(m),
              norms,
              pre,
              q,
              std::nullopt,
              std::nullopt};
  const Mat Am = q.A;
  const Vec z = q.z;
  sc.primal_objective = [Am, z, alpha, beta](const Vec& x) {
    return 0.5 * alpha * x.squaredNorm() + (Am * x - z).squaredNorm() / (2.0 * beta);
  };
  return sc;
}

/// A = I, V = −α_mm·I, G ≡ 0, F* = indicator of [−1, 1]^n, fixed steps with
/// ω = 1. (0, 0) is both the saddle point and a fixed point, yet positive
/// starts grow without bound.
inline Scenario build_l1_counterexample(Index n, double alpha_mm, double tau, double sigma, const Vec& x0,
                                        const Vec& y0) {
  require(n >= 1, ErrorKind::InvalidParameter, "counterexample: n must be >= 1");
  require(alpha_mm > 0.0, ErrorKind::InvalidParameter, "counterexample: alpha_mm must be positive");
  if (x0.size() != n || y0.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "counterexample: initial vectors must have length n");
  require(x0.minCoeff() > 0.0 && y0.minCoeff() > 0.0, ErrorKind::InvalidParameter,
          "counterexample: x0 and y0 must be positive componentwise");
  LinearMap A = identity_map(n);
  LinearMap V = identity_map(n, -alpha_mm);
  NormData norms{alpha_mm, 1.0 + alpha_mm};
  Scenario sc{"counterexample",
              SaddleProblem(prox_zero(n), prox_box_indicator(1.0, n), A, V),
              PlanHint{Provenance::manual, 0.0, manual_plan(tau, sigma, 1.0)},
              {Reference{"saddle", Vec::Zero(n), Vec::Zero(n)}},
              [](const Vec& x) { return x.lpNorm<1>(); },
              ExpectedBehavior::diverges_monotone,
              x0,
              y0,
              norms,
              check_precondition({0.0, 0.0}, norms),
              std::nullopt,
              std::nullopt,
              std::nullopt};
  return sc;
}

/// A = (1 1), V = (1 −1), G ≡ 0, F(w) = (w − z)²/2, accelerated steps with
/// γ = 1 started at x = 0, y = −z.
inline Scenario build_divergence_example(double z, double tau0, double sigma0) {
  require(tau0 > 0.0 && sigma0 > 0.0, ErrorKind::InvalidParameter, "divergence example: steps must be positive");
  require(tau0 * sigma0 < 0.5, ErrorKind::InvalidParameter, "divergence example: need tau0*sigma0 < 1/|A|^2 = 1/2");
  Mat a(1, 2), v(1, 2);
  a << 1.0, 1.0;
  v << 1.0, -1.0;
  LinearMap A = dense_map(a, "A");
  LinearMap V = dense_map(v, "V");
  NormData norms{std::sqrt(2.0), 2.0};
  Vec zv(1);
  zv << z;
  AccelState st;
  st.x = Vec::Zero(2);
  st.x_prev = st.x;
  st.y = -zv;
  st.tau = tau0;
  st.sigma = sigma0;
  st.gamma = 1.0;
  Scenario sc{"divergence",
              SaddleProblem(prox_zero(2), prox_quadratic_dual(1.0, zv), A, V),
              PlanHint{Provenance::manual, 0.0, std::nullopt},
              {},
              [a, z](const Vec& x) { return 0.5 * std::pow((a * x)(0) - z, 2); },
              z != 0.0 ? ExpectedBehavior::diverges_unbounded : ExpectedBehavior::stationary,
              st.x,
              st.y,
              norms,
              check_precondition({0.0, 1.0}, norms),
              std::nullopt,
              st,
              std::nullopt};
  return sc;
}

struct CtParams {
  Index rows = 64;
  Index cols = 64;
  SinogramGeometry geometry{20, 90, 1.0, 1.0};
  double lambda0 = 1.0;
  double lambda1 = 1.2;
  double lambda2 = 0.01;
  double eps = 0.01;
  double noise_rel = 0.15;
  std::uint64_t seed = 0;
  PreconditionPolicy policy = PreconditionPolicy::report;
};

/// TV-regularized tomography:
/// min (λ₀/2)‖Rx − z‖² + Σ_pixels h(|∇x|) + (λ₂/2)‖x‖², with h the
/// Huber-type conjugate of I{|p| ≤ λ₁} + (ε/2)|p|². A stacks the strip
/// projector over ∇, V stacks the line projector over ∇.
inline Scenario build_tv_ct(const CtParams& prm) {
  require(prm.lambda0 > 0.0 && prm.lambda1 > 0.0 && prm.lambda2 > 0.0, ErrorKind::InvalidParameter,
          "build_tv_ct: lambda0, lambda1, lambda2 must be positive");
  require(prm.eps >= 0.0 && prm.noise_rel >= 0.0, ErrorKind::InvalidParameter,
          "build_tv_ct: eps and noise_rel must be nonnegative");
  prm.geometry.validate();
  const Index m = prm.rows;
  const Index n = prm.cols;
  ImageGrid phantom = shepp_logan(m, n);
  LinearMap strip = radon_strip(prm.geometry, m, n);
  LinearMap line = radon_line(prm.geometry, m, n);
  LinearMap grad = gradient_op(m, n);

  const Vec sino = strip.apply(phantom.values);
  Vec data = sino;
  if (prm.noise_rel > 0.0) {
    Rng rng(mix_seed(prm.seed, 7));
    const Vec g = gaussian_vector(sino.size(), rng);
    data += prm.noise_rel * sino.norm() * g / g.norm();
  }

  LinearMap A = stack({strip, grad}, "strip+grad");
  LinearMap V = stack({line, grad}, "line+grad");
  NormData norms;
  norms.norm_V = estimate_operator_norm(V, 1e-10, 20000, prm.seed).value;
  norms.norm_AmV = estimate_operator_norm(difference(A, V), 1e-10, 20000, prm.seed).value;
  const double norm_A = estimate_operator_norm(A, 1e-10, 20000, prm.seed).value;

  const FieldShape shape = phantom.field_shape();
  ProxFn g_prox = prox_scaled_sqnorm(prm.lambda2, m * n);
  ProxFn f_prox = prox_ct_dual_block(prm.lambda0, data, prm.lambda1, prm.eps, shape);
  const ConvexityData conv{g_prox.strong_convexity(), f_prox.strong_convexity()};
  PreconditionStatus pre = check_precondition(conv, norms);
  if (!pre.holds && prm.policy == PreconditionPolicy::enforce)
    throw Error(ErrorKind::PreconditionViolated, "gammaG*gammaF>2|A-V|^2",
                pre.message + "; increase lambda2 or eps");

  const Index pixels = m * n;
  const double l0 = prm.lambda0, l1 = prm.lambda1, l2 = prm.lambda2, eps = prm.eps;
  auto objective = [strip, grad, data, pixels, l0, l1, l2, eps](const Vec& x) {
    return 0.5 * l0 * (strip.apply(x) - data).squaredNorm() + huber_tv(grad.apply(x), pixels, l1, eps) +
           0.5 * l2 * x.squaredNorm();
  };

  CtData ct{phantom, prm.geometry, sino, data, strip, line, grad,
            prm.lambda0, prm.lambda1, prm.lambda2, prm.eps, prm.noise_rel, norm_A};
  Scenario sc{"ct",
              SaddleProblem(g_prox, f_prox, A, V),
              PlanHint{Provenance::thm31, 0.01, std::nullopt},
              {Reference{"phantom", phantom.values, std::nullopt}},
              objective,
              ExpectedBehavior::converges_linear,
              Vec::Zero(pixels),
              Vec::Zero(A.rows()),
              norms,
              pre,
              std::nullopt,
              std::nullopt,
              std::move(ct)};
  return sc;
}

/// The same problem with V replaced by A itself.
inline SaddleProblem matched_problem(const SaddleProblem& prob) {
  return SaddleProblem(prob.prox_G, prob.prox_Fstar, prob.forward, prob.forward);
}

}  // namespace cpmm
