#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cpmm/errors.hpp"
#include "cpmm/linear_map.hpp"
#include "cpmm/operator_norm.hpp"
#include "cpmm/random.hpp"
#include "cpmm/solver.hpp"

namespace cpmm {

/// min_x (α/2)‖x‖² + ‖Ax − z‖²/(2β), iterated with surrogate V.
struct QuadraticProblem {
  Mat A;
  Mat V;
  Vec z;
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    require(alpha > 0.0 && beta > 0.0, ErrorKind::InvalidParameter, "quadratic problem: alpha, beta must be positive");
    if (A.rows() != V.rows() || A.cols() != V.cols())
      throw Error(ErrorKind::DimensionMismatch, "quadratic problem: A and V shapes differ");
    if (z.size() != A.rows()) throw Error(ErrorKind::DimensionMismatch, "quadratic problem: z has wrong length");
  }
};

struct FixedPointPair {
  Vec x_hat;
  Vec y_hat;
};

namespace detail {

// w = (αβI + A Vᵀ)⁻¹ z by LU.
inline Vec quadratic_weights(const Mat& A, const Mat& V, const Vec& z, double alpha, double beta,
                             ErrorKind singular_kind) {
  const Index m = A.rows();
  const Mat system = alpha * beta * Mat::Identity(m, m) + A * V.transpose();
  Eigen::PartialPivLU<Mat> lu(system);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14))
    throw Error(singular_kind, "alpha*beta*I + A V^T",
                "alpha*beta*I + A V^T is numerically singular (rcond " + std::to_string(rcond) + ")");
  Vec w = lu.solve(z);
  if (!w.allFinite()) throw Error(singular_kind, "alpha*beta*I + A V^T", "linear solve produced non-finite values");
  return w;
}

}  // namespace detail

/// x* = Aᵀ(αβI + AAᵀ)⁻¹z.
inline Vec quadratic_true_solution(const QuadraticProblem& prob) {
  prob.validate();
  const Vec w = detail::quadratic_weights(prob.A, prob.A, prob.z, prob.alpha, prob.beta, ErrorKind::SolveFailed);
  Vec x = prob.A.transpose() * w;
  const Vec normal_residual = prob.alpha * x + prob.A.transpose() * (prob.A * x - prob.z) / prob.beta;
  const double scale = 1.0 + prob.alpha * x.norm() + prob.A.norm() * (prob.A.norm() * x.norm() + prob.z.norm()) / prob.beta;
  if (!(normal_residual.norm() <= 1e-9 * scale))
    throw Error(ErrorKind::SolveFailed, "normal equations",
                "true solution residual " + std::to_string(normal_residual.norm()) + " too large");
  return x;
}

/// Saddle point (x*, y*) of the exact problem, y* = −α(αβI + AAᵀ)⁻¹z.
inline FixedPointPair quadratic_true_saddle(const QuadraticProblem& prob) {
  prob.validate();
  const Vec w = detail::quadratic_weights(prob.A, prob.A, prob.z, prob.alpha, prob.beta, ErrorKind::SolveFailed);
  return {prob.A.transpose() * w, -prob.alpha * w};
}

/// x̂ = Vᵀ(αβI + AVᵀ)⁻¹z, ŷ = −α(αβI + AVᵀ)⁻¹z; checks αx̂ + Vᵀŷ = 0 and
/// Ax̂ = βŷ + z.
inline FixedPointPair quadratic_mismatched_fixed_point(const QuadraticProblem& prob) {
  prob.validate();
  const Vec w =
      detail::quadratic_weights(prob.A, prob.V, prob.z, prob.alpha, prob.beta, ErrorKind::SingularSystem);
  FixedPointPair fp{prob.V.transpose() * w, -prob.alpha * w};
  const double r1 = (prob.alpha * fp.x_hat + prob.V.transpose() * fp.y_hat).norm();
  const double r2 = (prob.A * fp.x_hat - prob.beta * fp.y_hat - prob.z).norm();
  const double scale = 1.0 + fp.x_hat.norm() + fp.y_hat.norm() + prob.z.norm();
  if (!(r1 <= 1e-9 * scale && r2 <= 1e-9 * scale))
    throw Error(ErrorKind::SingularSystem, "fixed-point residual",
                "fixed-point relations violated (residuals " + std::to_string(r1) + ", " + std::to_string(r2) + ")");
  return fp;
}

/// The second printed form (αI + β⁻¹VᵀA)⁻¹(β⁻¹Vᵀz) of x̂.
inline Vec quadratic_fixed_point_primal_form(const QuadraticProblem& prob) {
  prob.validate();
  const Index n = prob.A.cols();
  const Mat system = prob.alpha * Mat::Identity(n, n) + prob.V.transpose() * prob.A / prob.beta;
  Eigen::PartialPivLU<Mat> lu(system);
  if (!(lu.rcond() > 1e-14))
    throw Error(ErrorKind::SingularSystem, "alpha*I + V^T A/beta", "alpha*I + V^T A/beta is numerically singular");
  return lu.solve(prob.V.transpose() * prob.z / prob.beta);
}

/// ‖(V − A)ᵀŷ‖/γ_G, bounding ‖x* − x̂‖.
inline double error_bound(double gamma_G, const LinearMap& A, const LinearMap& V, const Vec& y_hat) {
  require(gamma_G > 0.0, ErrorKind::InvalidParameter, "error_bound: gamma_G must be positive");
  return (V.apply_transpose(y_hat) - A.apply_transpose(y_hat)).norm() / gamma_G;
}

struct RateEstimate {
  double empirical_log_rate = 0.0;
  double r_squared = 0.0;
  double theoretical_log_rate = 0.0;
  int tail_start = 0;
  int n_points = 0;
};

/// Least-squares slope of log d_i² against i, where d_i is the trace's
/// distance to reference `ref_index`. Points at or below 1e-13, or within
/// 10× of the smallest recorded distance, are dropped; the fit uses the
/// last `tail_fraction` of the rest.
inline RateEstimate estimate_linear_rate(const RunTrace& trace, std::size_t ref_index, double omega,
                                         double tail_fraction = 0.5) {
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, ErrorKind::InvalidParameter,
          "estimate_linear_rate: tail_fraction must lie in (0, 1]");
  require(omega > 0.0, ErrorKind::InvalidParameter, "estimate_linear_rate: omega must be positive");
  std::vector<std::pair<int, double>> pts;
  double min_d = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) {
    if (ref_index >= r.dist.size())
      throw Error(ErrorKind::InsufficientData, "trace has no distance for the requested reference");
    const double d = r.dist[ref_index];
    if (std::isfinite(d) && d > 1e-13) {
      pts.emplace_back(r.iter, d);
      min_d = std::min(min_d, d);
    }
  }
  std::vector<std::pair<int, double>> kept;
  for (const auto& p : pts)
    if (p.second > 10.0 * min_d) kept.push_back(p);
  const std::size_t start = kept.size() - static_cast<std::size_t>(std::floor(tail_fraction * kept.size()));
  const std::size_t count = kept.size() - start;
  if (count < 10)
    throw Error(ErrorKind::InsufficientData, "tail",
                "need at least 10 tail points above the floor, have " + std::to_string(count));

  double mi = 0.0, ml = 0.0;
  for (std::size_t k = start; k < kept.size(); ++k) {
    mi += kept[k].first;
    ml += 2.0 * std::log(kept[k].second);
  }
  mi /= count;
  ml /= count;
  double sii = 0.0, sil = 0.0, sll = 0.0;
  for (std::size_t k = start; k < kept.size(); ++k) {
    const double di = kept[k].first - mi;
    const double dl = 2.0 * std::log(kept[k].second) - ml;
    sii += di * di;
    sil += di * dl;
    sll += dl * dl;
  }
  RateEstimate est;
  est.empirical_log_rate = sil / sii;
  est.r_squared = sll > 0.0 ? (sil * sil) / (sii * sll) : 1.0;
  est.theoretical_log_rate = std::log(omega);
  est.tail_start = kept[start].first;
  est.n_points = static_cast<int>(count);
  return est;
}

/// Seeded random quadratic instance: A standard normal rescaled to unit
/// spectral norm, E standard normal rescaled to ‖E‖ = mismatch_scale·‖A‖,
/// V = A + E, z standard normal.
inline QuadraticProblem random_quadratic(Index n, Index m, double alpha, double beta, double mismatch_scale,
                                         std::uint64_t seed) {
  require(n >= 1 && m >= 1, ErrorKind::InvalidParameter, "random_quadratic: n, m must be >= 1");
  require(alpha > 0.0 && beta > 0.0, ErrorKind::InvalidParameter, "random_quadratic: alpha, beta must be positive");
  require(mismatch_scale >= 0.0, ErrorKind::InvalidParameter, "random_quadratic: mismatch_scale must be >= 0");
  Rng rng(mix_seed(seed));
  QuadraticProblem q;
  q.alpha = alpha;
  q.beta = beta;
  Mat A = gaussian_matrix(m, n, rng);
  A /= estimate_operator_norm(dense_map(A), 1e-13, 100000, seed).value;
  Mat E = gaussian_matrix(m, n, rng);
  const double e_norm = estimate_operator_norm(dense_map(E), 1e-13, 100000, seed + 1).value;
  const double a_norm = estimate_operator_norm(dense_map(A), 1e-13, 100000, seed).value;
  E *= mismatch_scale * a_norm / e_norm;
  q.z = gaussian_vector(m, rng);
  q.V = A + E;
  q.A = std::move(A);
  return q;
}

struct Theorem11Instance {
  std::uint64_t seed = 0;
  double actual = 0.0;
  double bound = 0.0;
  bool singular = false;
};

struct Theorem11Report {
  int instances = 0;
  int violations = 0;
  int singular = 0;
  double max_ratio = 0.0;  // max actual/bound over instances with bound > 0
  std::vector<Theorem11Instance> entries;
  bool holds() const { return violations == 0; }
};

/// Checks ‖x* − x̂‖ ≤ ‖(V−A)ᵀŷ‖/α on seeded random instances.
inline Theorem11Report verify_theorem11_on_random(Index n, Index m, double alpha, double beta, double mismatch_scale,
                                                  int n_instances, std::uint64_t seed) {
  require(n_instances >= 1, ErrorKind::InvalidParameter, "verify_theorem11_on_random: n_instances must be >= 1");
  Theorem11Report report;
  report.instances = n_instances;
  for (int k = 0; k < n_instances; ++k) {
    Theorem11Instance inst;
    inst.seed = mix_seed(seed, static_cast<std::uint64_t>(k));
    const QuadraticProblem q = random_quadratic(n, m, alpha, beta, mismatch_scale, inst.seed);
    try {
      const Vec x_star = quadratic_true_solution(q);
      const FixedPointPair fp = quadratic_mismatched_fixed_point(q);
      inst.actual = (x_star - fp.x_hat).norm();
      inst.bound = error_bound(alpha, dense_map(q.A), dense_map(q.V), fp.y_hat);
      if (inst.actual > inst.bound * (1.0 + 1e-10)) ++report.violations;
      if (inst.bound > 0.0) report.max_ratio = std::max(report.max_ratio, inst.actual / inst.bound);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularSystem) throw;
      inst.singular = true;
      ++report.singular;
    }
    report.entries.push_back(inst);
  }
  return report;
}

}  // namespace cpmm
