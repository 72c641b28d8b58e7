// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "cpmm/cpmm.hpp"

using namespace cpmm;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Outcome ac1_scalar_fixed_point() {
  Outcome o;
  QuadraticProblem q;
  q.A = Mat::Constant(1, 1, 1.0);
  q.V = Mat::Constant(1, 1, 0.5);
  q.z = Vec::Constant(1, 2.0);
  const FixedPointPair fp = quadratic_mismatched_fixed_point(q);
  // Oracle: x̂ = 0.5·2/1.5, ŷ = −2/1.5.
  o.check(std::abs(fp.x_hat[0] - 2.0 / 3.0) <= 1e-15, "x_hat " + fmt(fp.x_hat[0]));
  o.check(std::abs(fp.y_hat[0] + 4.0 / 3.0) <= 1e-15, "y_hat " + fmt(fp.y_hat[0]));

  const SaddleProblem prob(prox_scaled_sqnorm(1.0, 1), prox_quadratic_dual(1.0, q.z), dense_map(q.A), dense_map(q.V));
  const StepPlan plan = plan_thm32(prob.conv(), 0.01, NormData{0.5, 0.5});
  SolveOptions opt;
  opt.max_iter = 2000;
  opt.rel_tol = 1e-300;
  int reached = -1;
  opt.observer = [&](const IterateState& s) {
    if (reached < 0 && joint_norm(s.x - fp.x_hat, s.y - fp.y_hat) <= 1e-8) reached = s.iter;
  };
  solve(prob, plan, Vec::Zero(1), Vec::Zero(1), opt);
  o.check(reached > 0, "not within 1e-8 after 2000 iterations");
  o.detail = o.detail.empty() ? "within 1e-8 at iteration " + std::to_string(reached) : o.detail;
  return o;
}

Outcome ac2_desk_quadratic() {
  Outcome o;
  const Scenario sc = build_quadratic(100, 50, 0.15, 1.0, 0.05, 0);
  const StepPlan plan = plan_thm32(sc.problem.conv(), 0.01, sc.norms);
  SolveOptions opt;
  opt.max_iter = 1000;
  opt.rel_tol = 1e-13;
  opt.references = sc.references;
  const RunTrace t = solve(sc.problem, plan, sc.x0, sc.y0, opt);
  const RateEstimate rate = estimate_linear_rate(t, 0, plan.omega);
  o.check(rate.r_squared >= 0.99, "R^2 " + fmt(rate.r_squared));
  o.check(rate.empirical_log_rate <= rate.theoretical_log_rate + 1e-3,
          "slope " + fmt(rate.empirical_log_rate) + " > log omega " + fmt(rate.theoretical_log_rate));
  const Vec& x_star = sc.references[1].x;
  const double err = (t.final_state.x - x_star).norm();
  const double bound = error_bound(sc.problem.conv().gamma_G, sc.problem.forward, sc.problem.surrogate,
                                   *sc.references[0].y);
  o.check(err <= bound * (1.0 + 1e-10), "|x - x*| " + fmt(err) + " > bound " + fmt(bound));
  if (o.ok)
    o.detail = "R^2 " + fmt(rate.r_squared) + ", slope " + fmt(rate.empirical_log_rate) + " <= log omega " +
               fmt(rate.theoretical_log_rate) + ", |x - x*| " + fmt(err) + " <= " + fmt(bound);
  return o;
}

Outcome ac3_error_bound_suite() {
  Outcome o;
  const Theorem11Report r = verify_theorem11_on_random(20, 10, 0.15, 1.0, 0.05, 100, 0);
  o.check(r.violations == 0, std::to_string(r.violations) + " violations");
  o.check(r.singular == 0, std::to_string(r.singular) + " singular instances");
  if (o.ok) o.detail = "100 instances, 0 violations, max actual/bound " + fmt(r.max_ratio);
  return o;
}

Outcome ac4_counterexample() {
  Outcome o;
  const ExperimentConfig cfg;
  const Index n = cfg.cx_n;
  const Scenario sc = build_l1_counterexample(n, cfg.alpha_mm, cfg.cx_tau, cfg.cx_sigma, Vec::Ones(n), Vec::Ones(n));
  const StepPlan& plan = *sc.plan_hint.manual;
  const double expected = cfg.alpha_mm * cfg.cx_tau;
  IterateState s = initial_state(sc.x0, sc.y0);
  bool increasing = true;
  double max_dev = 0.0;
  int saturated_steps = 0;
  for (int i = 0; i < 1000; ++i) {
    const IterateState next = step_mismatched(s, plan, sc.problem);
    increasing = increasing && (next.x.array() > s.x.array()).all();
    if ((s.y.array() == 1.0).all()) {
      max_dev = std::max(max_dev, ((next.x - s.x).array() - expected).abs().maxCoeff());
      ++saturated_steps;
    }
    s = next;
  }
  o.check(increasing, "primal entries not strictly increasing");
  o.check(saturated_steps > 0, "dual never saturated");
  o.check(max_dev <= 1e-12, "increment deviation " + fmt(max_dev));
  if (o.ok)
    o.detail = "1000 strict increases, " + std::to_string(saturated_steps) + " saturated steps, increment dev " +
               fmt(max_dev);
  return o;
}

Outcome ac5_accelerated_divergence() {
  Outcome o;
  const ExperimentConfig cfg;
  const Scenario sc = build_divergence_example(cfg.z, cfg.tau0, cfg.sigma0);
  AccelState s = *sc.accel;
  double max_y_dev = 0.0;
  bool tau_ok = true, norm_increasing = true;
  double norm_100 = 0.0, prev_norm = s.x.norm();
  for (int i = 1; i <= 10000; ++i) {
    const AccelState next = step_accelerated(s, sc.problem);
    max_y_dev = std::max(max_y_dev, std::abs(next.y[0] + cfg.z));
    // next.tau is τ_i.
    tau_ok = tau_ok && next.tau >= 1.0 / (i + 1.0 / cfg.tau0);
    const double nx = next.x.norm();
    norm_increasing = norm_increasing && nx > prev_norm;
    prev_norm = nx;
    if (i == 100) norm_100 = nx;
    s = next;
  }
  o.check(max_y_dev <= 1e-12, "y deviation " + fmt(max_y_dev));
  o.check(tau_ok, "tau_i < 1/(i + 1/tau0)");
  o.check(norm_increasing, "|x^n| not strictly increasing");
  o.check(prev_norm > 1.5 * norm_100, "|x^10000| " + fmt(prev_norm) + " vs |x^100| " + fmt(norm_100));
  if (o.ok) o.detail = "|x^100| " + fmt(norm_100) + ", |x^10000| " + fmt(prev_norm) + ", y dev " + fmt(max_y_dev);
  return o;
}

Outcome ac6_zero_mismatch_reduction() {
  Outcome o;
  const Scenario sc = build_quadratic(100, 50, 0.15, 1.0, 0.05, 0);
  const SaddleProblem same(sc.problem.prox_G, sc.problem.prox_Fstar, sc.problem.forward, sc.problem.forward);
  const StepPlan plan = plan_classical(sc.problem.conv(), 0.01, estimate_operator_norm(sc.problem.forward, 1e-12));
  IterateState a = initial_state(sc.x0, sc.y0), b = a;
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    a = step_mismatched(a, plan, same);
    b = step_classical(b, plan, sc.problem);
    if (!((a.x.array() == b.x.array()).all() && (a.y.array() == b.y.array()).all())) ++mismatches;
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " iterates differ");
  if (o.ok) o.detail = "500 iterates bit-identical";
  return o;
}

Outcome ac7_certificate_fuzz() {
  Outcome o;
  std::mt19937_64 rng(mix_seed(7));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int passed = 0, rejected = 0;
  for (int k = 0; k < 50; ++k) {
    const ConvexityData conv{std::pow(10.0, -2.0 + 4.0 * u(rng)), std::pow(10.0, -2.0 + 4.0 * u(rng))};
    const double gg = conv.gamma_G * conv.gamma_Fstar;
    NormData norms{std::pow(10.0, -1.0 + 2.0 * u(rng)), std::sqrt((0.01 + 0.98 * u(rng)) * gg / 2.0)};
    const double kappa = 0.01 + 0.98 * u(rng);
    const double d2 = norms.norm_AmV * norms.norm_AmV;
    const double kappa33 =
        std::min({kappa, 0.5, 1.0 - 2.0 * d2 / gg, d2 / norms.norm_V * std::sqrt(2.0 / gg)});
    const CertificateReport r32 = verify_certificate(plan_thm32(conv, kappa, norms), norms, conv, 1000);
    const CertificateReport r33 = verify_certificate(plan_cor33(conv, kappa33, norms), norms, conv, 1000);
    passed += r32.passed && r33.passed;
    if (!r32.passed) o.check(false, "thm32 tuple " + std::to_string(k) + ": " + r32.first_violation->condition);
    if (!r33.passed) o.check(false, "cor33 tuple " + std::to_string(k) + ": " + r33.first_violation->condition);

    NormData bad = norms;
    bad.norm_AmV = std::sqrt((1.0 + 3.0 * u(rng)) * gg / 2.0);
    for (int which = 0; which < 2; ++which) {
      try {
        if (which == 0)
          plan_thm32(conv, kappa, bad);
        else
          plan_cor33(conv, kappa, bad);
        o.check(false, "infeasible tuple " + std::to_string(k) + " accepted");
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::PreconditionViolated)
          ++rejected;
        else
          o.check(false, "infeasible tuple " + std::to_string(k) + " raised " + std::string(to_string(e.kind())));
      }
    }
  }
  if (o.ok)
    o.detail = std::to_string(passed) + "/50 feasible tuples certified, " + std::to_string(rejected) +
               "/100 infeasible plans rejected";
  return o;
}

Outcome ac8_q_obstruction() {
  Outcome o;
  std::mt19937_64 rng(mix_seed(8));
  std::uniform_real_distribution<double> u(0.1, 2.0);
  int not_psd = 0;
  for (int k = 0; k < 20; ++k) {
    const ConvexityData conv{u(rng), u(rng)};
    const NormData norms{u(rng), 0.5 * u(rng)};
    const bool pin_G = k % 2 == 0;
    const double mu_G = pin_G ? conv.gamma_G : 0.5 * conv.gamma_G;
    const double mu_F = pin_G ? 0.5 * conv.gamma_Fstar : conv.gamma_Fstar;
    const double eta_i = u(rng), eta_ip1 = eta_i * (1.0 + u(rng));
    const QCheck q = check_q_psd(conv, mu_G, mu_F, norms, eta_i, eta_ip1, 5.0 + u(rng), 5.0 + u(rng));
    // Oracle: general (nonsymmetric) dense eigensolver on the same matrix.
    const Eigen::EigenSolver<Eigen::Matrix4d> es(q.matrix);
    const double oracle = es.eigenvalues().real().minCoeff();
    o.check(oracle < -1e-10, "config " + std::to_string(k) + " oracle min eigenvalue " + fmt(oracle));
    o.check(std::abs(oracle - q.min_eigenvalue) <= 1e-10, "config " + std::to_string(k) + " eigenvalue mismatch");
    not_psd += !q.is_psd;
  }
  o.check(not_psd == 20, std::to_string(not_psd) + "/20 reported not PSD");
  if (o.ok) o.detail = "20/20 configurations not PSD, eigensolver agrees";
  return o;
}

Outcome ac9_ct() {
  Outcome o;
  ExperimentConfig cfg;
  cfg.experiment = "ct";
  cfg = resolve_config(cfg);
  std::ostringstream summary;
  for (const double l1 : {0.6, 1.2, 2.4}) {
    CtParams prm;
    prm.lambda1 = l1;
    const Scenario sc = build_tv_ct(prm);
    const CtData& ct = *sc.ct;
    const std::string tag = "lambda1=" + fmt(l1) + ": ";
    const double cross = adjointness_defect(with_transpose_of(ct.radon_strip, ct.radon_line));
    const double own = std::max(adjointness_defect(ct.radon_strip), adjointness_defect(ct.radon_line));
    o.check(cross > 1e-6, tag + "cross defect " + fmt(cross));
    o.check(own <= 1e-10, tag + "own defect " + fmt(own));
    o.check(!sc.precondition.message.empty(), tag + "precondition not reported");

    const ConvexityData conv = sc.problem.conv();
    double final_obj[2] = {0.0, 0.0};
    for (const bool matched : {true, false}) {
      const SaddleProblem prob = matched ? matched_problem(sc.problem) : sc.problem;
      const NormData norms = matched ? NormData{ct.norm_A, 0.0} : sc.norms;
      const StepPlan plan = detail::ct_plan(cfg, conv, norms).first;
      SolveOptions opt;
      opt.max_iter = 5000;
      opt.rel_tol = cfg.rel_tol;
      opt.objective = sc.primal_objective;
      const RunTrace t = solve(prob, plan, sc.x0, sc.y0, opt);
      final_obj[matched ? 0 : 1] = t.records.back().objective;
      if (!matched) {
        int first = -1;
        for (const auto& r : t.records)
          if (first < 0 && r.residual < 1e-4) first = r.iter;
        o.check(first > 0, tag + "mismatched residual never below 1e-4");
        summary << (summary.tellp() == 0 ? "" : "; ") << tag << "residual < 1e-4 at " << first << ", ";
      } else {
        int increases = 0;
        const auto& rec = t.records;
        for (std::size_t k = rec.size() / 2 + 1; k < rec.size(); ++k)
          if (rec[k].objective > rec[k - 1].objective + 1e-8)
            ++increases;
        o.check(increases == 0, tag + std::to_string(increases) + " objective increases in matched tail");
      }
    }
    o.check(final_obj[0] <= final_obj[1],
            tag + "matched objective " + fmt(final_obj[0]) + " > mismatched " + fmt(final_obj[1]));
    summary << "objectives " << fmt(final_obj[0]) << " <= " << fmt(final_obj[1]);
  }
  if (o.ok) o.detail = summary.str();
  return o;
}

Outcome ac10_operator_prox_invariants() {
  Outcome o;
  std::mt19937_64 rng(mix_seed(10));
  // Power method vs dense symmetric eigendecomposition of MᵀM.
  for (int k = 0; k < 10; ++k) {
    Rng g(mix_seed(10, static_cast<std::uint64_t>(k)));
    const Mat m = gaussian_matrix(15 + k, 12, g);
    const Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
    const double oracle = std::sqrt(es.eigenvalues().maxCoeff());
    const double est = estimate_operator_norm(dense_map(m), 1e-13, 100000, static_cast<std::uint64_t>(k)).value;
    o.check(std::abs(est - oracle) <= 1e-6 * oracle, "power method off by " + fmt(std::abs(est - oracle) / oracle));
  }
  const LinearMap grad = gradient_op(64, 64);
  o.check(estimate_operator_norm(grad, 1e-10).value <= std::sqrt(8.0), "|grad| > sqrt 8");
  o.check(adjointness_defect(grad) <= 1e-12, "gradient adjointness defect");
  const SinogramGeometry geom{20, 90, 1.0, 1.0};
  o.check(adjointness_defect(radon_strip(geom, 64, 64)) <= 1e-10, "strip adjointness defect");
  o.check(adjointness_defect(radon_line(geom, 64, 64)) <= 1e-10, "line adjointness defect");

  Rng g(mix_seed(11));
  const Vec z = gaussian_vector(8, g);
  const std::vector<ProxFn> proxes{prox_scaled_sqnorm(0.4, 8), prox_quadratic_dual(1.3, z), prox_box_indicator(0.5, 8),
                                   prox_huber_tv_dual(0.7, 0.2, FieldShape{2, 2}),
                                   prox_ct_dual_block(1.0, z.head(4), 0.9, 0.05, FieldShape{1, 2})};
  std::uniform_real_distribution<double> step(0.1, 5.0);
  int trials = 0;
  for (const ProxFn& f : proxes)
    for (int k = 0; k < 50; ++k) {
      const Vec a = 3.0 * gaussian_vector(f.dim(), g), b = 3.0 * gaussian_vector(f.dim(), g);
      const double t = step(rng);
      const double factor = 1.0 / (1.0 + t * f.strong_convexity());
      const double out = (f(a, t) - f(b, t)).norm(), in = (a - b).norm();
      o.check(out <= factor * in * (1.0 + 1e-12), f.name() + " contraction violated");
      ++trials;
    }
  if (o.ok) o.detail = "power method, adjointness, |grad|, " + std::to_string(trials) + " prox contraction trials";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "closed-form scalar fixed point", 1.0, ac1_scalar_fixed_point},
      {"AC2", "desk-scale quadratic rate and error bound", 30.0, ac2_desk_quadratic},
      {"AC3", "random error-bound suite", 10.0, ac3_error_bound_suite},
      {"AC4", "box-constrained counterexample", 1.0, ac4_counterexample},
      {"AC5", "accelerated divergence", 5.0, ac5_accelerated_divergence},
      {"AC6", "zero-mismatch reduction", 30.0, ac6_zero_mismatch_reduction},
      {"AC7", "certificate fuzzing", 60.0, ac7_certificate_fuzz},
      {"AC8", "Q-matrix obstruction", 5.0, ac8_q_obstruction},
      {"AC9", "CT desk scale", 300.0, ac9_ct},
      {"AC10", "operator and prox invariants", 30.0, ac10_operator_prox_invariants},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.ok = false;
      o.detail += "; runtime " + fmt(secs) + " s exceeds " + fmt(c.budget_s) + " s";
    }
    std::printf("%s %s: %s (%.2f s) %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
