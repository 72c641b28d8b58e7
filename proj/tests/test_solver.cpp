#include <gtest/gtest.h>

#include <sstream>

#include "cpmm/scenarios.hpp"

using namespace cpmm;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double e : v) out[k++] = e;
  return out;
}

Scenario small_quadratic(std::uint64_t seed = 3) { return build_quadratic(12, 8, 0.15, 1.0, 0.05, seed); }

StepPlan thm32_for(const Scenario& sc) { return plan_thm32(sc.problem.conv(), 0.01, sc.norms); }

}  // namespace

TEST(StepMismatched, MatchedBoxIterationByHand) {
  const Index n = 3;
  const double tau = 0.3, sigma = 0.4;
  const SaddleProblem prob(prox_zero(n), prox_box_indicator(1.0, n), identity_map(n), identity_map(n));
  const StepPlan plan = manual_plan(tau, sigma, 1.0);
  IterateState s = initial_state(vec({0.5, -0.2, 2.0}), vec({0.1, 0.9, -0.3}));
  Vec x = s.x, y = s.y;
  for (int i = 0; i < 30; ++i) {
    s = step_mismatched(s, plan, prob);
    const Vec xp = x - tau * y;
    y = (y + sigma * (2.0 * xp - x)).cwiseMax(-1.0).cwiseMin(1.0);
    x = xp;
    EXPECT_LT((s.x - x).norm(), 1e-14);
    EXPECT_LT((s.y - y).norm(), 1e-14);
  }
  EXPECT_EQ(s.iter, 30);
}

TEST(StepMismatched, FixedPointIsStationary) {
  const Scenario sc = small_quadratic();
  const StepPlan plan = thm32_for(sc);
  const Reference& fp = sc.references[0];
  IterateState s = initial_state(fp.x, *fp.y);
  const IterateState next = step_mismatched(s, plan, sc.problem);
  const double scale = 1.0 + joint_norm(fp.x, *fp.y);
  EXPECT_LE(joint_norm(next.x - fp.x, next.y - *fp.y), 1e-9 * scale);
}

TEST(StepMismatched, ZeroDataStaysZero) {
  const SaddleProblem prob(prox_scaled_sqnorm(1.0, 2), prox_quadratic_dual(1.0, Vec::Zero(3)),
                           dense_map(Mat::Ones(3, 2)), dense_map(Mat::Identity(3, 2)));
  const IterateState s = step_mismatched(initial_state(Vec::Zero(2), Vec::Zero(3)), manual_plan(1, 1, 1), prob);
  EXPECT_EQ(s.x, Vec::Zero(2));
  EXPECT_EQ(s.y, Vec::Zero(3));
}

TEST(StepMismatched, OneForwardAndOneSurrogateTransposePerStep) {
  const Scenario sc = small_quadratic();
  auto a_counts = std::make_shared<CallCounts>();
  auto v_counts = std::make_shared<CallCounts>();
  const SaddleProblem prob(sc.problem.prox_G, sc.problem.prox_Fstar, counted(sc.problem.forward, a_counts),
                           counted(sc.problem.surrogate, v_counts));
  SolveOptions opt;
  opt.max_iter = 37;
  opt.rel_tol = 1e-300;
  const RunTrace t = solve(prob, thm32_for(sc), sc.x0, sc.y0, opt);
  ASSERT_EQ(t.records.size(), 37u);
  EXPECT_EQ(a_counts->apply.load(), 37);
  EXPECT_EQ(a_counts->apply_transpose.load(), 0);
  EXPECT_EQ(v_counts->apply.load(), 0);
  EXPECT_EQ(v_counts->apply_transpose.load(), 37);
}

TEST(StepMismatched, NonFiniteIterateIsReported) {
  const SaddleProblem prob(prox_zero(1), prox_zero(1), identity_map(1), identity_map(1));
  try {
    step_mismatched(initial_state(vec({1e308}), vec({-1e308})), manual_plan(10.0, 1.0, 1.0), prob);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteIterate);
  }
}

TEST(Solve, ConvergesToClosedFormFixedPoint) {
  const Scenario sc = build_quadratic(100, 50, 0.15, 1.0, 0.05, 0);
  const StepPlan plan = thm32_for(sc);
  SolveOptions opt;
  opt.max_iter = 5000;
  opt.rel_tol = 1e-14;
  opt.references = sc.references;
  const RunTrace t = solve(sc.problem, plan, sc.x0, sc.y0, opt);
  const Vec& x_hat = sc.references[0].x;
  EXPECT_LE((t.final_state.x - x_hat).norm(), 1e-8 * x_hat.norm());
  EXPECT_EQ(t.reference_names, (std::vector<std::string>{"fixed_point", "true_solution"}));
}

TEST(Solve, HugeToleranceStopsAfterOneIteration) {
  const Scenario sc = small_quadratic();
  SolveOptions opt;
  opt.rel_tol = 1e6;
  const RunTrace t = solve(sc.problem, thm32_for(sc), sc.x0, sc.y0, opt);
  EXPECT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.termination, Termination::converged);
}

TEST(Solve, CounterexampleRunsToMaxIterWithIncreasingEntries) {
  const Vec ones = Vec::Ones(4);
  const Scenario sc = build_l1_counterexample(4, 0.5, 0.3, 0.4, ones, ones);
  SolveOptions opt;
  opt.max_iter = 200;
  opt.rel_tol = 1e-300;
  Vec last = sc.x0;
  bool increasing = true;
  opt.observer = [&](const IterateState& s) {
    increasing = increasing && (s.x.array() > last.array()).all();
    last = s.x;
  };
  const RunTrace t = solve(sc.problem, *sc.plan_hint.manual, sc.x0, sc.y0, opt);
  EXPECT_EQ(t.termination, Termination::max_iter);
  EXPECT_TRUE(increasing);
}

TEST(Solve, ZeroMismatchBitIdenticalToClassical) {
  const Scenario sc = small_quadratic(5);
  const SaddleProblem same(sc.problem.prox_G, sc.problem.prox_Fstar, sc.problem.forward, sc.problem.forward);
  const StepPlan plan = plan_classical(sc.problem.conv(), 0.01, estimate_operator_norm(sc.problem.forward, 1e-12));
  SolveOptions opt;
  opt.max_iter = 500;
  opt.rel_tol = 1e-300;
  opt.references = sc.references;
  const RunTrace mm = solve(same, plan, sc.x0, sc.y0, opt);
  opt.classical = true;
  const RunTrace cl = solve(sc.problem, plan, sc.x0, sc.y0, opt);
  ASSERT_EQ(mm.records.size(), cl.records.size());
  for (std::size_t k = 0; k < mm.records.size(); ++k) {
    ASSERT_EQ(mm.records[k].residual, cl.records[k].residual) << k;
    ASSERT_EQ(mm.records[k].dist, cl.records[k].dist) << k;
  }
  EXPECT_TRUE((mm.final_state.x.array() == cl.final_state.x.array()).all());
  EXPECT_TRUE((mm.final_state.y.array() == cl.final_state.y.array()).all());
}

TEST(Solve, ClassicalStepMatchesHandWrittenIteration) {
  const Scenario sc = small_quadratic(6);
  const QuadraticProblem& q = *sc.quadratic;
  const StepPlan plan = plan_classical(sc.problem.conv(), 0.1, 1.0);
  IterateState s = initial_state(sc.x0, sc.y0);
  Vec x = sc.x0, y = sc.y0;
  for (int i = 0; i < 50; ++i) {
    s = step_classical(s, plan, sc.problem);
    const Vec xp = (x - plan.tau * q.A.transpose() * y) / (1.0 + plan.tau * q.alpha);
    const Vec xb = xp + plan.omega * (xp - x);
    y = (y + plan.sigma * q.A * xb - plan.sigma * q.z) / (1.0 + plan.sigma * q.beta);
    x = xp;
  }
  EXPECT_LT((s.x - x).norm(), 1e-12);
  EXPECT_LT((s.y - y).norm(), 1e-12);
}

TEST(Solve, ObjectiveRecordedOnSchedule) {
  const Scenario sc = small_quadratic();
  SolveOptions opt;
  opt.max_iter = 10;
  opt.rel_tol = 1e-300;
  opt.objective = sc.primal_objective;
  opt.objective_every = 3;
  const RunTrace t = solve(sc.problem, thm32_for(sc), sc.x0, sc.y0, opt);
  int recorded = 0;
  for (const auto& r : t.records) recorded += !std::isnan(r.objective);
  EXPECT_GE(recorded, 3);
  EXPECT_LT(recorded, 10);
  EXPECT_FALSE(std::isnan(t.records.back().objective));
}

TEST(Solve, RejectsBadOptions) {
  const Scenario sc = small_quadratic();
  SolveOptions opt;
  opt.rel_tol = 0.0;
  EXPECT_THROW(solve(sc.problem, thm32_for(sc), sc.x0, sc.y0, opt), Error);
  opt.rel_tol = 1e-8;
  opt.max_iter = 0;
  EXPECT_THROW(solve(sc.problem, thm32_for(sc), sc.x0, sc.y0, opt), Error);
  opt.max_iter = 5;
  opt.references = {Reference{"bad", Vec::Zero(3), std::nullopt}};
  EXPECT_THROW(solve(sc.problem, thm32_for(sc), sc.x0, sc.y0, opt), Error);
}

TEST(Solve, DivergenceKeepsPartialTrace) {
  // Growth by a factor 10 per step overflows after ~300 steps.
  const SaddleProblem prob(prox_zero(1), prox_zero(1), identity_map(1), identity_map(1, -1.0));
  SolveOptions opt;
  opt.max_iter = 10000;
  opt.rel_tol = 1e-300;
  try {
    solve(prob, manual_plan(3.0, 3.0, 1.0), vec({1.0}), vec({1.0}), opt);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteIterate);
    EXPECT_EQ(e.trace().termination, Termination::diverged);
    EXPECT_GT(e.trace().records.size(), 10u);
    EXPECT_TRUE(e.trace().final_state.x.allFinite());
  }
}

TEST(Accelerated, DivergenceExampleByRecursion) {
  const double z = 1.0, tau0 = 0.5, sigma0 = 0.5;
  const Scenario sc = build_divergence_example(z, tau0, sigma0);
  AccelState s = *sc.accel;
  const Vec vtz = vec({z, -z});
  Vec x_sum = Vec::Zero(2);
  double tau = tau0;
  for (int i = 0; i < 2000; ++i) {
    const AccelState next = step_accelerated(s, sc.problem);
    x_sum += tau * vtz;
    EXPECT_NEAR(next.y[0], -z, 1e-12);
    EXPECT_LT((next.x - x_sum).norm(), 1e-10 * (1.0 + x_sum.norm()));
    EXPECT_LE(1.0 / next.tau, 1.0 + 1.0 / s.tau + 1e-12);
    EXPECT_LT(next.tau, s.tau);
    EXPECT_GT(next.sigma, s.sigma);
    tau = next.tau;
    s = next;
  }
}

TEST(Accelerated, ZeroDataIsStationary) {
  const Scenario sc = build_divergence_example(0.0, 0.5, 0.5);
  const RunTrace t = solve_accelerated(sc.problem, *sc.accel, 500);
  EXPECT_EQ(t.final_state.x, Vec::Zero(2));
  EXPECT_EQ(t.final_state.y, Vec::Zero(1));
}

TEST(Accelerated, RejectsNonPositiveGamma) {
  const Scenario sc = build_divergence_example(1.0, 0.5, 0.5);
  AccelState s = *sc.accel;
  s.gamma = 0.0;
  EXPECT_THROW(step_accelerated(s, sc.problem), Error);
}

TEST(Export, TraceCsvHeaderAndRows) {
  const Scenario sc = small_quadratic();
  SolveOptions opt;
  opt.max_iter = 3;
  opt.rel_tol = 1e-300;
  opt.references = sc.references;
  const RunTrace t = solve(sc.problem, thm32_for(sc), sc.x0, sc.y0, opt);
  std::ostringstream os;
  write_trace_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,residual,dist_to_ref1,dist_to_ref2,objective");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
  }
  EXPECT_EQ(rows, 3);
  const nlohmann::json j = trace_to_json(t);
  EXPECT_EQ(j["iterations"], 3);
  EXPECT_EQ(j["termination"], "max_iter");
}

TEST(Export, FormatDoubleRoundTrips) {
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}
