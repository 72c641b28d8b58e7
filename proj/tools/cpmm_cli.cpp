// Experiment runner: one subcommand per experiment, flags mirror
// ExperimentConfig, `--config FILE` reads a file written by a previous run.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpmm/experiments.hpp"

namespace {

struct Bindings {
  CLI::App* sub = nullptr;
  std::string tag;
};

void add_common(CLI::App* sub, cpmm::ExperimentConfig& cfg) {
  sub->add_option("--out", cfg.out_dir, "Output directory");
  sub->add_option("--seed", cfg.seed, "Random seed");
  sub->add_option("--max-iter", cfg.max_iter, "Iteration cap (0 = experiment default)");
  sub->add_option("--rel-tol", cfg.rel_tol, "Relative stopping tolerance (0 = experiment default)");
  sub->add_option("--planner", cfg.planner, "auto, thm32, cor33, thm31, classical or manual")
      ->check(CLI::IsMember({"auto", "thm32", "cor33", "thm31", "classical", "manual"}));
  sub->add_option("--kappa", cfg.kappa, "Stepsize safety parameter in (0, 1)");
  sub->add_option("--tau", cfg.tau, "Override primal step");
  sub->add_option("--sigma", cfg.sigma, "Override dual step");
  sub->add_option("--omega", cfg.omega, "Override extrapolation weight");
  sub->add_option("--certificate-iters", cfg.certificate_iters, "Certificate steps to verify");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual experiments with a mismatched adjoint"};
  app.set_config("--config", "", "Config file (TOML section named after the experiment)");
  app.require_subcommand(0, 1);

  cpmm::ExperimentConfig cfg;
  std::vector<Bindings> subs;
  app.add_option("--out", cfg.out_dir, "Output directory (when the experiment comes from --config)");

  auto* quad = app.add_subcommand("quadratic", "Random quadratic problem with V = A + E");
  add_common(quad, cfg);
  quad->add_option("--n", cfg.n, "Primal dimension");
  quad->add_option("--m", cfg.m, "Dual dimension");
  quad->add_option("--alpha", cfg.alpha, "Primal strong convexity");
  quad->add_option("--beta", cfg.beta, "Dual strong convexity");
  quad->add_option("--mismatch-scale", cfg.mismatch_scale, "|E| / |A|");
  quad->add_flag("--allow-infeasible", cfg.allow_infeasible, "Run even if gG*gF <= 2|A-V|^2");
  subs.push_back({quad, "quadratic"});

  auto* cx = app.add_subcommand("counterexample", "A = I, V = -alpha I with a box-constrained dual");
  add_common(cx, cfg);
  cx->add_option("--n", cfg.cx_n, "Dimension");
  cx->add_option("--alpha-mm", cfg.alpha_mm, "Surrogate scale");
  cx->add_option("--step-tau", cfg.cx_tau, "Primal step");
  cx->add_option("--step-sigma", cfg.cx_sigma, "Dual step");
  cx->add_option("--x0", cfg.cx_x0, "Initial primal entries");
  cx->add_option("--y0", cfg.cx_y0, "Initial dual entries");
  subs.push_back({cx, "counterexample"});

  auto* dv = app.add_subcommand("divergence", "Accelerated steps with A = (1 1), V = (1 -1)");
  add_common(dv, cfg);
  dv->add_option("--z", cfg.z, "Data value");
  dv->add_option("--tau0", cfg.tau0, "Initial primal step");
  dv->add_option("--sigma0", cfg.sigma0, "Initial dual step");
  subs.push_back({dv, "divergence"});

  auto* ct = app.add_subcommand("ct", "TV-regularized tomography, matched vs mismatched projectors");
  add_common(ct, cfg);
  ct->add_option("--rows", cfg.rows, "Image rows");
  ct->add_option("--cols", cfg.cols, "Image columns");
  ct->add_option("--angles", cfg.n_angles, "Projection angles");
  ct->add_option("--bins", cfg.n_bins, "Detector bins");
  ct->add_option("--lambda0", cfg.lambda0, "Data term weight");
  ct->add_option("--lambda1", cfg.lambda1, "TV weights (one run pair per value)")->delimiter(',');
  ct->add_option("--lambda2", cfg.lambda2, "Tikhonov weight");
  ct->add_option("--eps", cfg.eps, "Huber smoothing of the TV dual");
  ct->add_option("--noise-rel", cfg.noise_rel, "Relative Gaussian noise level");
  ct->add_option("--step-ratio", cfg.step_ratio, "sigma/tau for the classical fallback plan");
  ct->add_flag("--strict", cfg.strict, "Fail if gG*gF <= 2|A-V|^2");
  subs.push_back({ct, "ct"});

  auto* cert = app.add_subcommand("certify", "Plan stepsizes and verify the step-length certificate");
  add_common(cert, cfg);
  cert->add_option("--gamma-g", cfg.gamma_G, "Strong convexity of G");
  cert->add_option("--gamma-fstar", cfg.gamma_Fstar, "Strong convexity of F*");
  cert->add_option("--norm-v", cfg.norm_V, "|V|");
  cert->add_option("--norm-amv", cfg.norm_AmV, "|A - V|");
  subs.push_back({cert, "certify"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  // Without a subcommand on the command line, take the one whose section
  // the config file filled.
  const Bindings* chosen = nullptr;
  for (const auto& b : subs)
    if (b.sub->parsed()) chosen = &b;
  if (!chosen) {
    for (const auto& b : subs) {
      bool any = false;
      for (const CLI::Option* opt : b.sub->get_options())
        if (opt->count() > 0) any = true;
      if (any) {
        if (chosen) {
          std::cerr << "config file names more than one experiment\n";
          return 1;
        }
        chosen = &b;
      }
    }
  }
  if (!chosen) {
    std::cerr << app.help();
    return 1;
  }
  cfg.experiment = chosen->tag;

  try {
    const cpmm::ExperimentReport report = cpmm::run_experiment(cfg);
    std::cout << cfg.experiment << ": wrote " << report.artifacts.size() << " artifacts to " << cfg.out_dir << '\n';
    if (!report.behavior_ok) {
      std::cerr << "BehaviorMismatch: " << report.behavior_message << '\n';
      return 2;
    }
    return 0;
  } catch (const cpmm::Error& e) {
    std::cerr << e.what() << '\n';
    if (e.kind() == cpmm::ErrorKind::PreconditionViolated)
      std::cerr << "hint: increase the strong convexity (ct: --lambda2 / --eps) or reduce the mismatch\n";
    return e.kind() == cpmm::ErrorKind::BehaviorMismatch ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
