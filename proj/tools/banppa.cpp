#include <CLI11.hpp>

#include "banppa/cli_commands.hpp"

int main(int argc, char** argv) {
  using namespace banppa::cli;

  CLI::App app{"temporal mixtures of Poisson processes: simulate, fit, evaluate"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic event corpus");
  simulate->add_option("--variant", sim.variant, "corpus preset")
      ->check(CLI::IsMember({"A", "B", "C", "D", "E", "a", "b", "c", "d", "e"}))
      ->required();
  simulate->add_option("--seed", sim.seed, "generator seed");
  simulate->add_option("--out", sim.out, "event-list output path")->required();
  simulate->add_flag("--split", sim.split, "also write <out>.train and <out>.test halves");
  simulate->add_option("--split-seed", sim.split_seed, "seed for the train/test coin flips");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to an event corpus");
  fit_cmd->add_option("--data", fit.data, "training event list")->required();
  fit_cmd->add_option("--out", fit.out, "fit artifact path")->required();
  fit_cmd->add_option("--variant", fit.variant, "model variant")
      ->check(CLI::IsMember({"lppa", "banppa-nc", "banppa"}));
  fit_cmd->add_option("-K,--components", fit.components, "component count");
  fit_cmd->add_option("-M,--pseudo", fit.pseudo_count, "pseudo-input count");
  fit_cmd->add_option("--seed", fit.seed, "initialization seed");
  fit_cmd->add_option("--inner-tol", fit.inner_tol, "inner relative tolerance");
  fit_cmd->add_option("--outer-tol", fit.outer_tol, "outer relative tolerance");
  fit_cmd->add_option("--max-outer", fit.max_outer, "multiplier update cap");
  fit_cmd->add_option("--max-sweeps", fit.max_sweeps, "block sweep cap per inner solve");
  fit_cmd->add_option("--max-block-iters", fit.max_block_iters,
                      "quasi-Newton iterations per block visit");
  fit_cmd->add_option("--fix-alpha", fit.fix_alpha,
                      "freeze the stick concentration at this value");
  fit_cmd->add_option("--fix-lengthscale", fit.fix_lengthscale,
                      "freeze kernel widths at this value");
  fit_cmd->add_option("--gamma-scale", fit.gamma_scale, "kernel variance scale");
  fit_cmd->add_option("--config", fit.config_file,
                      "JSON config; its values override the flags");
  fit_cmd->add_flag("--serial", fit.serial, "force the serial kernels");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "score a fit on held-out data");
  ev_cmd->add_option("--fit", ev.fit, "fit artifact")->required();
  ev_cmd->add_option("--test", ev.test, "held-out event list")->required();
  ev_cmd->add_option("--train", ev.train, "training event list (adds the train likelihood)");
  ev_cmd->add_option("--out", ev.out_dir, "report directory")->required();
  ev_cmd->add_option("--samples", ev.samples, "Monte Carlo draws for the sampled estimator");
  ev_cmd->add_option("--grid", ev.grid, "intensity export grid points");
  ev_cmd->add_option("--threshold", ev.threshold, "active-component usage threshold");
  ev_cmd->add_option("--seed", ev.seed, "sampler seed");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "tabulate several fits on one test set");
  cmp_cmd->add_option("fits", cmp.fits, "fit artifacts over the same split")
      ->required()
      ->expected(2, -1);
  cmp_cmd->add_option("--test", cmp.test, "held-out event list")->required();
  cmp_cmd->add_option("--out", cmp.out, "also write the table as CSV");
  cmp_cmd->add_option("--samples", cmp.samples, "Monte Carlo draws per fit");
  cmp_cmd->add_option("--seed", cmp.seed, "sampler seed");

  GTableArgs gt;
  auto* gt_cmd = app.add_subcommand("gtable", "precompute the log-square moment table");
  gt_cmd->add_option("--out", gt.out, "table output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*simulate) return run_guarded([&] { return cmd_simulate(sim); });
  if (*fit_cmd) return run_guarded([&] { return cmd_fit(fit); });
  if (*ev_cmd) return run_guarded([&] { return cmd_evaluate(ev); });
  if (*cmp_cmd) return run_guarded([&] { return cmd_compare(cmp); });
  if (*gt_cmd) return run_guarded([&] { return cmd_gtable(gt); });
  return 1;
}
