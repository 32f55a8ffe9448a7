#include <CLI11.hpp>
#include <iostream>

#include "bootband/cli.hpp"

int main(int argc, char** argv) {
  using namespace bootband;
  CLI::App app{"Bootstrapping-based exploration for multi-armed and contextual bandits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(artifact_version()));

  std::string config;
  RunOverrides overrides;
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("config", config, "Experiment config file")->required();
    sub->add_option("--out", out, "Output directory (overrides the config)");
    sub->add_option("--threads", threads, "Worker threads (default: BOOTBAND_THREADS or all cores)");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
  };
  CLI::App* mab = app.add_subcommand("mab", "Run a multi-armed bandit regret experiment");
  add_run_options(mab);
  CLI::App* contextual = app.add_subcommand("contextual", "Run a contextual bandit experiment");
  add_run_options(contextual);

  TheoryOptions theory;
  std::vector<double> p_values;
  CLI::App* th = app.add_subcommand("theory", "Check the supporting lemmas numerically");
  th->add_option("--n-min", theory.n_min, "Smallest n of the tail-bound grid");
  th->add_option("--n-max", theory.n_max, "Largest n of the tail-bound grid");
  th->add_option("--p-values", p_values, "Success probabilities of the tail-bound grid")->delimiter(',');
  th->add_option("--k-fraction", theory.k_fraction, "k = ceil(fraction * n)");
  th->add_option("--m-min", theory.m_min, "Smallest m of the pull-probability check");
  th->add_option("--m-max", theory.m_max, "Largest m of the pull-probability check");
  th->add_option("--l-max", theory.l_max, "Largest truncation level of the geometric checks");
  th->add_flag("--probe", theory.probe, "Also run the Monte-Carlo bad-history probe");
  th->add_option("--probe-m", theory.probe_m, "m for the probe");
  th->add_option("--probe-horizon", theory.probe_horizon, "Horizon for the probe");
  th->add_option("--probe-runs", theory.probe_runs, "Replications for the probe");
  th->add_option("--seed", theory.seed, "Seed for the probe");
  std::string theory_out;
  th->add_option("--out", theory_out, "Write the per-point report to this file");
  th->add_flag("--invert-bound", theory.invert_bound, "Flip every comparison (exercises the failure path)");

  GenDataOptions gen;
  std::string gen_out;
  CLI::App* gd = app.add_subcommand("gen-data", "Write a synthetic linearly separable dataset as CSV");
  gd->add_option("--rows", gen.rows, "Number of rows");
  gd->add_option("--dim", gen.dim, "Context dimension");
  gd->add_option("--classes", gen.classes, "Number of classes");
  gd->add_option("--seed", gen.seed, "Seed");
  gd->add_option("--out", gen_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  if (!out.empty()) overrides.out = out;
  if (threads > 0) overrides.threads = threads;
  if (mab->count("--seed") || contextual->count("--seed")) overrides.seed = seed;
  const CommandStreams io{std::cout, std::cerr};

  if (*mab) return cmd_mab(config, overrides, io);
  if (*contextual) return cmd_contextual(config, overrides, io);
  if (*th) {
    if (th->count("--p-values")) theory.p_values = p_values;
    if (!theory_out.empty()) theory.out = theory_out;
    return cmd_theory(theory, io);
  }
  gen.out = gen_out;
  return cmd_gen_data(gen, io);
}
