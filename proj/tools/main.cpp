#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "optirl/harness.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCertificationFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitResourceError = 3;

struct CommonOpts {
  std::string config_path;
  std::string outdir = "./out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", opts.outdir, "output directory");
  cmd->add_option("--override", opts.overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "override the base seed");
  cmd->add_option("--jobs", opts.jobs, "parallel runs (fallback: OPTIMIST_JOBS)");
}

optirl::ExperimentConfig load_config(const CommonOpts& opts) {
  optirl::ExperimentConfig cfg = optirl::ExperimentConfig::from_file(opts.config_path);
  for (const std::string& ov : opts.overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw optirl::ConfigError("override must look like key=value: " + ov);
    cfg.apply_override(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (opts.seed) cfg.base_seed = *opts.seed;
  if (opts.jobs) {
    cfg.jobs = *opts.jobs;
  } else if (const char* env_jobs = std::getenv("OPTIMIST_JOBS")) {
    cfg.jobs = std::max(1, std::atoi(env_jobs));
  }
  cfg.validate();
  return cfg;
}

optirl::EnvironmentClass load_and_check_class(const optirl::ExperimentConfig& cfg) {
  optirl::EnvironmentClass cls = optirl::resolve_class_source(cfg.class_source);
  if (cfg.true_env < 0 || cfg.true_env >= static_cast<int>(cls.environments.size()))
    throw optirl::ConfigError("class.true_env: index " + std::to_string(cfg.true_env) +
                              " out of range for class of size " +
                              std::to_string(cls.environments.size()));
  return cls;
}

int cmd_run(const CommonOpts& opts) {
  optirl::ExperimentConfig cfg = load_config(opts);
  load_and_check_class(cfg);
  optirl::BatchResult batch = optirl::batch_run(cfg, opts.outdir);
  std::cout << "runs: " << batch.summaries.size() << "\n";
  for (const auto& s : batch.summaries)
    std::cout << "run " << s.run << ": T_opt=" << s.t_opt << " K=" << s.exclusion_count
              << (s.excluded_true ? " excluded_true" : "") << "\n";
  std::cout << "summary: " << batch.summary_file << "\n";
  return kExitPass;
}

int cmd_verify_det(const CommonOpts& opts) {
  optirl::ExperimentConfig cfg = load_config(opts);
  optirl::EnvironmentClass cls = load_and_check_class(cfg);
  for (const auto& env : cls.environments)
    if (!env->deterministic())
      throw optirl::ConfigError("verify-det: class contains a stochastic environment (" +
                                env->name() + ")");
  optirl::BatchResult batch = optirl::batch_run(cfg, opts.outdir);
  bool pass = true;
  for (double eps : cfg.eps_list) {
    optirl::Verdict v = optirl::certify_det_bound(
        batch.summaries, eps, static_cast<int>(cls.environments.size()), cfg.discount());
    std::cout << (v.pass ? "PASS" : "FAIL") << " deterministic error-count bound\n"
              << v.detail << "\n";
    pass = pass && v.pass;
  }
  return pass ? kExitPass : kExitCertificationFailure;
}

int cmd_verify_stochastic(const CommonOpts& opts, bool compact) {
  optirl::ExperimentConfig cfg = load_config(opts);
  optirl::EnvironmentClass cls = load_and_check_class(cfg);
  optirl::BatchResult batch = optirl::batch_run(cfg, opts.outdir);
  bool pass = true;
  for (double eps : cfg.eps_list) {
    optirl::Verdict v = optirl::certify_stoch(
        batch.summaries, cfg.z, static_cast<int>(cls.environments.size()), eps);
    std::cout << (v.pass ? "PASS" : "FAIL") << " stochastic exclusion/settling bounds\n"
              << v.detail << "\n";
    pass = pass && v.pass;
  }
  if (compact) {
    std::size_t monotone = 0, inside = 0;
    for (const auto& s : batch.summaries) {
      monotone += s.radius_monotone ? 1 : 0;
      inside += s.true_in_enlarged ? 1 : 0;
    }
    std::cout << "radius monotone in " << monotone << "/" << batch.summaries.size()
              << " runs; true env inside the enlarged set in " << inside << "/"
              << batch.summaries.size() << " runs\n";
  }
  return pass ? kExitPass : kExitCertificationFailure;
}

int cmd_cover(const CommonOpts& opts) {
  optirl::ExperimentConfig cfg = load_config(opts);
  optirl::EnvironmentClass cls = optirl::resolve_class_source(cfg.class_source);
  if (!cls.family)
    throw optirl::ConfigError("cover: class declares no parametric family");
  std::vector<optirl::EnvPtr> centers = optirl::build_cover(
      *cls.family, cfg.cover_epsilon, cfg.discount(), cfg.cover_horizon);
  optirl::EnvironmentClass out_cls;
  out_cls.alphabets = centers.front()->alphabets();
  out_cls.environments = centers;
  std::filesystem::create_directories(opts.outdir);
  std::string path = opts.outdir + "/cover_" + cfg.config_hash() + ".json";
  std::ofstream out(path, std::ios::trunc);
  out << optirl::class_to_json_text(out_cls) << "\n";
  std::cout << centers.size() << " centers written to " << path << "\n";
  return kExitPass;
}

int cmd_inspect_class(const CommonOpts& opts) {
  optirl::ExperimentConfig cfg = load_config(opts);
  optirl::EnvironmentClass cls = optirl::resolve_class_source(cfg.class_source);
  std::cout << "class size: " << cls.environments.size() << "\n";
  optirl::Planner planner(cfg.node_budget);
  optirl::History empty;
  int l = cfg.plan_horizon();
  for (const auto& env : cls.environments) {
    double v = planner.optimal_value(*env, empty, l, cfg.discount());
    std::cout << env->name() << ": " << (env->deterministic() ? "det " : "stoch ")
              << "V*(eps)=" << v << "\n";
  }
  const std::size_t n = cls.environments.size();
  double tree = std::pow(cls.alphabets.num_percepts(), cfg.dtilde_probe_horizon);
  if (n <= 24 && tree <= 1e6) {
    std::vector<optirl::History> probe_h{optirl::History{}};
    std::vector<optirl::PolicyFn> probes;
    for (int a = 0; a < cls.alphabets.num_actions; ++a)
      probes.push_back([a](const optirl::History&) { return a; });
    std::cout << "pairwise TV at H=" << cfg.dtilde_probe_horizon << ":\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        std::cout << (j ? " " : "")
                  << optirl::dtilde_horizon(*cls.environments[i], *cls.environments[j],
                                            cfg.dtilde_probe_horizon, probe_h, probes);
      std::cout << "\n";
    }
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimistic-agent experiment runner"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* run = app.add_subcommand("run", "run a batch and emit trace/summary files");
  CLI::App* vdet = app.add_subcommand("verify-det", "run and certify the deterministic error bound");
  CLI::App* vstoch = app.add_subcommand("verify-stoch", "run and certify the stochastic exclusion/settling bounds");
  CLI::App* vcompact = app.add_subcommand("verify-compact", "certify the compact-class agent");
  CLI::App* cover = app.add_subcommand("cover", "build and write an epsilon cover of the class family");
  CLI::App* inspect = app.add_subcommand("inspect-class", "print class diagnostics");
  for (CLI::App* cmd : {run, vdet, vstoch, vcompact, cover, inspect}) add_common(cmd, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opts);
    if (vdet->parsed()) return cmd_verify_det(opts);
    if (vstoch->parsed()) return cmd_verify_stochastic(opts, false);
    if (vcompact->parsed()) return cmd_verify_stochastic(opts, true);
    if (cover->parsed()) return cmd_cover(opts);
    if (inspect->parsed()) return cmd_inspect_class(opts);
  } catch (const optirl::BudgetExceeded& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return kExitResourceError;
  } catch (const optirl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResourceError;
  }
  return kExitConfigError;
}
