#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optirl/agent.hpp"
#include "optirl/class_io.hpp"

namespace optirl {

struct ExperimentConfig {
  std::string class_source = "builtin:two_arm";
  int true_env = 0;

  std::string agent_kind = "conservative";
  double z = 0.1;
  double eps_plan = 1e-3;
  std::string denominator = "full";  // "full" | "surviving"
  std::string radius_provider = "hoeffding";
  double radius_constant = 0.0;
  int dtilde_probe_horizon = 1;
  long long node_budget = 10'000'000;

  double gamma = 0.5;
  std::vector<double> eps_list{0.1};
  int t_max = 20;
  int runs = 1;
  std::uint64_t base_seed = 0;
  int rollouts = 256;
  std::string gap_mode = "every";  // "every" | "final_quarter" | "none"
  int gap_stride = 1;
  int jobs = 1;
  double cover_epsilon = 0.1;  // for the cover command: cover radius is eps*(1-gamma)
  int cover_horizon = 1;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  void apply_override(const std::string& key, const std::string& value);
  std::string canonical_json() const;
  std::string config_hash() const;
  void validate() const;

  Discount discount() const { return Discount(gamma); }
  AgentConfig agent_config() const;
  int plan_horizon() const { return horizon_for_epsilon(eps_plan, discount()); }
};

// Per-step experiment output; gap fields are NaN on steps where the oracle
// gap was not measured.
struct TraceRecord {
  int t = 0;
  int action = 0;
  Percept percept;
  int alive = 0;
  std::string chosen;
  double v_opt = 0.0;
  double v_agent = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;
  bool gap_measured = false;
  int exclusions = 0;
  double logratio_true = 0.0;
  double radius = 0.0;
};

struct RunSummary {
  int run = 0;
  // First measured step after which every measured gap stays within
  // 2*truncation slack (+ 3 SE on stochastic runs); -1 when never reached.
  int t_opt = -1;
  std::vector<double> eps_list;
  std::vector<int> counts_per_eps;    // measured steps with gap > eps + slack
  std::vector<char> settled_per_eps;  // all final-quarter gaps within eps + slack
  bool excluded_true = false;
  bool empty_class = false;
  int exclusion_count = 0;  // K: steps where the selected hypothesis got excluded
  bool radius_monotone = true;
  bool true_in_enlarged = true;
};

struct EpisodeResult {
  std::vector<TraceRecord> trace;
  RunSummary summary;
};

// Deterministic function of (config, run_index); seed is base_seed + run_index.
EpisodeResult run_episode(const ExperimentConfig& config, int run_index);

// V*_{mu,l}(h) minus the value the cloned agent attains in mu from h.
// Deterministic classes use one exact rollout; stochastic ones average
// `rollouts` rollouts and report the standard error.
double oracle_gap(const EnvironmentModel& true_env, const Agent& snapshot, const History& h,
                  int l, int rollouts, std::mt19937_64& rng, double* std_err = nullptr,
                  double* v_opt_out = nullptr);

// Expected l-truncated return in `env` of the cloned agent's forward
// behavior from h (the agent keeps updating its hypotheses along the way).
double agent_policy_value(const Agent& snapshot, const EnvironmentModel& env,
                          const History& h, int l);

// TV distance over the next l steps between env1 and env2, actions taken by
// the cloned agent.
double agent_tv_distance(const Agent& snapshot, const EnvironmentModel& env1,
                         const EnvironmentModel& env2, const History& h, int l);

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Per-run error-count check: steps with gap > eps + 2*truncation slack must
// number at most |M| * l(eps), at most |M| log(eps(1-gamma))/(gamma-1), and
// at most l(eps) * K.
Verdict certify_det_bound(const std::vector<RunSummary>& batch, double eps, int class_size,
                          Discount gamma);

// Exclusion-rate bound z(|M|-1) with a 3-sigma binomial margin, plus the
// settling requirement on non-excluded runs.
Verdict certify_stoch(const std::vector<RunSummary>& batch, double z, int class_size,
                      double eps);

struct BatchResult {
  std::vector<RunSummary> summaries;
  std::vector<std::string> trace_files;
  std::string summary_file;
};

// Runs all episodes (run-index order, optionally jobs-way parallel) and, when
// outdir is non-empty, writes one JSONL trace per run plus a CSV summary.
BatchResult batch_run(const ExperimentConfig& config, const std::string& outdir);

std::string trace_record_json(const TraceRecord& rec);

}  // namespace optirl
