#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "optirl/harness.hpp"

using namespace optirl;

namespace {

ExperimentConfig two_arm_config() {
  ExperimentConfig cfg;
  cfg.class_source = "builtin:two_arm";
  cfg.true_env = 1;
  cfg.agent_kind = "conservative";
  cfg.gamma = 0.5;
  cfg.eps_list = {0.1};
  cfg.t_max = 20;
  cfg.runs = 1;
  return cfg;
}

std::string serialize_trace(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const TraceRecord& rec : trace) out += trace_record_json(rec) + "\n";
  return out;
}

}  // namespace

TEST_CASE("run_episode replays the two-arm toy") {
  EpisodeResult ep = run_episode(two_arm_config(), 0);
  REQUIRE(ep.trace.size() == 20);
  CHECK(ep.trace[0].action == 0);
  CHECK(ep.trace[0].exclusions == 1);
  CHECK(ep.trace[0].gap == doctest::Approx(1.0).epsilon(1e-9));
  double tol = 2.0 * truncation_error_bound(horizon_for_epsilon(1e-3, Discount(0.5)),
                                            Discount(0.5));
  for (std::size_t i = 1; i < ep.trace.size(); ++i) {
    CHECK(ep.trace[i].action == 1);
    CHECK(std::abs(ep.trace[i].gap) <= tol);
  }
  CHECK(ep.summary.t_opt == 2);
  CHECK(ep.summary.exclusion_count == 1);
  CHECK_FALSE(ep.summary.excluded_true);
}

TEST_CASE("run_episode is bit-reproducible") {
  ExperimentConfig cfg;
  cfg.class_source = "builtin:bernoulli3";
  cfg.true_env = 0;
  cfg.agent_kind = "stochastic";
  cfg.t_max = 40;
  cfg.base_seed = 17;
  EpisodeResult a = run_episode(cfg, 3);
  EpisodeResult b = run_episode(cfg, 3);
  CHECK(serialize_trace(a.trace) == serialize_trace(b.trace));
  EpisodeResult c = run_episode(cfg, 4);
  CHECK(serialize_trace(a.trace) != serialize_trace(c.trace));
}

TEST_CASE("singleton class keeps the gap within the truncation slack") {
  ExperimentConfig cfg = two_arm_config();
  cfg.class_source = "builtin:det4";
  cfg.true_env = 0;
  cfg.t_max = 15;
  // Restrict to a singleton by running the true env against itself.
  EnvironmentClass det4 = builtin_class("det4");
  EnvironmentClass single;
  single.alphabets = det4.alphabets;
  single.environments = {det4.environments[0]};
  std::filesystem::path path =
      std::filesystem::temp_directory_path() / "optirl_singleton_class.json";
  std::ofstream(path) << class_to_json_text(single);
  cfg.class_source = path.string();
  EpisodeResult ep = run_episode(cfg, 0);
  double tol = 2.0 * truncation_error_bound(cfg.plan_horizon(), cfg.discount()) + 1e-9;
  for (const TraceRecord& rec : ep.trace) CHECK(std::abs(rec.gap) <= tol);
  CHECK(ep.summary.counts_per_eps[0] == 0);
}

TEST_CASE("oracle_gap reproduces the hand-rollout arithmetic") {
  EnvironmentClass cls = builtin_class("two_arm");
  AgentConfig agent_cfg;
  agent_cfg.kind = AgentKind::ConservativeDeterministic;
  Agent agent(cls.environments, agent_cfg, Discount(0.5), std::make_shared<Planner>());
  History empty;
  std::mt19937_64 rng(0);
  // Fresh agent at the empty history: V* = 1.9375 under nu2 at l=5, the
  // clone earns 0 at t=1 on the wrong arm then switches: 0 + 0.5*1.875.
  double gap = oracle_gap(*cls.environments[1], agent, empty, 5, 256, rng);
  CHECK(gap == doctest::Approx(1.9375 - 0.9375).epsilon(1e-12));
}

TEST_CASE("oracle_gap of a committed-correct agent stays within slack") {
  EnvironmentClass cls = builtin_class("two_arm");
  AgentConfig agent_cfg;
  agent_cfg.kind = AgentKind::ConservativeDeterministic;
  Agent agent(cls.environments, agent_cfg, Discount(0.5), std::make_shared<Planner>());
  History h;
  agent.act(h);
  agent.observe(h, 0, Percept{0, 0});
  h.append(0, Percept{0, 0});
  std::mt19937_64 rng(0);
  int l = agent.horizon();
  double gap = oracle_gap(*cls.environments[1], agent, h, l, 256, rng);
  CHECK(std::abs(gap) <= 2.0 * truncation_error_bound(l, Discount(0.5)) + 1e-12);
}

TEST_CASE("Monte-Carlo rollouts agree with the clone-tree expectation") {
  EnvironmentClass cls = builtin_class("bernoulli3");
  AgentConfig agent_cfg;
  agent_cfg.kind = AgentKind::StochasticThreshold;
  Agent agent(cls.environments, agent_cfg, Discount(0.5), std::make_shared<Planner>());
  History empty;
  const EnvironmentModel& mu = *cls.environments[0];
  int l = 5;
  double exact = agent_policy_value(agent, mu, empty, l);
  std::mt19937_64 rng(21);
  double se = 0.0, v_opt = 0.0;
  double gap = oracle_gap(mu, agent, empty, l, 10000, rng, &se, &v_opt);
  double mc = v_opt - gap;
  CHECK(std::abs(mc - exact) <= 3.0 * se + 1e-6);
}

TEST_CASE("agent_tv_distance bounds the clone value difference") {
  EnvironmentClass cls = builtin_class("bernoulli3");
  AgentConfig agent_cfg;
  agent_cfg.kind = AgentKind::StochasticThreshold;
  Agent agent(cls.environments, agent_cfg, Discount(0.5), std::make_shared<Planner>());
  History h;
  std::mt19937_64 rng(5);
  const EnvironmentModel& mu = *cls.environments[0];
  int l = 6;
  for (int t = 0; t < 8; ++t) {
    for (std::size_t e = 0; e < cls.environments.size(); ++e) {
      if (!agent.state().alive[e]) continue;
      const EnvironmentModel& nu = *cls.environments[e];
      double lhs = std::abs(agent_policy_value(agent, nu, h, l) -
                            agent_policy_value(agent, mu, h, l));
      double rhs = agent_tv_distance(agent, nu, mu, h, l) / 0.5 +
                   2.0 * truncation_error_bound(l, Discount(0.5));
      CHECK(lhs <= rhs + 1e-9);
    }
    int a = agent.act(h);
    Percept p = sample_percept(mu, h, a, rng);
    agent.observe(h, a, p);
    h.append(a, p);
  }
}

TEST_CASE("certify_det_bound arithmetic and verdicts") {
  Discount gamma(0.5);
  RunSummary good;
  good.run = 0;
  good.eps_list = {0.1};
  good.counts_per_eps = {4};
  good.exclusion_count = 1;
  Verdict v = certify_det_bound({good}, 0.1, 4, gamma);
  CHECK(v.pass);
  CHECK(v.detail.find("tight_bound=20") != std::string::npos);
  CHECK(v.detail.find("23.96") != std::string::npos);  // 4*log(0.05)/(-0.5)

  RunSummary over = good;
  over.counts_per_eps = {21};  // above |M|*l = 20
  over.exclusion_count = 3;
  CHECK_FALSE(certify_det_bound({good, over}, 0.1, 4, gamma).pass);

  RunSummary k_violation = good;
  k_violation.counts_per_eps = {6};  // above l*K = 5 with K=1
  CHECK_FALSE(certify_det_bound({k_violation}, 0.1, 4, gamma).pass);

  CHECK_THROWS_AS(certify_det_bound({good}, 0.25, 4, gamma), std::invalid_argument);
}

TEST_CASE("certify_stoch arithmetic and verdicts") {
  auto mk = [](bool excluded, bool settled) {
    RunSummary s;
    s.eps_list = {0.1};
    s.counts_per_eps = {0};
    s.settled_per_eps = {static_cast<char>(settled ? 1 : 0)};
    s.excluded_true = excluded;
    return s;
  };
  std::vector<RunSummary> batch;
  for (int i = 0; i < 1000; ++i) batch.push_back(mk(i < 200, true));
  // threshold 0.2 + 3*sqrt(0.2*0.8/1000) = 0.238
  Verdict v = certify_stoch(batch, 0.1, 3, 0.1);
  CHECK(v.pass);
  CHECK(v.detail.find("0.237") != std::string::npos);
  for (int i = 0; i < 60; ++i) batch.push_back(mk(true, true));
  CHECK_FALSE(certify_stoch(batch, 0.1, 3, 0.1).pass);  // rate 0.245

  // z -> 0: any exclusion fails.
  std::vector<RunSummary> tiny{mk(true, true), mk(false, true)};
  CHECK_FALSE(certify_stoch(tiny, 1e-12, 3, 0.1).pass);
  std::vector<RunSummary> clean{mk(false, true), mk(false, true)};
  CHECK(certify_stoch(clean, 1e-12, 3, 0.1).pass);

  // Settling below 95% fails.
  std::vector<RunSummary> unsettled;
  for (int i = 0; i < 100; ++i) unsettled.push_back(mk(false, i < 90));
  CHECK_FALSE(certify_stoch(unsettled, 0.1, 3, 0.1).pass);
}

TEST_CASE("batch_run aggregation") {
  ExperimentConfig cfg = two_arm_config();
  cfg.runs = 1;
  BatchResult single = batch_run(cfg, "");
  REQUIRE(single.summaries.size() == 1);
  EpisodeResult ep = run_episode(cfg, 0);
  CHECK(single.summaries[0].t_opt == ep.summary.t_opt);
  CHECK(single.summaries[0].counts_per_eps == ep.summary.counts_per_eps);

  cfg.runs = 0;
  CHECK_THROWS_AS(batch_run(cfg, ""), ConfigError);

  cfg.runs = 4;
  cfg.class_source = "builtin:bernoulli3";
  cfg.true_env = 0;
  cfg.agent_kind = "stochastic";
  cfg.t_max = 30;
  BatchResult serial = batch_run(cfg, "");
  cfg.jobs = 2;
  BatchResult parallel = batch_run(cfg, "");
  REQUIRE(serial.summaries.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(serial.summaries[i].run == i);
    CHECK(serial.summaries[i].t_opt == parallel.summaries[i].t_opt);
    CHECK(serial.summaries[i].exclusion_count == parallel.summaries[i].exclusion_count);
  }
}

TEST_CASE("batch_run writes trace and summary files with the documented schema") {
  ExperimentConfig cfg = two_arm_config();
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "optirl_batch_test";
  std::filesystem::remove_all(dir);
  BatchResult res = batch_run(cfg, dir.string());
  REQUIRE(res.trace_files.size() == 1);
  std::ifstream trace(res.trace_files[0]);
  REQUIRE(trace.good());
  std::string line;
  std::getline(trace, line);
  for (const char* key : {"\"t\":", "\"action\":", "\"obs\":", "\"reward\":", "\"alive\":",
                          "\"chosen\":", "\"v_opt\":", "\"v_agent\":", "\"gap\":",
                          "\"excluded\":", "\"logratio_true\":"})
    CHECK(line.find(key) != std::string::npos);
  std::ifstream summary(res.summary_file);
  REQUIRE(summary.good());
  std::getline(summary, line);
  CHECK(line.find("run,t_opt") == 0);
  CHECK(line.find("count_eps_0.1") != std::string::npos);
  std::getline(summary, line);
  CHECK(line.rfind("0,2,", 0) == 0);

  // Same config, same bytes.
  std::filesystem::path dir2 =
      std::filesystem::temp_directory_path() / "optirl_batch_test2";
  std::filesystem::remove_all(dir2);
  BatchResult res2 = batch_run(cfg, dir2.string());
  std::stringstream b1, b2;
  b1 << std::ifstream(res.trace_files[0]).rdbuf();
  b2 << std::ifstream(res2.trace_files[0]).rdbuf();
  CHECK(b1.str() == b2.str());
}

TEST_CASE("config parsing, overrides, and validation") {
  std::string text = R"({
    "class": {"source": "builtin:two_arm", "true_env": 1},
    "agent": {"kind": "conservative", "z": 0.2},
    "gamma": 0.5,
    "eps_list": [0.1, 0.2],
    "t_max": 12,
    "runs": 2,
    "seed": 9
  })";
  ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
  CHECK(cfg.class_source == "builtin:two_arm");
  CHECK(cfg.true_env == 1);
  CHECK(cfg.t_max == 12);
  CHECK(cfg.runs == 2);
  CHECK(cfg.base_seed == 9);
  CHECK(cfg.eps_list.size() == 2);
  CHECK_NOTHROW(cfg.validate());

  cfg.apply_override("t_max", "1");
  CHECK(cfg.t_max == 1);
  EpisodeResult ep = run_episode(cfg, 0);
  CHECK(ep.trace.size() == 1);

  cfg.apply_override("agent.kind", "liberal");
  CHECK(cfg.agent_kind == "liberal");
  cfg.apply_override("class.true_env", "0");
  CHECK(cfg.true_env == 0);

  // Overrides apply before validation and fail like file values would.
  cfg.apply_override("t_max", "0");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("gamma", "nonsense"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{oops"), ConfigError);

  ExperimentConfig bad;
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.agent_kind = "bogus";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.gap_mode = "sometimes";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  ExperimentConfig a = two_arm_config();
  ExperimentConfig b = two_arm_config();
  CHECK(a.config_hash() == b.config_hash());
  b.t_max += 1;
  CHECK(a.config_hash() != b.config_hash());
}

TEST_CASE("true env log-ratio never dips below log z on non-excluded runs") {
  ExperimentConfig cfg;
  cfg.class_source = "builtin:bernoulli3";
  cfg.true_env = 0;
  cfg.agent_kind = "stochastic";
  cfg.z = 0.1;
  cfg.t_max = 80;
  cfg.gap_mode = "none";
  for (int run = 0; run < 10; ++run) {
    EpisodeResult ep = run_episode(cfg, run);
    if (ep.summary.excluded_true) continue;
    for (const TraceRecord& rec : ep.trace)
      CHECK(rec.logratio_true >= std::log(cfg.z) - 1e-9);
  }
}
