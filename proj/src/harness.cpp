#include "optirl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace optirl {

using nlohmann::json;

namespace {

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["class"] = {{"source", c.class_source}, {"true_env", c.true_env}};
  j["agent"] = {{"kind", c.agent_kind},
                {"z", c.z},
                {"eps_plan", c.eps_plan},
                {"denominator", c.denominator},
                {"radius_provider", c.radius_provider},
                {"radius_constant", c.radius_constant},
                {"dtilde_probe_horizon", c.dtilde_probe_horizon},
                {"node_budget", c.node_budget}};
  j["gamma"] = c.gamma;
  j["eps_list"] = c.eps_list;
  j["t_max"] = c.t_max;
  j["runs"] = c.runs;
  j["seed"] = c.base_seed;
  j["rollouts"] = c.rollouts;
  j["gap"] = {{"mode", c.gap_mode}, {"stride", c.gap_stride}};
  j["jobs"] = c.jobs;
  j["cover"] = {{"epsilon", c.cover_epsilon}, {"horizon", c.cover_horizon}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("class")) {
      c.class_source = j.at("class").value("source", c.class_source);
      c.true_env = j.at("class").value("true_env", c.true_env);
    }
    if (j.contains("agent")) {
      const json& a = j.at("agent");
      c.agent_kind = a.value("kind", c.agent_kind);
      c.z = a.value("z", c.z);
      c.eps_plan = a.value("eps_plan", c.eps_plan);
      c.denominator = a.value("denominator", c.denominator);
      c.radius_provider = a.value("radius_provider", c.radius_provider);
      c.radius_constant = a.value("radius_constant", c.radius_constant);
      c.dtilde_probe_horizon = a.value("dtilde_probe_horizon", c.dtilde_probe_horizon);
      c.node_budget = a.value("node_budget", c.node_budget);
    }
    c.gamma = j.value("gamma", c.gamma);
    if (j.contains("eps_list")) c.eps_list = j.at("eps_list").get<std::vector<double>>();
    c.t_max = j.value("t_max", c.t_max);
    c.runs = j.value("runs", c.runs);
    c.base_seed = j.value("seed", c.base_seed);
    c.rollouts = j.value("rollouts", c.rollouts);
    if (j.contains("gap")) {
      c.gap_mode = j.at("gap").value("mode", c.gap_mode);
      c.gap_stride = j.at("gap").value("stride", c.gap_stride);
    }
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("cover")) {
      c.cover_epsilon = j.at("cover").value("epsilon", c.cover_epsilon);
      c.cover_horizon = j.at("cover").value("horizon", c.cover_horizon);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void ExperimentConfig::apply_override(const std::string& key, const std::string& value) {
  json j = config_to_json(*this);
  json::json_pointer ptr;
  std::string path = "/" + key;
  for (char& ch : path)
    if (ch == '.') ch = '/';
  try {
    ptr = json::json_pointer(path);
  } catch (const json::exception&) {
    throw ConfigError("bad override key: " + key);
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare strings are fine
  }
  j[ptr] = parsed;
  *this = config_from_json(j);
}

std::string ExperimentConfig::canonical_json() const { return config_to_json(*this).dump(); }

std::string ExperimentConfig::config_hash() const {
  std::size_t h = std::hash<std::string>()(canonical_json());
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

void ExperimentConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma: must lie in (0,1)");
  if (t_max < 1) throw ConfigError("t_max: must be at least 1");
  if (runs < 1) throw ConfigError("runs: must be at least 1");
  if (rollouts < 1) throw ConfigError("rollouts: must be at least 1");
  if (jobs < 1) throw ConfigError("jobs: must be at least 1");
  if (!(eps_plan > 0.0 && eps_plan < 1.0 / (1.0 - gamma)))
    throw ConfigError("agent.eps_plan: must lie in (0, 1/(1-gamma))");
  for (double e : eps_list)
    if (!(e > 0.0)) throw ConfigError("eps_list: entries must be positive");
  try {
    agent_kind_from_string(agent_kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (denominator != "full" && denominator != "surviving")
    throw ConfigError("agent.denominator: must be 'full' or 'surviving'");
  if (gap_mode != "every" && gap_mode != "final_quarter" && gap_mode != "none")
    throw ConfigError("gap.mode: must be 'every', 'final_quarter' or 'none'");
  if (gap_stride < 1) throw ConfigError("gap.stride: must be at least 1");
  AgentKind kind = agent_kind_from_string(agent_kind);
  if (kind != AgentKind::ConservativeDeterministic &&
      kind != AgentKind::LiberalDeterministic) {
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("agent.z: must lie in (0,1)");
  }
}

AgentConfig ExperimentConfig::agent_config() const {
  AgentConfig a;
  a.kind = agent_kind_from_string(agent_kind);
  a.z = z;
  a.eps_plan = eps_plan;
  a.denominator_full_class = denominator == "full";
  a.dtilde_probe_horizon = dtilde_probe_horizon;
  a.node_budget = node_budget;
  return a;
}

namespace {

std::shared_ptr<const ConfidenceRadiusProvider> make_radius_provider(
    const ExperimentConfig& cfg, const Alphabets& alphabets) {
  if (cfg.radius_provider == "zero") return std::make_shared<ZeroRadius>();
  if (cfg.radius_provider == "constant")
    return std::make_shared<ConstantRadius>(cfg.radius_constant);
  if (cfg.radius_provider == "hoeffding")
    return std::make_shared<HoeffdingRadius>(alphabets.num_observations,
                                             alphabets.num_actions);
  throw ConfigError("agent.radius_provider: unknown provider " + cfg.radius_provider);
}

bool class_deterministic(const std::vector<EnvPtr>& envs) {
  return std::all_of(envs.begin(), envs.end(),
                     [](const EnvPtr& e) { return e->deterministic(); });
}

double rollout_return(const EnvironmentModel& mu, Agent clone, History& h, int l,
                      Discount gamma, std::mt19937_64& rng) {
  double acc = 0.0;
  double weight = 1.0;
  int appended = 0;
  for (int i = 0; i < l; ++i) {
    int a;
    try {
      a = clone.act(h);
    } catch (const EmptyClassError&) {
      break;  // pessimistic: no further reward credited
    }
    Percept p = sample_percept(mu, h, a, rng);
    acc += weight * mu.alphabets().reward_of(p);
    clone.observe(h, a, p);
    h.append(a, p);
    ++appended;
    weight *= gamma.value();
  }
  while (appended-- > 0) h.pop();
  return acc;
}

}  // namespace

double oracle_gap(const EnvironmentModel& true_env, const Agent& snapshot, const History& h,
                  int l, int rollouts, std::mt19937_64& rng, double* std_err,
                  double* v_opt_out) {
  double v_opt =
      snapshot.planner()->optimal_value(true_env, h, l, snapshot.discount());
  if (v_opt_out) *v_opt_out = v_opt;
  bool exact = true_env.deterministic() && class_deterministic(snapshot.class_enumeration());
  int n = exact ? 1 : rollouts;
  double sum = 0.0, sumsq = 0.0;
  History scratch = h;
  for (int i = 0; i < n; ++i) {
    double v = rollout_return(true_env, snapshot, scratch, l, snapshot.discount(), rng);
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n;
  if (std_err) {
    double var = n > 1 ? std::max(0.0, (sumsq - n * mean * mean) / (n - 1)) : 0.0;
    *std_err = n > 1 ? std::sqrt(var / n) : 0.0;
  }
  return v_opt - mean;
}

namespace {

void policy_value_clone_recurse(Agent& clone, const EnvironmentModel& env, History& h,
                                int depth, double gamma, double prob, double weight,
                                double& acc) {
  if (depth == 0) return;
  int a;
  try {
    a = clone.act(h);
  } catch (const EmptyClassError&) {
    return;
  }
  std::vector<double> probs = env.percept_distribution(h, a);
  const Alphabets& alph = env.alphabets();
  for (int i = 0; i < alph.num_percepts(); ++i) {
    if (probs[i] == 0.0) continue;
    Percept p = alph.percept_at(i);
    double branch = prob * probs[i];
    acc += branch * weight * alph.reward_of(p);
    if (depth > 1) {
      Agent child = clone;
      child.observe(h, a, p);
      h.append(a, p);
      policy_value_clone_recurse(child, env, h, depth - 1, gamma, branch, weight * gamma,
                                 acc);
      h.pop();
    }
  }
}

void tv_clone_recurse(Agent& clone, const EnvironmentModel& env1,
                      const EnvironmentModel& env2, History& h, int depth, double p1,
                      double p2, double& acc) {
  if (depth == 0) {
    acc += std::abs(p1 - p2);
    return;
  }
  int a;
  try {
    a = clone.act(h);
  } catch (const EmptyClassError&) {
    acc += std::abs(p1 - p2);
    return;
  }
  std::vector<double> d1 = env1.percept_distribution(h, a);
  std::vector<double> d2 = env2.percept_distribution(h, a);
  const Alphabets& alph = env1.alphabets();
  for (int i = 0; i < alph.num_percepts(); ++i) {
    if (d1[i] == 0.0 && d2[i] == 0.0) continue;
    Percept p = alph.percept_at(i);
    Agent child = clone;
    child.observe(h, a, p);
    h.append(a, p);
    tv_clone_recurse(child, env1, env2, h, depth - 1, p1 * d1[i], p2 * d2[i], acc);
    h.pop();
  }
}

}  // namespace

double agent_policy_value(const Agent& snapshot, const EnvironmentModel& env,
                          const History& h, int l) {
  History scratch = h;
  Agent clone = snapshot;
  double acc = 0.0;
  policy_value_clone_recurse(clone, env, scratch, l, snapshot.discount().value(), 1.0, 1.0,
                             acc);
  return acc;
}

double agent_tv_distance(const Agent& snapshot, const EnvironmentModel& env1,
                         const EnvironmentModel& env2, const History& h, int l) {
  History scratch = h;
  Agent clone = snapshot;
  double acc = 0.0;
  tv_clone_recurse(clone, env1, env2, scratch, l, 1.0, 1.0, acc);
  return 0.5 * acc;
}

EpisodeResult run_episode(const ExperimentConfig& cfg, int run_index) {
  cfg.validate();
  EnvironmentClass cls = resolve_class_source(cfg.class_source);
  if (cfg.true_env < 0 || cfg.true_env >= static_cast<int>(cls.environments.size()))
    throw ConfigError("class.true_env: index out of range for class of size " +
                      std::to_string(cls.environments.size()));
  const std::size_t true_idx = static_cast<std::size_t>(cfg.true_env);
  EnvPtr mu = cls.environments[true_idx];
  Discount gamma = cfg.discount();
  const int l = cfg.plan_horizon();

  AgentConfig agent_cfg = cfg.agent_config();
  if (agent_cfg.kind == AgentKind::CompactRadius)
    agent_cfg.radius_provider = make_radius_provider(cfg, cls.alphabets);
  auto planner = std::make_shared<Planner>(cfg.node_budget);
  Agent agent(cls.environments, agent_cfg, gamma, planner);

  std::mt19937_64 env_rng(cfg.base_seed + static_cast<std::uint64_t>(run_index));

  EpisodeResult out;
  RunSummary& summary = out.summary;
  summary.run = run_index;
  summary.eps_list = cfg.eps_list;
  summary.counts_per_eps.assign(cfg.eps_list.size(), 0);
  summary.settled_per_eps.assign(cfg.eps_list.size(), 1);

  const int quarter_start = cfg.t_max - cfg.t_max / 4 + 1;
  double prev_radius = 1.0 + 1e-12;
  History h;

  for (int t = 1; t <= cfg.t_max; ++t) {
    TraceRecord rec;
    rec.t = t;

    bool measure = false;
    if (cfg.gap_mode == "every")
      measure = (t - 1) % cfg.gap_stride == 0;
    else if (cfg.gap_mode == "final_quarter")
      measure = t >= quarter_start && (t - quarter_start) % cfg.gap_stride == 0;
    if (measure) {
      std::uint64_t gap_seed =
          cfg.base_seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(run_index) * 1000003ULL +
          static_cast<std::uint64_t>(t);
      std::mt19937_64 gap_rng(gap_seed);
      rec.gap =
          oracle_gap(*mu, agent, h, l, cfg.rollouts, gap_rng, &rec.gap_se, &rec.v_opt);
      rec.v_agent = rec.v_opt - rec.gap;
      rec.gap_measured = true;
    }

    int action;
    try {
      action = agent.act(h);
    } catch (const EmptyClassError&) {
      summary.empty_class = true;
      summary.excluded_true = true;
      break;
    }
    if (agent.config().kind == AgentKind::CompactRadius) {
      rec.radius = agent.last_radius();
      if (rec.radius > prev_radius + 1e-12) summary.radius_monotone = false;
      prev_radius = rec.radius;
      if (!agent.effective_alive()[true_idx]) summary.true_in_enlarged = false;
    }
    const Plan plan = agent.last_plan();
    Percept percept = sample_percept(*mu, h, action, env_rng);
    agent.observe(h, action, percept);
    h.append(action, percept);

    rec.action = action;
    rec.percept = percept;
    rec.alive = static_cast<int>(agent.state().alive_count());
    rec.chosen = cls.environments[plan.env_index]->name();
    rec.exclusions = agent.state().exclusions_last_step;
    rec.logratio_true = agent.log_ratio(true_idx);
    if (!agent.state().alive[true_idx]) summary.excluded_true = true;
    if (!agent.state().alive[plan.env_index]) ++summary.exclusion_count;
    out.trace.push_back(std::move(rec));
  }

  // Settle analysis over the measured gaps.
  const double base_slack = 2.0 * truncation_error_bound(l, gamma);
  int last_bad = 0;  // last measured t whose gap exceeds the settling tolerance
  bool any_measured = false;
  for (const TraceRecord& rec : out.trace) {
    if (!rec.gap_measured) continue;
    any_measured = true;
    double slack = base_slack + 3.0 * rec.gap_se + 1e-9;
    if (rec.gap > slack) last_bad = rec.t;
    for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) {
      if (rec.gap > cfg.eps_list[e] + slack) {
        ++summary.counts_per_eps[e];
        if (rec.t >= quarter_start) summary.settled_per_eps[e] = 0;
      }
    }
  }
  if (any_measured && !summary.empty_class)
    summary.t_opt = last_bad + 1;
  if (!any_measured)
    for (std::size_t e = 0; e < cfg.eps_list.size(); ++e) summary.settled_per_eps[e] = 0;
  return out;
}

Verdict certify_det_bound(const std::vector<RunSummary>& batch, double eps, int class_size,
                          Discount gamma) {
  Verdict v;
  int l_eps = horizon_for_epsilon(eps, gamma);
  double tight = static_cast<double>(class_size) * l_eps;
  double relaxed = class_size * std::log(eps * (1.0 - gamma.value())) / (gamma.value() - 1.0);
  std::ostringstream detail;
  detail << "eps=" << eps << " l(eps)=" << l_eps << " tight_bound=" << tight
         << " relaxed_bound=" << relaxed << "\n";
  int worst = 0;
  for (const RunSummary& s : batch) {
    std::size_t idx = s.eps_list.size();
    for (std::size_t e = 0; e < s.eps_list.size(); ++e)
      if (std::abs(s.eps_list[e] - eps) < 1e-12) idx = e;
    if (idx == s.eps_list.size())
      throw std::invalid_argument("certify_det_bound: eps not in the batch's eps_list");
    int count = s.counts_per_eps[idx];
    worst = std::max(worst, count);
    double per_run_bound = static_cast<double>(l_eps) * s.exclusion_count;
    bool ok = count <= tight && count <= relaxed + 1e-9 && count <= per_run_bound;
    if (!ok) {
      v.pass = false;
      detail << "run " << s.run << ": count=" << count << " K=" << s.exclusion_count
             << " VIOLATION\n";
    }
  }
  detail << "worst_count=" << worst << " margin_tight=" << (tight - worst)
         << " margin_relaxed=" << (relaxed - worst);
  v.detail = detail.str();
  return v;
}

Verdict certify_stoch(const std::vector<RunSummary>& batch, double z, int class_size,
                      double eps) {
  Verdict v;
  std::ostringstream detail;
  const double bound = z * (class_size - 1);
  const std::size_t n = batch.size();
  std::size_t excluded = 0, settled = 0, kept = 0;
  for (const RunSummary& s : batch) {
    if (s.excluded_true || s.empty_class) {
      ++excluded;
      continue;
    }
    ++kept;
    std::size_t idx = s.eps_list.size();
    for (std::size_t e = 0; e < s.eps_list.size(); ++e)
      if (std::abs(s.eps_list[e] - eps) < 1e-12) idx = e;
    if (idx == s.eps_list.size())
      throw std::invalid_argument("certify_stoch: eps not in the batch's eps_list");
    if (s.settled_per_eps[idx]) ++settled;
  }
  double rate = n ? static_cast<double>(excluded) / n : 0.0;
  if (bound >= 1.0) {
    detail << "exclusion bound z(|M|-1)=" << bound
           << " >= 1: the guarantee is vacuous (warning); rate=" << rate << "\n";
  } else {
    double margin = 3.0 * std::sqrt(bound * (1.0 - bound) / static_cast<double>(n));
    bool ok = rate <= bound + margin;
    detail << "exclusion rate=" << rate << " threshold=" << bound + margin
           << (ok ? "" : " VIOLATION") << "\n";
    if (!ok) v.pass = false;
  }
  double frac = kept ? static_cast<double>(settled) / kept : 0.0;
  bool ok = frac >= 0.95;
  detail << "settled fraction among non-excluded=" << frac << " required=0.95"
         << (ok ? "" : " VIOLATION");
  if (!ok) v.pass = false;
  v.detail = detail.str();
  return v;
}

std::string trace_record_json(const TraceRecord& rec) {
  json j;
  j["t"] = rec.t;
  j["action"] = rec.action;
  j["obs"] = rec.percept.observation;
  j["reward"] = rec.percept.reward_index;
  j["alive"] = rec.alive;
  j["chosen"] = rec.chosen;
  if (rec.gap_measured) {
    j["v_opt"] = rec.v_opt;
    j["v_agent"] = rec.v_agent;
    j["gap"] = rec.gap;
  } else {
    j["v_opt"] = nullptr;
    j["v_agent"] = nullptr;
    j["gap"] = nullptr;
  }
  j["excluded"] = rec.exclusions;
  j["logratio_true"] = std::max(rec.logratio_true, -1e308);
  return j.dump();
}

BatchResult batch_run(const ExperimentConfig& cfg, const std::string& outdir) {
  cfg.validate();
  BatchResult result;
  std::vector<EpisodeResult> episodes(static_cast<std::size_t>(cfg.runs));
  int jobs = std::min(cfg.jobs, cfg.runs);
  if (jobs <= 1) {
    for (int r = 0; r < cfg.runs; ++r) episodes[static_cast<std::size_t>(r)] = run_episode(cfg, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        try {
          for (int r = next.fetch_add(1); r < cfg.runs; r = next.fetch_add(1))
            episodes[static_cast<std::size_t>(r)] = run_episode(cfg, r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (auto& th : workers) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const std::string hash = cfg.config_hash();
  if (!outdir.empty()) {
    std::filesystem::create_directories(outdir);
    for (int r = 0; r < cfg.runs; ++r) {
      std::string path =
          outdir + "/trace_" + hash + "_run" + std::to_string(r) + ".jsonl";
      std::ofstream out(path, std::ios::trunc);
      for (const TraceRecord& rec : episodes[static_cast<std::size_t>(r)].trace)
        out << trace_record_json(rec) << "\n";
      result.trace_files.push_back(path);
    }
    std::string spath = outdir + "/summary_" + hash + ".csv";
    std::ofstream out(spath, std::ios::trunc);
    out << "run,t_opt";
    for (double e : cfg.eps_list) out << ",count_eps_" << e << ",settled_eps_" << e;
    out << ",excluded,empty_class,K\n";
    for (const auto& ep : episodes) {
      const RunSummary& s = ep.summary;
      out << s.run << "," << s.t_opt;
      for (std::size_t e = 0; e < cfg.eps_list.size(); ++e)
        out << "," << s.counts_per_eps[e] << "," << static_cast<int>(s.settled_per_eps[e]);
      out << "," << (s.excluded_true ? 1 : 0) << "," << (s.empty_class ? 1 : 0) << ","
          << s.exclusion_count << "\n";
    }
    result.summary_file = spath;
  }
  for (auto& ep : episodes) result.summaries.push_back(std::move(ep.summary));
  return result;
}

}  // namespace optirl
