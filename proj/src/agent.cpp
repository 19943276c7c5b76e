#include "optirl/agent.hpp"

#include <algorithm>
#include <cmath>

namespace optirl {

AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "conservative") return AgentKind::ConservativeDeterministic;
  if (s == "liberal") return AgentKind::LiberalDeterministic;
  if (s == "stochastic") return AgentKind::StochasticThreshold;
  if (s == "compact_radius") return AgentKind::CompactRadius;
  if (s == "compact_cover") return AgentKind::CompactCover;
  throw std::invalid_argument("unknown agent kind: " + s);
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::ConservativeDeterministic: return "conservative";
    case AgentKind::LiberalDeterministic: return "liberal";
    case AgentKind::StochasticThreshold: return "stochastic";
    case AgentKind::CompactRadius: return "compact_radius";
    case AgentKind::CompactCover: return "compact_cover";
  }
  return "?";
}

std::size_t HypothesisState::alive_count() const {
  return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), 1));
}

double HoeffdingRadius::radius_at(int t, const History& h, double z) const {
  if (!(z > 0.0 && z < 1.0))
    throw std::invalid_argument("hoeffding radius: z must lie in (0,1)");
  std::vector<long long> counts(static_cast<std::size_t>(num_states_) * num_actions_, 0);
  double best = 1.0;
  int steps = std::min<int>(t, static_cast<int>(h.length()));
  int state = 0;
  for (int i = 0; i < steps; ++i) {
    const Step& step = h.at(static_cast<std::size_t>(i));
    ++counts[static_cast<std::size_t>(state) * num_actions_ + step.action];
    state = step.percept.observation % num_states_;
    double tt = static_cast<double>(i + 1);
    double log_term = std::log(2.0 * num_states_ * num_actions_ * tt * (tt + 1.0) / z);
    double widest = 0.0;
    for (long long n : counts) {
      double w = n > 0 ? std::sqrt(log_term / (2.0 * static_cast<double>(n))) : 1.0;
      widest = std::max(widest, std::min(1.0, w));
    }
    best = std::min(best, widest);
  }
  return best;
}

std::vector<char> enlarge_by_radius(const std::vector<std::vector<double>>& dtilde_matrix,
                                    const std::vector<char>& alive_centers, double r) {
  if (r < 0.0) throw std::invalid_argument("enlarge_by_radius: negative radius");
  std::size_t n = alive_centers.size();
  std::vector<char> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive_centers[i]) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (dtilde_matrix[i][j] <= r + 1e-12) out[j] = 1;
  }
  return out;
}

namespace {

std::vector<PolicyFn> default_probe_policies(int num_actions) {
  std::vector<PolicyFn> probes;
  for (int a = 0; a < num_actions; ++a)
    probes.push_back([a](const History&) { return a; });
  return probes;
}

std::vector<std::vector<double>> pairwise_dtilde(const std::vector<EnvPtr>& envs,
                                                 int horizon) {
  std::vector<History> probe_histories{History{}};
  std::vector<PolicyFn> probes =
      envs.empty() ? std::vector<PolicyFn>{}
                   : default_probe_policies(envs.front()->alphabets().num_actions);
  std::size_t n = envs.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      m[i][j] = m[j][i] = dtilde_horizon(*envs[i], *envs[j], horizon, probe_histories, probes);
  return m;
}

std::vector<double> grid_points(double lo, double hi, int n) {
  std::vector<double> pts;
  if (n == 1) {
    pts.push_back(0.5 * (lo + hi));
  } else {
    for (int i = 0; i < n; ++i)
      pts.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
  }
  return pts;
}

void cartesian(const std::vector<std::vector<double>>& axes, std::size_t dim,
               std::vector<double>& current, std::vector<std::vector<double>>& out) {
  if (dim == axes.size()) {
    out.push_back(current);
    return;
  }
  for (double v : axes[dim]) {
    current.push_back(v);
    cartesian(axes, dim + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<EnvPtr> build_cover(const ParametricEnvFamily& family, double epsilon,
                                Discount gamma, int horizon) {
  double radius = epsilon * (1.0 - gamma.value());
  if (!(radius > 0.0)) throw std::invalid_argument("build_cover: radius must be positive");
  std::size_t dims = family.parameter_box.size();
  if (dims == 0) throw std::invalid_argument("build_cover: empty parameter box");

  std::vector<History> probe_histories{History{}};

  for (int n = 1; n <= 1000; ++n) {
    std::vector<std::vector<double>> center_axes, sample_axes;
    for (auto [lo, hi] : family.parameter_box) {
      center_axes.push_back(grid_points(lo, hi, n));
      sample_axes.push_back(grid_points(lo, hi, n == 1 ? 9 : 8 * (n - 1) + 1));
    }
    std::vector<std::vector<double>> center_params, sample_params;
    std::vector<double> scratch;
    cartesian(center_axes, 0, scratch, center_params);
    cartesian(sample_axes, 0, scratch, sample_params);
    if (sample_params.size() > 100000)
      throw std::invalid_argument("build_cover: sample grid exceeds guard");

    std::vector<EnvPtr> centers;
    for (const auto& p : center_params) centers.push_back(family.instantiate(p));
    std::vector<PolicyFn> probes =
        default_probe_policies(centers.front()->alphabets().num_actions);

    bool covered = true;
    for (const auto& p : sample_params) {
      EnvPtr member = family.instantiate(p);
      double nearest = 2.0;
      for (const auto& c : centers) {
        nearest = std::min(
            nearest, dtilde_horizon(*member, *c, horizon, probe_histories, probes));
        if (nearest <= radius + 1e-9) break;
      }
      if (nearest > radius + 1e-9) {
        covered = false;
        break;
      }
    }
    if (covered) return centers;
  }
  throw CoverVerificationError("build_cover: no grid up to 1000 points per axis covers the family");
}

Agent::Agent(std::vector<EnvPtr> class_enum, AgentConfig config, Discount gamma,
             std::shared_ptr<Planner> planner)
    : class_(std::move(class_enum)),
      config_(std::move(config)),
      gamma_(gamma),
      horizon_(horizon_for_epsilon(config_.eps_plan, gamma)),
      planner_(std::move(planner)) {
  if (class_.empty()) throw std::invalid_argument("agent: empty environment class");
  if (!planner_) planner_ = std::make_shared<Planner>(config_.node_budget);
  bool needs_det = config_.kind == AgentKind::ConservativeDeterministic ||
                   config_.kind == AgentKind::LiberalDeterministic;
  for (const auto& env : class_) {
    if (needs_det && !env->deterministic())
      throw std::invalid_argument("agent: deterministic kinds require a deterministic class");
    if (!(env->alphabets() == class_.front()->alphabets()))
      throw std::invalid_argument("agent: environments must share alphabets");
  }
  if (config_.kind == AgentKind::CompactRadius) {
    if (!config_.radius_provider)
      throw std::invalid_argument("agent: compact_radius kind needs a radius provider");
    dtilde_matrix_ = pairwise_dtilde(class_, config_.dtilde_probe_horizon);
  }
  if (config_.kind != AgentKind::ConservativeDeterministic &&
      config_.kind != AgentKind::LiberalDeterministic) {
    if (!(config_.z > 0.0 && config_.z < 1.0))
      throw std::invalid_argument("agent: threshold z must lie in (0,1)");
  }
  state_.alive.assign(class_.size(), 1);
  state_.likelihoods = LikelihoodState::zeros(class_.size());
  effective_alive_ = state_.alive;
}

int Agent::act(const History& h) {
  switch (config_.kind) {
    case AgentKind::ConservativeDeterministic: {
      if (state_.committed_env && state_.alive[*state_.committed_env]) {
        // Replan under the committed hypothesis; by time-consistency of
        // geometric discounting the value is unchanged up to truncation.
        std::size_t idx = *state_.committed_env;
        int action = 0;
        double value = planner_->optimal_value(*class_[idx], h, horizon_, gamma_, &action);
        plan_ = Plan{idx, action, value, horizon_};
      } else {
        plan_ = planner_->optimistic_choice(class_, state_.alive, h, horizon_, gamma_);
        state_.committed_env = plan_.env_index;
      }
      break;
    }
    case AgentKind::LiberalDeterministic:
    case AgentKind::StochasticThreshold:
    case AgentKind::CompactCover:
      plan_ = planner_->optimistic_choice(class_, state_.alive, h, horizon_, gamma_);
      break;
    case AgentKind::CompactRadius: {
      int t = static_cast<int>(h.length());
      last_radius_ = config_.radius_provider->radius_at(t, h, config_.z);
      effective_alive_ = enlarge_by_radius(dtilde_matrix_, state_.alive, last_radius_);
      plan_ = planner_->optimistic_choice(class_, effective_alive_, h, horizon_, gamma_);
      break;
    }
  }
  return plan_.root_action;
}

void Agent::observe(const History& h_prev, int action, const Percept& percept) {
  state_.likelihoods =
      update_log_likelihoods(state_.likelihoods, class_, h_prev, action, percept);
  state_.exclusions_last_step = 0;
  switch (config_.kind) {
    case AgentKind::ConservativeDeterministic:
    case AgentKind::LiberalDeterministic:
      for (std::size_t i = 0; i < class_.size(); ++i) {
        if (!state_.alive[i]) continue;
        if (!is_consistent_step(*class_[i], h_prev, action, percept)) {
          state_.alive[i] = 0;
          ++state_.exclusions_last_step;
        }
      }
      break;
    default:
      step_threshold();
      break;
  }
  state_.total_exclusions += state_.exclusions_last_step;
}

void Agent::step_threshold() {
  const auto& logs = state_.likelihoods.log_likelihoods;
  double denom = kNegInf;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (!config_.denominator_full_class && !state_.alive[i]) continue;
    denom = std::max(denom, logs[i]);
  }
  double cutoff = std::log(config_.z) - 1e-12;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (!state_.alive[i]) continue;
    if (logs[i] - denom < cutoff) {
      state_.alive[i] = 0;
      ++state_.exclusions_last_step;
    }
  }
}

double Agent::log_ratio(std::size_t idx) const {
  const auto& logs = state_.likelihoods.log_likelihoods;
  double denom = kNegInf;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (!config_.denominator_full_class && !state_.alive[i]) continue;
    denom = std::max(denom, logs[i]);
  }
  return logs[idx] - denom;
}

}  // namespace optirl
