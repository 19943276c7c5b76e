#include "optirl/environment.hpp"

#include <algorithm>
#include <cmath>

namespace optirl {

namespace {
constexpr double kNormTolerance = 1e-12;
}

int EnvironmentModel::state_after(const History&) const {
  throw std::logic_error("environment has no internal state");
}
int EnvironmentModel::next_state(int, int) const {
  throw std::logic_error("environment has no internal state");
}
const std::vector<double>& EnvironmentModel::distribution_at(int, int) const {
  throw std::logic_error("environment has no internal state");
}

FiniteStateEnv::FiniteStateEnv(std::string name, Alphabets alphabets, int initial_state,
                               std::vector<std::vector<Cell>> table)
    : name_(std::move(name)),
      alphabets_(std::move(alphabets)),
      initial_state_(initial_state),
      table_(std::move(table)) {
  alphabets_.validate();
  const int num_states = static_cast<int>(table_.size());
  if (num_states < 1) throw std::invalid_argument(name_ + ": needs at least one state");
  if (initial_state_ < 0 || initial_state_ >= num_states)
    throw std::invalid_argument(name_ + ": initial state out of range");
  deterministic_ = true;
  for (int s = 0; s < num_states; ++s) {
    auto& row = table_[s];
    if (static_cast<int>(row.size()) != alphabets_.num_actions)
      throw std::invalid_argument(name_ + ": state " + std::to_string(s) +
                                  " must have one cell per action");
    for (auto& cell : row) {
      if (cell.next_state < 0 || cell.next_state >= num_states)
        throw std::invalid_argument(name_ + ": next state out of range in state " +
                                    std::to_string(s));
      if (static_cast<int>(cell.percept_probs.size()) != alphabets_.num_percepts())
        throw std::invalid_argument(name_ + ": percept distribution has wrong size in state " +
                                    std::to_string(s));
      double sum = 0.0;
      for (double p : cell.percept_probs) {
        if (p < 0.0)
          throw std::invalid_argument(name_ + ": negative probability in state " +
                                      std::to_string(s));
        sum += p;
      }
      if (std::abs(sum - 1.0) > kNormTolerance)
        throw std::invalid_argument(name_ + ": percept distribution in state " +
                                    std::to_string(s) + " sums to " + std::to_string(sum));
      for (double& p : cell.percept_probs) p /= sum;
      for (double p : cell.percept_probs)
        if (p != 0.0 && p != 1.0) deterministic_ = false;
    }
  }
}

std::vector<double> FiniteStateEnv::percept_distribution(const History& h, int action) const {
  if (action < 0 || action >= alphabets_.num_actions)
    throw std::invalid_argument("percept_distribution: action out of range");
  return table_[state_after(h)][action].percept_probs;
}

int FiniteStateEnv::state_after(const History& h) const {
  const std::size_t len = h.length();
  // Resume the replay from the deepest cached prefix; histories are keyed by
  // rolling hash, so extensions of earlier queries resolve in O(suffix).
  std::size_t k = len;
  int s = initial_state_;
  for (; k > 0; --k) {
    auto it = replay_cache_.find(h.prefix_hash(k));
    if (it != replay_cache_.end()) {
      s = it->second;
      break;
    }
  }
  if (replay_cache_.size() > kReplayCacheCap) replay_cache_.clear();
  for (std::size_t i = k; i < len; ++i) {
    s = table_[s][h.at(i).action].next_state;
    replay_cache_.emplace(h.prefix_hash(i + 1), s);
  }
  return s;
}

int FiniteStateEnv::next_state(int state, int action) const {
  return table_[state][action].next_state;
}

const std::vector<double>& FiniteStateEnv::distribution_at(int state, int action) const {
  return table_[state][action].percept_probs;
}

KernelEnv::KernelEnv(std::string name, Alphabets alphabets, Kernel kernel, bool deterministic)
    : name_(std::move(name)),
      alphabets_(std::move(alphabets)),
      kernel_(std::move(kernel)),
      deterministic_(deterministic) {
  alphabets_.validate();
}

std::vector<double> KernelEnv::percept_distribution(const History& h, int action) const {
  if (action < 0 || action >= alphabets_.num_actions)
    throw std::invalid_argument("percept_distribution: action out of range");
  return kernel_(h, action);
}

std::vector<double> percept_distribution(const EnvironmentModel& env, const History& h,
                                         int action) {
  return env.percept_distribution(h, action);
}

Percept sample_percept(const EnvironmentModel& env, const History& h, int action,
                       std::mt19937_64& rng) {
  std::vector<double> probs = env.percept_distribution(h, action);
  double u = canonical_uniform(rng);
  double acc = 0.0;
  int last_support = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0.0) continue;
    last_support = i;
    acc += probs[i];
    if (u < acc) return env.alphabets().percept_at(i);
  }
  return env.alphabets().percept_at(last_support);
}

bool is_consistent(const EnvironmentModel& env, const History& h) {
  if (!env.deterministic())
    throw std::invalid_argument("is_consistent: environment must be deterministic");
  History prefix;
  for (const Step& step : h.steps()) {
    if (!is_consistent_step(env, prefix, step.action, step.percept)) return false;
    prefix.append(step.action, step.percept);
  }
  return true;
}

bool is_consistent_step(const EnvironmentModel& env, const History& h_prev, int action,
                        const Percept& percept) {
  if (!env.deterministic())
    throw std::invalid_argument("is_consistent_step: environment must be deterministic");
  std::vector<double> probs = env.percept_distribution(h_prev, action);
  return probs[env.alphabets().percept_index(percept)] == 1.0;
}

LikelihoodState update_log_likelihoods(const LikelihoodState& state,
                                       const std::vector<EnvPtr>& envs,
                                       const History& h_prev, int action,
                                       const Percept& percept) {
  if (state.history_length != h_prev.length())
    throw std::invalid_argument("update_log_likelihoods: history length mismatch");
  LikelihoodState out = state;
  out.history_length = h_prev.length() + 1;
  for (std::size_t i = 0; i < envs.size(); ++i) {
    if (out.log_likelihoods[i] == kNegInf) continue;
    std::vector<double> probs = envs[i]->percept_distribution(h_prev, action);
    double p = probs[envs[i]->alphabets().percept_index(percept)];
    out.log_likelihoods[i] = p > 0.0 ? out.log_likelihoods[i] + std::log(p) : kNegInf;
  }
  return out;
}

namespace {

void tv_recurse(const EnvironmentModel& env1, const EnvironmentModel& env2, History& h,
                const PolicyFn& policy, int depth, double p1, double p2, double& acc) {
  if (depth == 0) {
    acc += std::abs(p1 - p2);
    return;
  }
  int action = policy(h);
  std::vector<double> d1 = env1.percept_distribution(h, action);
  std::vector<double> d2 = env2.percept_distribution(h, action);
  const Alphabets& alph = env1.alphabets();
  for (int i = 0; i < alph.num_percepts(); ++i) {
    if (d1[i] == 0.0 && d2[i] == 0.0) continue;
    h.append(action, alph.percept_at(i));
    tv_recurse(env1, env2, h, policy, depth - 1, p1 * d1[i], p2 * d2[i], acc);
    h.pop();
  }
}

}  // namespace

double tv_distance_horizon(const EnvironmentModel& env1, const EnvironmentModel& env2,
                           const History& h, const PolicyFn& policy, int horizon) {
  if (horizon < 0) throw std::invalid_argument("tv_distance_horizon: negative horizon");
  if (!(env1.alphabets() == env2.alphabets()))
    throw std::invalid_argument("tv_distance_horizon: alphabets differ");
  double tree = std::pow(static_cast<double>(env1.alphabets().num_percepts()), horizon);
  if (tree > 1e6)
    throw std::invalid_argument("tv_distance_horizon: outcome tree exceeds guard");
  History scratch = h;
  double acc = 0.0;
  tv_recurse(env1, env2, scratch, policy, horizon, 1.0, 1.0, acc);
  return 0.5 * acc;
}

double dtilde_horizon(const EnvironmentModel& env1, const EnvironmentModel& env2,
                      int horizon, const std::vector<History>& probe_histories,
                      const std::vector<PolicyFn>& probe_policies) {
  if (probe_histories.empty() || probe_policies.empty())
    throw std::invalid_argument("dtilde_horizon: probes must be non-empty");
  double best = 0.0;
  for (const History& h : probe_histories)
    for (const PolicyFn& pi : probe_policies)
      best = std::max(best, tv_distance_horizon(env1, env2, h, pi, horizon));
  return best;
}

}  // namespace optirl
