#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "optirl/core.hpp"

namespace optirl {

// A history-based environment: a conditional distribution over percepts
// given (history, action). Deterministic environments are the 0/1 case.
class EnvironmentModel {
 public:
  virtual ~EnvironmentModel() = default;

  virtual const Alphabets& alphabets() const = 0;
  virtual const std::string& name() const = 0;
  virtual bool deterministic() const = 0;

  // Probability vector over the flattened percept alphabet.
  virtual std::vector<double> percept_distribution(const History& h, int action) const = 0;

  // Finite-state machinery. Environments backed by an internal state expose
  // it so the planner can memoize on (state, depth). History-dependent
  // kernels return nullopt and the planner falls back to history recursion.
  virtual std::optional<int> num_states() const { return std::nullopt; }
  virtual int state_after(const History& h) const;
  virtual int next_state(int state, int action) const;
  virtual const std::vector<double>& distribution_at(int state, int action) const;
};

using EnvPtr = std::shared_ptr<const EnvironmentModel>;

// Computable realization of an environment as a finite-state machine:
// the next internal state depends on (state, action) only, the percept is
// drawn from a per-(state, action) distribution.
class FiniteStateEnv : public EnvironmentModel {
 public:
  struct Cell {
    int next_state = 0;
    std::vector<double> percept_probs;  // over the flattened percept alphabet
  };

  // table[state][action]; distributions must sum to 1 within 1e-12 and are
  // renormalized exactly once here.
  FiniteStateEnv(std::string name, Alphabets alphabets, int initial_state,
                 std::vector<std::vector<Cell>> table);

  const Alphabets& alphabets() const override { return alphabets_; }
  const std::string& name() const override { return name_; }
  bool deterministic() const override { return deterministic_; }
  std::vector<double> percept_distribution(const History& h, int action) const override;
  std::optional<int> num_states() const override { return static_cast<int>(table_.size()); }
  int state_after(const History& h) const override;
  int next_state(int state, int action) const override;
  const std::vector<double>& distribution_at(int state, int action) const override;

  int initial_state() const { return initial_state_; }

 private:
  static constexpr std::size_t kReplayCacheCap = 1 << 20;

  std::string name_;
  Alphabets alphabets_;
  int initial_state_;
  std::vector<std::vector<Cell>> table_;
  bool deterministic_;
  // Prefix-hash -> replayed state. Not synchronized; share an instance
  // across threads only for read paths that avoid state_after.
  mutable std::unordered_map<std::uint64_t, int> replay_cache_;
};

// Fully history-dependent environment defined by a kernel function.
class KernelEnv : public EnvironmentModel {
 public:
  using Kernel = std::function<std::vector<double>(const History&, int)>;

  KernelEnv(std::string name, Alphabets alphabets, Kernel kernel, bool deterministic);

  const Alphabets& alphabets() const override { return alphabets_; }
  const std::string& name() const override { return name_; }
  bool deterministic() const override { return deterministic_; }
  std::vector<double> percept_distribution(const History& h, int action) const override;

 private:
  std::string name_;
  Alphabets alphabets_;
  Kernel kernel_;
  bool deterministic_;
};

// Compact class of environments: a parameter box plus an instantiation map.
struct ParametricEnvFamily {
  std::string name;
  std::vector<std::pair<double, double>> parameter_box;
  std::function<EnvPtr(const std::vector<double>&)> instantiate;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-environment log-likelihoods log nu(h_t | a_{1:t}); -inf marks an
// environment that assigned probability zero to an observed percept.
struct LikelihoodState {
  std::vector<double> log_likelihoods;
  std::size_t history_length = 0;

  static LikelihoodState zeros(std::size_t num_envs) {
    return LikelihoodState{std::vector<double>(num_envs, 0.0), 0};
  }
};

std::vector<double> percept_distribution(const EnvironmentModel& env, const History& h,
                                         int action);

Percept sample_percept(const EnvironmentModel& env, const History& h, int action,
                       std::mt19937_64& rng);

// Deterministic consistency: replaying h's actions reproduces its percepts.
bool is_consistent(const EnvironmentModel& env, const History& h);

// Check of the newest step only; valid when the prefix was already consistent.
bool is_consistent_step(const EnvironmentModel& env, const History& h_prev, int action,
                        const Percept& percept);

LikelihoodState update_log_likelihoods(const LikelihoodState& state,
                                       const std::vector<EnvPtr>& envs,
                                       const History& h_prev, int action,
                                       const Percept& percept);

using PolicyFn = std::function<int(const History&)>;

// Total variation between the two percept-process laws restricted to the
// next `horizon` steps, actions supplied by `policy`. Lower bound on the
// infinite-horizon TV distance.
double tv_distance_horizon(const EnvironmentModel& env1, const EnvironmentModel& env2,
                           const History& h, const PolicyFn& policy, int horizon);

// Max of tv_distance_horizon over the supplied (history, policy) probes;
// lower bound on the worst-case distance d-tilde.
double dtilde_horizon(const EnvironmentModel& env1, const EnvironmentModel& env2,
                      int horizon, const std::vector<History>& probe_histories,
                      const std::vector<PolicyFn>& probe_policies);

// Uniform double in [0,1) from the top 53 bits; portable across platforms.
inline double canonical_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace optirl
