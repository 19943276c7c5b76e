#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "optirl/planning.hpp"

namespace optirl {

enum class AgentKind {
  ConservativeDeterministic,
  LiberalDeterministic,
  StochasticThreshold,
  CompactRadius,
  CompactCover,
};

AgentKind agent_kind_from_string(const std::string& s);
std::string to_string(AgentKind kind);

// Shrinking radius around the surviving set; the true environment stays
// within it with probability p.
class ConfidenceRadiusProvider {
 public:
  virtual ~ConfidenceRadiusProvider() = default;
  virtual double radius_at(int t, const History& h, double z) const = 0;
  virtual std::string name() const = 0;
};

class ZeroRadius : public ConfidenceRadiusProvider {
 public:
  double radius_at(int, const History&, double) const override { return 0.0; }
  std::string name() const override { return "zero"; }
};

class ConstantRadius : public ConfidenceRadiusProvider {
 public:
  explicit ConstantRadius(double r) : r_(r) {}
  double radius_at(int, const History&, double) const override { return r_; }
  std::string name() const override { return "constant"; }

 private:
  double r_;
};

// Per-(observation, action) Hoeffding interval sqrt(log(2 S A t(t+1)/z) / 2n),
// mapped to a TV radius by taking the max over pairs and clamping to 1.
// Returned as a running minimum over time so the trace is non-increasing.
class HoeffdingRadius : public ConfidenceRadiusProvider {
 public:
  HoeffdingRadius(int num_states, int num_actions)
      : num_states_(num_states), num_actions_(num_actions) {}
  double radius_at(int t, const History& h, double z) const override;
  std::string name() const override { return "hoeffding"; }

 private:
  int num_states_;
  int num_actions_;
};

struct AgentConfig {
  AgentKind kind = AgentKind::ConservativeDeterministic;
  double z = 0.1;
  double eps_plan = 1e-3;
  // Likelihood-ratio denominator for threshold exclusion: max over the
  // original class, or over the surviving class when false.
  bool denominator_full_class = true;
  std::shared_ptr<const ConfidenceRadiusProvider> radius_provider;
  int dtilde_probe_horizon = 1;  // horizon for pairwise distances on grids
  long long node_budget = 10'000'000;
};

// The surviving class M_t plus per-environment log-likelihoods.
struct HypothesisState {
  std::vector<char> alive;
  LikelihoodState likelihoods;
  std::optional<std::size_t> committed_env;
  int exclusions_last_step = 0;
  int total_exclusions = 0;

  std::size_t alive_count() const;
};

// Grid environments within dtilde-distance r of some alive center.
std::vector<char> enlarge_by_radius(const std::vector<std::vector<double>>& dtilde_matrix,
                                    const std::vector<char>& alive_centers, double r);

// Finite set of centers covering every grid-sampled member of the family
// within TV radius epsilon*(1-gamma) at horizon H.
std::vector<EnvPtr> build_cover(const ParametricEnvFamily& family, double epsilon,
                                Discount gamma, int horizon);

struct CoverVerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One optimistic agent: consistency elimination (conservative / liberal
// variants) for deterministic classes, likelihood-threshold exclusion for
// finite stochastic classes, and threshold plus confidence radius on
// grid-discretized compact classes. Copyable; snapshots share the planner's
// memo table only.
class Agent {
 public:
  Agent(std::vector<EnvPtr> class_enum, AgentConfig config, Discount gamma,
        std::shared_ptr<Planner> planner);

  // Plan and pick the action for the step after history h.
  int act(const History& h);
  // Fold the newly perceived step into likelihoods and the surviving set.
  void observe(const History& h_prev, int action, const Percept& percept);

  const HypothesisState& state() const { return state_; }
  const Plan& last_plan() const { return plan_; }
  const std::vector<EnvPtr>& class_enumeration() const { return class_; }
  const AgentConfig& config() const { return config_; }
  const std::shared_ptr<Planner>& planner() const { return planner_; }
  int horizon() const { return horizon_; }
  Discount discount() const { return gamma_; }
  double last_radius() const { return last_radius_; }
  const std::vector<char>& effective_alive() const { return effective_alive_; }

  // log-likelihood of env idx minus the max over the threshold denominator.
  double log_ratio(std::size_t idx) const;

 private:
  void step_deterministic(const History& h);
  void step_elimination(const History& h_prev, int action, const Percept& percept);
  void step_threshold();

  std::vector<EnvPtr> class_;
  AgentConfig config_;
  Discount gamma_;
  int horizon_;
  std::shared_ptr<Planner> planner_;
  HypothesisState state_;
  Plan plan_;
  double last_radius_ = 0.0;
  std::vector<char> effective_alive_;  // M~_t for the compact-radius agent
  std::vector<std::vector<double>> dtilde_matrix_;
};

}  // namespace optirl
