#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "optirl/environment.hpp"

namespace optirl {

// Depth-l deterministic policy: an action at the root and one subtree per
// percept. Defines an action for every percept sequence shorter than l.
struct ActionTree {
  int action = 0;
  std::vector<ActionTree> children;  // indexed by flattened percept; empty at leaves

  int act(const Alphabets& alphabets, const History& suffix, std::size_t from = 0) const;
};

struct Plan {
  std::size_t env_index = 0;
  int root_action = 0;
  double value = 0.0;
  int horizon = 0;
};

struct BudgetExceeded : std::runtime_error {
  explicit BudgetExceeded(long long nodes)
      : std::runtime_error("expectimax node budget exceeded after " +
                           std::to_string(nodes) + " nodes"),
        nodes_expanded(nodes) {}
  long long nodes_expanded;
};

struct EmptyClassError : std::runtime_error {
  EmptyClassError() : std::runtime_error("every hypothesis has been excluded") {}
};

// Depth-limited expectimax. Owns a per-environment memo table keyed on
// (internal state, remaining depth); memo entries are pure function values
// so a planner may be shared by an agent and its snapshots. The key uses the
// environment's address: keep every environment alive for the planner's
// lifetime, or a recycled address will serve another model's values.
class Planner {
 public:
  explicit Planner(long long node_budget = 10'000'000) : node_budget_(node_budget) {}

  // Max over depth-l policies of the expected l-truncated return. Action
  // ties break toward the smallest index.
  double optimal_value(const EnvironmentModel& env, const History& h, int l, Discount gamma,
                       int* root_action = nullptr);

  // Expected l-truncated return of following `policy` in env from h.
  double policy_value(const EnvironmentModel& env, const PolicyFn& policy, const History& h,
                      int l, Discount gamma);

  // Explicit optimal action tree; only for small l (tree has percepts^l nodes).
  ActionTree optimal_tree(const EnvironmentModel& env, const History& h, int l,
                          Discount gamma);

  // Joint argmax over (environment, policy). Value ties at 1e-9 resolve to
  // the first index in enumeration order.
  Plan optimistic_choice(const std::vector<EnvPtr>& class_view, const History& h, int l,
                         Discount gamma);
  Plan optimistic_choice(const std::vector<EnvPtr>& class_view,
                         const std::vector<char>& alive, const History& h, int l,
                         Discount gamma);

  long long nodes_expanded() const { return nodes_; }

  static constexpr double kTieTolerance = 1e-9;

 private:
  struct StateKey {
    const EnvironmentModel* env;
    std::int64_t state_depth;
    friend bool operator==(const StateKey&, const StateKey&) = default;
  };
  struct StateKeyHash {
    std::size_t operator()(const StateKey& k) const {
      return std::hash<const void*>()(k.env) ^
             std::hash<std::int64_t>()(k.state_depth * 0x9e3779b97f4a7c15LL);
    }
  };
  struct Entry {
    double value;
    int action;
  };

  Entry state_value(const EnvironmentModel& env, int state, int depth, double gamma);
  Entry history_value(const EnvironmentModel& env, History& h, int depth, double gamma);
  void charge_node();

  long long node_budget_;
  long long nodes_ = 0;
  std::unordered_map<StateKey, Entry, StateKeyHash> memo_;
};

}  // namespace optirl
