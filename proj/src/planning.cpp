#include "optirl/planning.hpp"

#include <algorithm>

namespace optirl {

int ActionTree::act(const Alphabets& alphabets, const History& suffix,
                    std::size_t from) const {
  const ActionTree* node = this;
  for (std::size_t i = from; i < suffix.length(); ++i) {
    if (node->children.empty())
      throw std::out_of_range("ActionTree: percept sequence deeper than the tree");
    node = &node->children[alphabets.percept_index(suffix.at(i).percept)];
  }
  return node->action;
}

void Planner::charge_node() {
  if (++nodes_ > node_budget_) throw BudgetExceeded(nodes_);
}

Planner::Entry Planner::state_value(const EnvironmentModel& env, int state, int depth,
                                    double gamma) {
  if (depth == 0) return Entry{0.0, 0};
  StateKey key{&env, static_cast<std::int64_t>(state) * 1'000'000 + depth};
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  charge_node();
  const Alphabets& alph = env.alphabets();
  Entry best{-1.0, 0};
  for (int a = 0; a < alph.num_actions; ++a) {
    const std::vector<double>& probs = env.distribution_at(state, a);
    int next = env.next_state(state, a);
    double v = 0.0;
    double cont = depth > 1 ? state_value(env, next, depth - 1, gamma).value : 0.0;
    for (int i = 0; i < alph.num_percepts(); ++i) {
      if (probs[i] == 0.0) continue;
      double r = alph.reward_values[i % alph.num_rewards()];
      v += probs[i] * (r + gamma * cont);
    }
    if (v > best.value) best = Entry{v, a};
  }
  memo_.emplace(key, best);
  return best;
}

Planner::Entry Planner::history_value(const EnvironmentModel& env, History& h, int depth,
                                      double gamma) {
  if (depth == 0) return Entry{0.0, 0};
  charge_node();
  const Alphabets& alph = env.alphabets();
  Entry best{-1.0, 0};
  for (int a = 0; a < alph.num_actions; ++a) {
    std::vector<double> probs = env.percept_distribution(h, a);
    double v = 0.0;
    for (int i = 0; i < alph.num_percepts(); ++i) {
      if (probs[i] == 0.0) continue;
      Percept p = alph.percept_at(i);
      double r = alph.reward_of(p);
      double cont = 0.0;
      if (depth > 1) {
        h.append(a, p);
        cont = history_value(env, h, depth - 1, gamma).value;
        h.pop();
      }
      v += probs[i] * (r + gamma * cont);
    }
    if (v > best.value) best = Entry{v, a};
  }
  return best;
}

double Planner::optimal_value(const EnvironmentModel& env, const History& h, int l,
                              Discount gamma, int* root_action) {
  if (l < 0) throw std::invalid_argument("optimal_value: negative horizon");
  nodes_ = 0;  // the budget guards a single planning call
  Entry e;
  if (env.num_states()) {
    e = state_value(env, env.state_after(h), l, gamma.value());
  } else {
    History scratch = h;
    e = history_value(env, scratch, l, gamma.value());
  }
  if (root_action) *root_action = l == 0 ? 0 : e.action;
  return e.value;
}

namespace {

double policy_value_recurse(const EnvironmentModel& env, const PolicyFn& policy, History& h,
                            int depth, double gamma) {
  if (depth == 0) return 0.0;
  const Alphabets& alph = env.alphabets();
  int a = policy(h);
  if (a < 0 || a >= alph.num_actions)
    throw std::invalid_argument("policy_value: policy returned invalid action");
  std::vector<double> probs = env.percept_distribution(h, a);
  double v = 0.0;
  for (int i = 0; i < alph.num_percepts(); ++i) {
    if (probs[i] == 0.0) continue;
    Percept p = alph.percept_at(i);
    double cont = 0.0;
    if (depth > 1) {
      h.append(a, p);
      cont = policy_value_recurse(env, policy, h, depth - 1, gamma);
      h.pop();
    }
    v += probs[i] * (alph.reward_of(p) + gamma * cont);
  }
  return v;
}

}  // namespace

double Planner::policy_value(const EnvironmentModel& env, const PolicyFn& policy,
                             const History& h, int l, Discount gamma) {
  if (l < 0) throw std::invalid_argument("policy_value: negative horizon");
  nodes_ = 0;
  History scratch = h;
  return policy_value_recurse(env, policy, scratch, l, gamma.value());
}

ActionTree Planner::optimal_tree(const EnvironmentModel& env, const History& h, int l,
                                 Discount gamma) {
  ActionTree tree;
  if (l == 0) return tree;
  optimal_value(env, h, l, gamma, &tree.action);
  const Alphabets& alph = env.alphabets();
  if (l > 1) {
    tree.children.resize(alph.num_percepts());
    History scratch = h;
    for (int i = 0; i < alph.num_percepts(); ++i) {
      scratch.append(tree.action, alph.percept_at(i));
      tree.children[i] = optimal_tree(env, scratch, l - 1, gamma);
      scratch.pop();
    }
  }
  return tree;
}

Plan Planner::optimistic_choice(const std::vector<EnvPtr>& class_view, const History& h,
                                int l, Discount gamma) {
  std::vector<char> alive(class_view.size(), 1);
  return optimistic_choice(class_view, alive, h, l, gamma);
}

Plan Planner::optimistic_choice(const std::vector<EnvPtr>& class_view,
                                const std::vector<char>& alive, const History& h, int l,
                                Discount gamma) {
  double best = -1.0;
  bool any = false;
  std::vector<double> values(class_view.size(), -1.0);
  std::vector<int> actions(class_view.size(), 0);
  for (std::size_t i = 0; i < class_view.size(); ++i) {
    if (!alive[i]) continue;
    any = true;
    values[i] = optimal_value(*class_view[i], h, l, gamma, &actions[i]);
    best = std::max(best, values[i]);
  }
  if (!any) throw EmptyClassError();
  for (std::size_t i = 0; i < class_view.size(); ++i) {
    if (!alive[i]) continue;
    if (values[i] >= best - kTieTolerance)
      return Plan{i, actions[i], values[i], l};
  }
  throw std::logic_error("optimistic_choice: unreachable");
}

}  // namespace optirl
