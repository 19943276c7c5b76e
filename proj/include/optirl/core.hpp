#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace optirl {

struct Percept {
  int observation = 0;
  int reward_index = 0;

  friend bool operator==(const Percept&, const Percept&) = default;
};

// Finite action/observation/reward alphabets. Rewards are a strictly
// increasing list of reals in [0,1]; percepts are (observation, reward)
// pairs flattened to a single index obs * |R| + reward.
struct Alphabets {
  int num_actions = 1;
  int num_observations = 1;
  std::vector<double> reward_values{0.0, 1.0};

  int num_rewards() const { return static_cast<int>(reward_values.size()); }
  int num_percepts() const { return num_observations * num_rewards(); }

  int percept_index(const Percept& p) const {
    return p.observation * num_rewards() + p.reward_index;
  }
  Percept percept_at(int index) const {
    return Percept{index / num_rewards(), index % num_rewards()};
  }
  double reward_of(const Percept& p) const { return reward_values[p.reward_index]; }

  void validate() const;

  friend bool operator==(const Alphabets&, const Alphabets&) = default;
};

struct Step {
  int action = 0;
  Percept percept;

  friend bool operator==(const Step&, const Step&) = default;
};

// Interaction record a1 o1 r1 ... at ot rt. Append-only.
class History {
 public:
  History() = default;

  std::size_t length() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  const Step& at(std::size_t i) const { return steps_.at(i); }
  const Step& back() const { return steps_.back(); }
  const std::vector<Step>& steps() const { return steps_; }

  void append(int action, Percept percept) {
    steps_.push_back(Step{action, percept});
    chain_.push_back(mix(prefix_hash(chain_.size()), steps_.back()));
  }
  void pop() {
    steps_.pop_back();
    chain_.pop_back();
  }

  History extended(int action, Percept percept) const {
    History h = *this;
    h.append(action, percept);
    return h;
  }

  // Rolling hash of the first k steps; lets environments cache replayed
  // state against extending histories without holding references to them.
  std::uint64_t prefix_hash(std::size_t k) const {
    return k == 0 ? 0x2545f4914f6cdd1dULL : chain_[k - 1];
  }
  std::uint64_t hash() const { return prefix_hash(chain_.size()); }

  friend bool operator==(const History& a, const History& b) {
    return a.steps_ == b.steps_;
  }

 private:
  static std::uint64_t mix(std::uint64_t prev, const Step& s) {
    std::uint64_t x = prev ^ (static_cast<std::uint64_t>(s.action) * 0x9e3779b97f4a7c15ULL +
                              static_cast<std::uint64_t>(s.percept.observation) * 0xbf58476d1ce4e5b9ULL +
                              static_cast<std::uint64_t>(s.percept.reward_index) * 0x94d049bb133111ebULL +
                              0xd6e8feb86659fd93ULL);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  std::vector<Step> steps_;
  std::vector<std::uint64_t> chain_;  // chain_[i] hashes steps 0..i
};

class Discount {
 public:
  explicit Discount(double gamma) : gamma_(gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("discount gamma must lie in (0,1)");
  }
  double value() const { return gamma_; }
  double max_value() const { return 1.0 / (1.0 - gamma_); }

 private:
  double gamma_;
};

// Sum of gamma^(i-1) * r_i; the first reward carries weight 1.
double discounted_return(std::span<const double> rewards, Discount gamma);

// Smallest l >= 0 with gamma^l / (1-gamma) <= epsilon.
int horizon_for_epsilon(double epsilon, Discount gamma);

// gamma^l / (1-gamma): how much the l-truncated value can miss by.
double truncation_error_bound(int l, Discount gamma);

}  // namespace optirl
