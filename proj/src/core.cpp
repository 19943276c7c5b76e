#include "optirl/core.hpp"

#include <algorithm>

namespace optirl {

void Alphabets::validate() const {
  if (num_actions < 1) throw std::invalid_argument("alphabets: need at least one action");
  if (num_observations < 1)
    throw std::invalid_argument("alphabets: need at least one observation");
  if (reward_values.empty())
    throw std::invalid_argument("alphabets: reward list must be non-empty");
  for (std::size_t i = 0; i < reward_values.size(); ++i) {
    double r = reward_values[i];
    if (!(r >= 0.0 && r <= 1.0))
      throw std::invalid_argument("alphabets: reward value outside [0,1]");
    if (i > 0 && !(reward_values[i - 1] < r))
      throw std::invalid_argument("alphabets: reward values must be strictly increasing");
  }
}

double discounted_return(std::span<const double> rewards, Discount gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    if (!(r >= 0.0 && r <= 1.0))
      throw std::invalid_argument("discounted_return: reward outside [0,1]");
    total += weight * r;
    weight *= gamma.value();
  }
  return total;
}

int horizon_for_epsilon(double epsilon, Discount gamma) {
  const double g = gamma.value();
  if (!(epsilon > 0.0 && epsilon < gamma.max_value()))
    throw std::invalid_argument("horizon_for_epsilon: epsilon outside (0, 1/(1-gamma))");
  double raw = std::log(epsilon * (1.0 - g)) / std::log(g);
  int l = std::max(0, static_cast<int>(std::ceil(raw)));
  // Float-safe adjustment around the ceiling.
  while (l > 0 && truncation_error_bound(l - 1, gamma) <= epsilon) --l;
  while (truncation_error_bound(l, gamma) > epsilon) ++l;
  return l;
}

double truncation_error_bound(int l, Discount gamma) {
  if (l < 0) throw std::invalid_argument("truncation_error_bound: negative horizon");
  return std::pow(gamma.value(), l) / (1.0 - gamma.value());
}

}  // namespace optirl
