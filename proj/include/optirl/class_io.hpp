#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "optirl/environment.hpp"

namespace optirl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A loaded environment class: the enumerated candidate models (finite-state
// entries plus any grid-instantiated family members, in file order) and the
// family descriptor itself when one was declared.
struct EnvironmentClass {
  Alphabets alphabets;
  std::vector<EnvPtr> environments;
  std::optional<ParametricEnvFamily> family;
};

// Loads a class from a JSON file; rejects distributions that do not sum to
// one within 1e-12. See README for the schema.
EnvironmentClass load_class_file(const std::string& path);
EnvironmentClass parse_class_json(const std::string& text);

// Serializes finite-state environments back to the class-file schema.
std::string class_to_json_text(const EnvironmentClass& cls);

// Named desk-scale classes: two_arm, det4, bernoulli3, bernoulli_grid,
// bernoulli_family.
EnvironmentClass builtin_class(const std::string& name);
bool is_builtin_class(const std::string& name);

// Resolves "builtin:NAME" to a builtin, anything else to a file path.
EnvironmentClass resolve_class_source(const std::string& source);

// Two-arm bandit member: arm 0 pays Bernoulli(0.5), arm 1 pays Bernoulli(theta).
EnvPtr make_bernoulli_arm_env(double theta);
ParametricEnvFamily bernoulli_arm_family();

// Random finite-state deterministic class for randomized suites: point-mass
// percepts, random transitions, shared alphabets.
EnvironmentClass random_deterministic_class(std::mt19937_64& rng, int num_envs,
                                            int num_states, int num_actions,
                                            int num_observations);

}  // namespace optirl
