#include "optirl/class_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace optirl {

using nlohmann::json;

namespace {

Alphabets parse_alphabets(const json& j) {
  Alphabets a;
  a.num_actions = j.at("num_actions").get<int>();
  a.num_observations = j.at("num_observations").get<int>();
  a.reward_values = j.at("reward_values").get<std::vector<double>>();
  a.validate();
  return a;
}

EnvPtr parse_environment(const json& j, const Alphabets& alphabets) {
  std::string name = j.at("name").get<std::string>();
  int initial_state = j.value("initial_state", 0);
  std::vector<std::vector<FiniteStateEnv::Cell>> table;
  for (const json& state_row : j.at("states")) {
    std::vector<FiniteStateEnv::Cell> row;
    for (const json& cell : state_row) {
      FiniteStateEnv::Cell c;
      c.next_state = cell.value("next_state", 0);
      c.percept_probs = cell.at("percept_probs").get<std::vector<double>>();
      row.push_back(std::move(c));
    }
    table.push_back(std::move(row));
  }
  try {
    return std::make_shared<FiniteStateEnv>(name, alphabets, initial_state, std::move(table));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("environment '") + name + "': " + e.what());
  }
}

ParametricEnvFamily named_family(const std::string& name) {
  if (name == "bernoulli_arm") return bernoulli_arm_family();
  throw ConfigError("unknown parametric family: " + name);
}

EnvironmentClass parse_class(const json& j) {
  EnvironmentClass cls;
  cls.alphabets = parse_alphabets(j.at("alphabets"));
  if (j.contains("environments"))
    for (const json& env : j.at("environments"))
      cls.environments.push_back(parse_environment(env, cls.alphabets));
  if (j.contains("family")) {
    const json& f = j.at("family");
    ParametricEnvFamily family = named_family(f.at("name").get<std::string>());
    if (f.contains("box"))
      family.parameter_box =
          f.at("box").get<std::vector<std::pair<double, double>>>();
    cls.family = family;
    if (f.contains("grid")) {
      std::vector<int> counts = f.at("grid").get<std::vector<int>>();
      if (counts.size() != family.parameter_box.size())
        throw ConfigError("family grid dimension does not match parameter box");
      // Cartesian grid over the box, endpoints included.
      std::vector<std::vector<double>> axes;
      for (std::size_t d = 0; d < counts.size(); ++d) {
        auto [lo, hi] = family.parameter_box[d];
        int n = counts[d];
        if (n < 1) throw ConfigError("family grid counts must be positive");
        std::vector<double> axis;
        if (n == 1) axis.push_back(0.5 * (lo + hi));
        else
          for (int i = 0; i < n; ++i)
            axis.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
        axes.push_back(std::move(axis));
      }
      std::vector<std::size_t> idx(axes.size(), 0);
      bool done = false;
      while (!done) {
        std::vector<double> params;
        for (std::size_t d = 0; d < axes.size(); ++d) params.push_back(axes[d][idx[d]]);
        cls.environments.push_back(family.instantiate(params));
        std::size_t d = axes.size();
        done = true;
        while (d-- > 0) {
          if (++idx[d] < axes[d].size()) {
            done = false;
            break;
          }
          idx[d] = 0;
        }
      }
    }
  }
  if (cls.environments.empty()) throw ConfigError("class defines no environments");
  return cls;
}

std::vector<double> point_mass(int index, int size) {
  std::vector<double> p(size, 0.0);
  p[index] = 1.0;
  return p;
}

EnvPtr reward_for_action_env(const std::string& name, const Alphabets& alphabets,
                             int rewarded_action) {
  // Single state, |O| = 1: action == rewarded_action pays 1, otherwise 0.
  std::vector<FiniteStateEnv::Cell> row;
  for (int a = 0; a < alphabets.num_actions; ++a)
    row.push_back({0, point_mass(a == rewarded_action ? 1 : 0, alphabets.num_percepts())});
  return std::make_shared<FiniteStateEnv>(
      name, alphabets, 0, std::vector<std::vector<FiniteStateEnv::Cell>>{row});
}

EnvironmentClass two_arm_class() {
  EnvironmentClass cls;
  cls.alphabets = Alphabets{2, 1, {0.0, 1.0}};
  cls.environments.push_back(reward_for_action_env("nu1", cls.alphabets, 0));
  cls.environments.push_back(reward_for_action_env("nu2", cls.alphabets, 1));
  return cls;
}

// Two observable states alternating every step; environment (g0, g1) pays
// reward 1 in state s exactly when the action equals gs.
EnvironmentClass det4_class() {
  EnvironmentClass cls;
  cls.alphabets = Alphabets{2, 2, {0.0, 1.0}};
  for (int g0 = 0; g0 < 2; ++g0)
    for (int g1 = 0; g1 < 2; ++g1) {
      std::vector<std::vector<FiniteStateEnv::Cell>> table(2);
      int good[2] = {g0, g1};
      for (int s = 0; s < 2; ++s) {
        int next = 1 - s;
        for (int a = 0; a < 2; ++a) {
          Percept p{next, a == good[s] ? 1 : 0};
          table[s].push_back({next, point_mass(cls.alphabets.percept_index(p),
                                               cls.alphabets.num_percepts())});
        }
      }
      cls.environments.push_back(std::make_shared<FiniteStateEnv>(
          "det4_" + std::to_string(g0) + std::to_string(g1), cls.alphabets, 0,
          std::move(table)));
    }
  return cls;
}

EnvPtr two_arm_bernoulli_env(const std::string& name, double theta0, double theta1) {
  Alphabets alphabets{2, 1, {0.0, 1.0}};
  std::vector<FiniteStateEnv::Cell> row;
  for (double theta : {theta0, theta1})
    row.push_back({0, {1.0 - theta, theta}});
  return std::make_shared<FiniteStateEnv>(
      name, alphabets, 0, std::vector<std::vector<FiniteStateEnv::Cell>>{row});
}

EnvironmentClass bernoulli3_class() {
  EnvironmentClass cls;
  cls.alphabets = Alphabets{2, 1, {0.0, 1.0}};
  cls.environments.push_back(two_arm_bernoulli_env("bern_08_02", 0.8, 0.2));
  cls.environments.push_back(two_arm_bernoulli_env("bern_05_05", 0.5, 0.5));
  cls.environments.push_back(two_arm_bernoulli_env("bern_02_08", 0.2, 0.8));
  return cls;
}

}  // namespace

EnvPtr make_bernoulli_arm_env(double theta) {
  std::ostringstream name;
  name << "bern_arm_" << theta;
  return two_arm_bernoulli_env(name.str(), 0.5, theta);
}

ParametricEnvFamily bernoulli_arm_family() {
  ParametricEnvFamily family;
  family.name = "bernoulli_arm";
  family.parameter_box = {{0.0, 1.0}};
  family.instantiate = [](const std::vector<double>& params) {
    if (params.size() != 1)
      throw std::invalid_argument("bernoulli_arm: expects one parameter");
    return make_bernoulli_arm_env(params[0]);
  };
  return family;
}

EnvironmentClass builtin_class(const std::string& name) {
  if (name == "two_arm") return two_arm_class();
  if (name == "det4") return det4_class();
  if (name == "bernoulli3") return bernoulli3_class();
  if (name == "bernoulli_grid") {
    EnvironmentClass cls;
    cls.alphabets = Alphabets{2, 1, {0.0, 1.0}};
    cls.family = bernoulli_arm_family();
    for (int i = 0; i <= 20; ++i)
      cls.environments.push_back(make_bernoulli_arm_env(static_cast<double>(i) / 20.0));
    return cls;
  }
  if (name == "bernoulli_family") {
    EnvironmentClass cls;
    cls.alphabets = Alphabets{2, 1, {0.0, 1.0}};
    cls.family = bernoulli_arm_family();
    cls.environments.push_back(make_bernoulli_arm_env(0.8));  // placeholder member
    return cls;
  }
  throw ConfigError("unknown builtin class: " + name);
}

bool is_builtin_class(const std::string& name) {
  for (const char* n : {"two_arm", "det4", "bernoulli3", "bernoulli_grid", "bernoulli_family"})
    if (name == n) return true;
  return false;
}

EnvironmentClass resolve_class_source(const std::string& source) {
  constexpr std::string_view prefix = "builtin:";
  if (source.starts_with(prefix)) return builtin_class(source.substr(prefix.size()));
  return load_class_file(source);
}

EnvironmentClass load_class_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open class file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_class_json(buf.str());
}

EnvironmentClass parse_class_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("class file is not valid JSON: ") + e.what());
  }
  try {
    return parse_class(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed class file: ") + e.what());
  }
}

std::string class_to_json_text(const EnvironmentClass& cls) {
  json j;
  j["alphabets"] = {{"num_actions", cls.alphabets.num_actions},
                    {"num_observations", cls.alphabets.num_observations},
                    {"reward_values", cls.alphabets.reward_values}};
  json envs = json::array();
  for (const EnvPtr& env : cls.environments) {
    const auto* fse = dynamic_cast<const FiniteStateEnv*>(env.get());
    if (!fse)
      throw ConfigError("class_to_json_text: only finite-state environments serialize");
    json je;
    je["name"] = fse->name();
    je["initial_state"] = fse->initial_state();
    json states = json::array();
    for (int s = 0; s < *fse->num_states(); ++s) {
      json row = json::array();
      for (int a = 0; a < cls.alphabets.num_actions; ++a)
        row.push_back({{"next_state", fse->next_state(s, a)},
                       {"percept_probs", fse->distribution_at(s, a)}});
      states.push_back(std::move(row));
    }
    je["states"] = std::move(states);
    envs.push_back(std::move(je));
  }
  j["environments"] = std::move(envs);
  return j.dump(2);
}

EnvironmentClass random_deterministic_class(std::mt19937_64& rng, int num_envs,
                                            int num_states, int num_actions,
                                            int num_observations) {
  EnvironmentClass cls;
  cls.alphabets = Alphabets{num_actions, num_observations, {0.0, 1.0}};
  for (int e = 0; e < num_envs; ++e) {
    std::vector<std::vector<FiniteStateEnv::Cell>> table(num_states);
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) {
        int next = static_cast<int>(rng() % static_cast<std::uint64_t>(num_states));
        int percept = static_cast<int>(rng() % static_cast<std::uint64_t>(
                                           cls.alphabets.num_percepts()));
        table[s].push_back({next, point_mass(percept, cls.alphabets.num_percepts())});
      }
    cls.environments.push_back(std::make_shared<FiniteStateEnv>(
        "rand_det_" + std::to_string(e), cls.alphabets, 0, std::move(table)));
  }
  return cls;
}

}  // namespace optirl
