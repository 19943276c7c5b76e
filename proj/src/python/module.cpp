#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "optirl/harness.hpp"

namespace py = pybind11;
using namespace optirl;

namespace {

py::dict summary_to_dict(const RunSummary& s) {
  py::dict d;
  d["run"] = s.run;
  d["t_opt"] = s.t_opt;
  d["eps_list"] = s.eps_list;
  d["counts_per_eps"] = s.counts_per_eps;
  py::list settled;
  for (char c : s.settled_per_eps) settled.append(static_cast<bool>(c));
  d["settled_per_eps"] = settled;
  d["excluded_true"] = s.excluded_true;
  d["empty_class"] = s.empty_class;
  d["K"] = s.exclusion_count;
  d["radius_monotone"] = s.radius_monotone;
  d["true_in_enlarged"] = s.true_in_enlarged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "optimistic general-RL agents: planning, elimination, certification";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<EmptyClassError>(m, "EmptyClassError");
  py::register_exception<BudgetExceeded>(m, "BudgetExceededError");

  py::class_<Percept>(m, "Percept")
      .def(py::init<>())
      .def(py::init([](int obs, int rew) { return Percept{obs, rew}; }))
      .def_readwrite("observation", &Percept::observation)
      .def_readwrite("reward_index", &Percept::reward_index);

  py::class_<History>(m, "History")
      .def(py::init<>())
      .def("__len__", &History::length)
      .def("append",
           [](History& h, int action, int obs, int reward_index) {
             h.append(action, Percept{obs, reward_index});
           });

  m.def("discounted_return", [](const std::vector<double>& rewards, double gamma) {
    return discounted_return(rewards, Discount(gamma));
  });
  m.def("horizon_for_epsilon", [](double epsilon, double gamma) {
    return horizon_for_epsilon(epsilon, Discount(gamma));
  });
  m.def("truncation_error_bound", [](int l, double gamma) {
    return truncation_error_bound(l, Discount(gamma));
  });

  py::class_<EnvironmentClass>(m, "EnvironmentClass")
      .def("__len__", [](const EnvironmentClass& c) { return c.environments.size(); })
      .def("names",
           [](const EnvironmentClass& c) {
             std::vector<std::string> out;
             for (const auto& e : c.environments) out.push_back(e->name());
             return out;
           })
      .def("deterministic", [](const EnvironmentClass& c) {
        std::vector<bool> out;
        for (const auto& e : c.environments) out.push_back(e->deterministic());
        return out;
      });

  m.def("load_class", &resolve_class_source,
        "load a class from 'builtin:NAME' or a JSON file path");
  m.def("parse_class_json", &parse_class_json);
  m.def("class_to_json", &class_to_json_text);

  m.def(
      "optimal_value",
      [](const EnvironmentClass& cls, std::size_t env_index, const History& h, int l,
         double gamma, long long node_budget) {
        Planner planner(node_budget);
        int action = 0;
        double v = planner.optimal_value(*cls.environments.at(env_index), h, l,
                                         Discount(gamma), &action);
        return py::make_tuple(v, action);
      },
      py::arg("cls"), py::arg("env_index"), py::arg("history"), py::arg("l"),
      py::arg("gamma"), py::arg("node_budget") = 10'000'000);

  m.def(
      "tv_distance_horizon",
      [](const EnvironmentClass& cls, std::size_t i, std::size_t j, const History& h,
         int action, int horizon) {
        return tv_distance_horizon(*cls.environments.at(i), *cls.environments.at(j), h,
                                   [action](const History&) { return action; }, horizon);
      },
      py::arg("cls"), py::arg("i"), py::arg("j"), py::arg("history"), py::arg("action"),
      py::arg("horizon"));

  m.def("build_cover",
        [](const std::string& class_source, double epsilon, double gamma, int horizon) {
          EnvironmentClass cls = resolve_class_source(class_source);
          if (!cls.family) throw ConfigError("class declares no parametric family");
          EnvironmentClass out;
          out.environments = build_cover(*cls.family, epsilon, Discount(gamma), horizon);
          out.alphabets = out.environments.front()->alphabets();
          return out;
        });

  m.def("run_episode", [](const std::string& config_json, int run_index) {
    ExperimentConfig cfg = ExperimentConfig::from_json_text(config_json);
    EpisodeResult ep = run_episode(cfg, run_index);
    py::dict d = summary_to_dict(ep.summary);
    py::list trace;
    for (const TraceRecord& rec : ep.trace) trace.append(trace_record_json(rec));
    d["trace_jsonl"] = trace;
    return d;
  });

  m.def(
      "batch_run",
      [](const std::string& config_json, const std::string& outdir) {
        ExperimentConfig cfg = ExperimentConfig::from_json_text(config_json);
        BatchResult batch = batch_run(cfg, outdir);
        py::list out;
        for (const RunSummary& s : batch.summaries) out.append(summary_to_dict(s));
        return out;
      },
      py::arg("config_json"), py::arg("outdir") = std::string());

  m.def("certify_det_bound",
        [](const std::string& config_json, const std::string& outdir) {
          ExperimentConfig cfg = ExperimentConfig::from_json_text(config_json);
          EnvironmentClass cls = resolve_class_source(cfg.class_source);
          BatchResult batch = batch_run(cfg, outdir);
          py::list out;
          for (double eps : cfg.eps_list) {
            Verdict v = certify_det_bound(batch.summaries, eps,
                                          static_cast<int>(cls.environments.size()),
                                          cfg.discount());
            out.append(py::make_tuple(v.pass, v.detail));
          }
          return out;
        },
        py::arg("config_json"), py::arg("outdir") = std::string());
}
