#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "loschmidt/common.hpp"
#include "loschmidt/engine.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/states.hpp"

namespace loschmidt {

/// Fully materialized run description parsed from a JSON config. Parsing is
/// fail-closed: unknown keys and preset/field mismatches raise ValidationError.
struct RunConfig {
  std::string label;
  GaussianState state;
  PerturbationPair pair;
  std::vector<double> times;
  std::vector<Method> methods;
  EngineOptions engine;
  std::string output_prefix = "results";

  bool has_sweep = false;
  std::string sweep_parameter;  // "eps" | "hbar" | "t"
  std::vector<double> sweep_values;
  bool has_sweep_fit = false;
  Method sweep_fit_a = Method::idr;
  Method sweep_fit_b = Method::grid;

  /// Config with every default filled in; reparsing it reproduces this run.
  nlohmann::json resolved;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_file(const std::string& path);

/// Rebuild the run with one swept parameter replaced:
///   eps  -> perturbation.epsilon
///   hbar -> state.hbar
///   t    -> time.t_max
RunConfig apply_sweep_value(const RunConfig& base, const std::string& parameter, double value);

}  // namespace loschmidt
