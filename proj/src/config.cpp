#include "loschmidt/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "loschmidt/phasespace.hpp"

namespace loschmidt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError("config: " + msg); }

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      fail("unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

double get_number(const json& obj, const std::string& where, const std::string& key,
                  double fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) fail(where + " requires \"" + key + "\"");
    return fallback;
  }
  if (!obj[key].is_number()) fail(where + "." + key + " must be a number");
  return obj[key].get<double>();
}

long get_integer(const json& obj, const std::string& where, const std::string& key, long fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) fail(where + "." + key + " must be an integer");
  return obj[key].get<long>();
}

std::string get_string(const json& obj, const std::string& where, const std::string& key,
                       const std::string& fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) fail(where + " requires \"" + key + "\"");
    return fallback;
  }
  if (!obj[key].is_string()) fail(where + "." + key + " must be a string");
  return obj[key].get<std::string>();
}

PhaseVec get_vector(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key) || !obj[key].is_array()) fail(where + " requires array \"" + key + "\"");
  const json& arr = obj[key];
  PhaseVec v(static_cast<int>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) fail(where + "." + key + " must contain numbers");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

SymmetricMatrix get_matrix(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key) || !obj[key].is_array()) fail(where + " requires matrix \"" + key + "\"");
  const json& rows = obj[key];
  const int n = static_cast<int>(rows.size());
  if (n == 0) fail(where + "." + key + " must not be empty");
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!rows[static_cast<std::size_t>(i)].is_array() ||
        static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n)
      fail(where + "." + key + " must be a square matrix");
    for (int j = 0; j < n; ++j) {
      const json& cell = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (!cell.is_number()) fail(where + "." + key + " must contain numbers");
      m(i, j) = cell.get<double>();
    }
  }
  try {
    return SymmetricMatrix::from_dense(m, 1e-9);
  } catch (const std::invalid_argument& e) {
    fail(where + "." + key + ": " + e.what());
  }
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

struct SystemSpec {
  std::string preset;
  double omega = 1.0;
  double lambda = 0.1;
  PhaseVec a;
  SymmetricMatrix hess;
  Hamiltonian h;
  json resolved;
};

SystemSpec parse_system(const json& j) {
  SystemSpec spec;
  spec.preset = get_string(j, "system", "preset", "", /*required=*/true);
  if (spec.preset == "free") {
    check_keys(j, "system", {"preset"});
    spec.h = preset_free();
  } else if (spec.preset == "harmonic") {
    check_keys(j, "system", {"preset", "omega"});
    spec.omega = get_number(j, "system", "omega", 1.0);
    if (spec.omega <= 0.0) fail("system.omega must be positive");
    spec.h = preset_harmonic(spec.omega);
  } else if (spec.preset == "inverted") {
    check_keys(j, "system", {"preset", "omega"});
    spec.omega = get_number(j, "system", "omega", 1.0);
    if (spec.omega <= 0.0) fail("system.omega must be positive");
    spec.h = preset_inverted(spec.omega);
  } else if (spec.preset == "quartic") {
    check_keys(j, "system", {"preset", "lambda"});
    spec.lambda = get_number(j, "system", "lambda", 0.1);
    spec.h = preset_quartic(spec.lambda);
  } else if (spec.preset == "linear") {
    check_keys(j, "system", {"preset", "a"});
    spec.a = get_vector(j, "system", "a");
    if (spec.a.size() % 2 != 0 || spec.a.size() == 0) fail("system.a must have even length");
    spec.h = preset_linear(spec.a);
  } else if (spec.preset == "explicit") {
    check_keys(j, "system", {"preset", "hessian", "a"});
    spec.hess = get_matrix(j, "system", "hessian");
    if (spec.hess.size() % 2 != 0) fail("system.hessian must have even dimension");
    QuadraticHamiltonian qh;
    qh.hess = spec.hess;
    if (j.contains("a")) {
      spec.a = get_vector(j, "system", "a");
      if (spec.a.size() != spec.hess.size()) fail("system.a must match the hessian dimension");
      qh.a = spec.a;
    } else {
      qh.a = PhaseVec::Zero(spec.hess.size());
    }
    spec.h = Hamiltonian::quadratic(qh.hess, qh.a);
  } else {
    fail("system.preset must be one of free|harmonic|inverted|quartic|linear|explicit");
  }

  spec.resolved = json{{"preset", spec.preset}};
  if (spec.preset == "harmonic" || spec.preset == "inverted") spec.resolved["omega"] = spec.omega;
  if (spec.preset == "quartic") spec.resolved["lambda"] = spec.lambda;
  if (spec.preset == "linear") spec.resolved["a"] = vector_to_json(spec.a);
  if (spec.preset == "explicit") {
    spec.resolved["hessian"] = matrix_to_json(spec.hess.mat());
    spec.resolved["a"] = vector_to_json(spec.a.size() > 0 ? spec.a
                                                          : PhaseVec::Zero(spec.hess.size()).eval());
  }
  return spec;
}

struct PerturbationSpec {
  std::string preset;
  double epsilon = 0.0;
  std::string anchor = "mean";
  Hamiltonian delta;
  json resolved;
};

PerturbationSpec parse_perturbation(const json& j, const SystemSpec& system, int dim) {
  PerturbationSpec spec;
  spec.preset = get_string(j, "perturbation", "preset", "", /*required=*/true);
  spec.anchor = get_string(j, "perturbation", "anchor", "mean");
  if (spec.anchor != "mean" && spec.anchor != "minus")
    fail("perturbation.anchor must be \"mean\" or \"minus\"");

  QuadraticHamiltonian qh;
  qh.hess = SymmetricMatrix(dim);
  qh.a = PhaseVec::Zero(dim);

  if (spec.preset == "none") {
    check_keys(j, "perturbation", {"preset", "anchor"});
  } else if (spec.preset == "squeeze") {
    check_keys(j, "perturbation", {"preset", "epsilon", "anchor"});
    if (system.preset != "harmonic")
      fail("perturbation.preset \"squeeze\" requires system.preset \"harmonic\"");
    spec.epsilon = get_number(j, "perturbation", "epsilon", 0.0, /*required=*/true);
    // Branches omega((1 +/- eps) p^2 + (1 -/+ eps) q^2)/2: dH = eps omega (p^2 - q^2).
    qh.hess.set(0, 0, 2.0 * spec.epsilon * system.omega);
    qh.hess.set(1, 1, -2.0 * spec.epsilon * system.omega);
  } else if (spec.preset == "broaden") {
    check_keys(j, "perturbation", {"preset", "epsilon", "anchor"});
    if (system.preset != "inverted")
      fail("perturbation.preset \"broaden\" requires system.preset \"inverted\"");
    spec.epsilon = get_number(j, "perturbation", "epsilon", 0.0, /*required=*/true);
    // Branches omega((1 +/- eps) p^2 - (1 -/+ eps) q^2)/2: dH = eps omega (p^2 + q^2).
    qh.hess.set(0, 0, 2.0 * spec.epsilon * system.omega);
    qh.hess.set(1, 1, 2.0 * spec.epsilon * system.omega);
  } else if (spec.preset == "linear_q") {
    check_keys(j, "perturbation", {"preset", "epsilon", "anchor"});
    if (dim != 2) fail("perturbation.preset \"linear_q\" requires one degree of freedom");
    spec.epsilon = get_number(j, "perturbation", "epsilon", 0.0, /*required=*/true);
    // dH = eps q = a ^ x with drift a = (-eps, 0).
    qh.a[0] = -spec.epsilon;
  } else if (spec.preset == "quadratic_q") {
    check_keys(j, "perturbation", {"preset", "epsilon", "anchor"});
    if (dim != 2) fail("perturbation.preset \"quadratic_q\" requires one degree of freedom");
    spec.epsilon = get_number(j, "perturbation", "epsilon", 0.0, /*required=*/true);
    // dH = eps q^2.
    qh.hess.set(1, 1, 2.0 * spec.epsilon);
  } else if (spec.preset == "explicit") {
    check_keys(j, "perturbation", {"preset", "epsilon", "anchor", "delta_hessian", "delta_a"});
    spec.epsilon = get_number(j, "perturbation", "epsilon", 1.0);
    bool any = false;
    if (j.contains("delta_hessian")) {
      const SymmetricMatrix dh = get_matrix(j, "perturbation", "delta_hessian");
      if (dh.size() != dim) fail("perturbation.delta_hessian dimension mismatch");
      qh.hess = dh.scaled(spec.epsilon);
      any = true;
    }
    if (j.contains("delta_a")) {
      const PhaseVec da = get_vector(j, "perturbation", "delta_a");
      if (da.size() != dim) fail("perturbation.delta_a dimension mismatch");
      qh.a = spec.epsilon * da;
      any = true;
    }
    if (!any) fail("perturbation.preset \"explicit\" requires delta_hessian and/or delta_a");
  } else {
    fail("perturbation.preset must be one of none|squeeze|broaden|linear_q|quadratic_q|explicit");
  }

  spec.delta = Hamiltonian::quadratic(qh.hess, qh.a);
  spec.resolved = json{{"preset", spec.preset}, {"anchor", spec.anchor}};
  if (spec.preset != "none") spec.resolved["epsilon"] = spec.epsilon;
  if (spec.preset == "explicit") {
    if (j.contains("delta_hessian"))
      spec.resolved["delta_hessian"] = j["delta_hessian"];
    if (j.contains("delta_a")) spec.resolved["delta_a"] = j["delta_a"];
  }
  return spec;
}

GaussianState parse_state(const json& j, int dim, json& resolved) {
  const std::string preset = get_string(j, "state", "preset", "coherent");
  const double hbar = get_number(j, "state", "hbar", 1.0);
  if (hbar <= 0.0) fail("state.hbar must be positive");
  PhaseVec center = PhaseVec::Zero(dim);
  if (j.contains("center")) {
    center = get_vector(j, "state", "center");
    if (center.size() != dim) fail("state.center must match the phase-space dimension");
  }
  GaussianState out;
  try {
    if (preset == "coherent") {
      check_keys(j, "state", {"preset", "center", "hbar"});
      out = coherent_state(center, hbar);
    } else if (preset == "squeezed") {
      check_keys(j, "state", {"preset", "center", "hbar", "r"});
      const double r = get_number(j, "state", "r", 0.0, /*required=*/true);
      out = squeezed_state(center, r, hbar);
      resolved["r"] = r;
    } else if (preset == "explicit") {
      check_keys(j, "state", {"preset", "center", "hbar", "g"});
      const SymmetricMatrix g = get_matrix(j, "state", "g");
      if (g.size() != dim) fail("state.g must match the phase-space dimension");
      out = make_state(center, g, hbar);
      resolved["g"] = matrix_to_json(g.mat());
    } else {
      fail("state.preset must be one of coherent|squeezed|explicit");
    }
  } catch (const std::invalid_argument& e) {
    fail(std::string("state: ") + e.what());
  }
  resolved["preset"] = preset;
  resolved["center"] = vector_to_json(center);
  resolved["hbar"] = hbar;
  return out;
}

std::vector<double> parse_times(const json& j, json& resolved) {
  check_keys(j, "time", {"t_max", "points", "values"});
  if (j.contains("values")) {
    if (j.contains("t_max") || j.contains("points"))
      fail("time.values excludes time.t_max/time.points");
    if (!j["values"].is_array() || j["values"].empty()) fail("time.values must be a nonempty array");
    std::vector<double> out;
    for (const json& v : j["values"]) {
      if (!v.is_number()) fail("time.values must contain numbers");
      out.push_back(v.get<double>());
    }
    if (out.front() < 0.0) fail("time.values must be nonnegative");
    for (std::size_t i = 1; i < out.size(); ++i)
      if (out[i] < out[i - 1]) fail("time.values must be nondecreasing");
    resolved["values"] = j["values"];
    return out;
  }
  const double t_max = get_number(j, "time", "t_max", 0.0, /*required=*/true);
  const long points = get_integer(j, "time", "points", 0);
  if (t_max <= 0.0) fail("time.t_max must be positive");
  if (points < 2 || points > 100000) fail("time.points must be in [2, 100000]");
  std::vector<double> out(static_cast<std::size_t>(points));
  for (long k = 0; k < points; ++k)
    out[static_cast<std::size_t>(k)] = t_max * static_cast<double>(k) / static_cast<double>(points - 1);
  resolved["t_max"] = t_max;
  resolved["points"] = points;
  return out;
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j) {
  check_keys(j, "config root",
             {"label", "system", "perturbation", "state", "time", "methods", "sampler",
              "integrator", "oracle", "workers", "output", "sweep"});
  if (!j.contains("system")) fail("missing \"system\" block");
  if (!j.contains("perturbation")) fail("missing \"perturbation\" block");
  if (!j.contains("time")) fail("missing \"time\" block");
  if (!j.contains("methods")) fail("missing \"methods\" list");

  RunConfig cfg;
  cfg.label = get_string(j, "config root", "label", "");

  const SystemSpec system = parse_system(j["system"]);
  const int dim = 2 * system.h.dof();
  const PerturbationSpec pert = parse_perturbation(j["perturbation"], system, dim);

  if (pert.anchor == "mean") {
    cfg.pair.mean = system.h;
    cfg.pair.delta = pert.delta;
  } else {
    // The system block describes the backward branch H_-.
    cfg.pair.mean = Hamiltonian::combine(system.h, 1.0, pert.delta, 0.5);
    cfg.pair.delta = pert.delta;
  }

  json state_resolved = json::object();
  if (j.contains("state")) {
    cfg.state = parse_state(j["state"], dim, state_resolved);
  } else {
    json empty = json::object();
    cfg.state = parse_state(empty, dim, state_resolved);
  }

  json time_resolved = json::object();
  cfg.times = parse_times(j["time"], time_resolved);

  if (!j["methods"].is_array() || j["methods"].empty()) fail("methods must be a nonempty array");
  for (const json& m : j["methods"]) {
    if (!m.is_string()) fail("methods must contain strings");
    const auto parsed = method_from_name(m.get<std::string>());
    if (!parsed) fail("unknown method \"" + m.get<std::string>() + "\"");
    for (Method seen : cfg.methods)
      if (seen == *parsed) fail("duplicate method \"" + m.get<std::string>() + "\"");
    cfg.methods.push_back(*parsed);
  }

  json sampler_resolved = json::object();
  {
    json block = j.contains("sampler") ? j["sampler"] : json::object();
    check_keys(block, "sampler", {"kind", "n", "seed", "gh_order"});
    const std::string kind = get_string(block, "sampler", "kind", "mc");
    if (kind == "mc") {
      cfg.engine.sampler.kind = SamplerOptions::Kind::mc;
    } else if (kind == "gauss_hermite") {
      cfg.engine.sampler.kind = SamplerOptions::Kind::gauss_hermite;
    } else {
      fail("sampler.kind must be \"mc\" or \"gauss_hermite\"");
    }
    cfg.engine.sampler.n = get_integer(block, "sampler", "n", cfg.engine.sampler.n);
    if (cfg.engine.sampler.n < 1) fail("sampler.n must be positive");
    const long seed = get_integer(block, "sampler", "seed",
                                  static_cast<long>(cfg.engine.sampler.seed));
    if (seed < 0) fail("sampler.seed must be nonnegative");
    cfg.engine.sampler.seed = static_cast<std::uint64_t>(seed);
    cfg.engine.sampler.gh_order =
        static_cast<int>(get_integer(block, "sampler", "gh_order", cfg.engine.sampler.gh_order));
    if (cfg.engine.sampler.gh_order < 2 || cfg.engine.sampler.gh_order > 512)
      fail("sampler.gh_order must be in [2, 512]");
    sampler_resolved = {{"kind", kind},
                        {"n", cfg.engine.sampler.n},
                        {"seed", cfg.engine.sampler.seed},
                        {"gh_order", cfg.engine.sampler.gh_order}};
  }

  json integrator_resolved = json::object();
  {
    json block = j.contains("integrator") ? j["integrator"] : json::object();
    check_keys(block, "integrator", {"dt"});
    cfg.engine.integrator.dt = get_number(block, "integrator", "dt", cfg.engine.integrator.dt);
    if (cfg.engine.integrator.dt <= 0.0) fail("integrator.dt must be positive");
    integrator_resolved = {{"dt", cfg.engine.integrator.dt}};
  }

  json oracle_resolved = json::object();
  {
    json block = j.contains("oracle") ? j["oracle"] : json::object();
    check_keys(block, "oracle", {"n", "span_factor", "dt_factor", "max_n"});
    cfg.engine.oracle.n = static_cast<int>(get_integer(block, "oracle", "n", cfg.engine.oracle.n));
    if (cfg.engine.oracle.n < 64 || (cfg.engine.oracle.n & (cfg.engine.oracle.n - 1)) != 0)
      fail("oracle.n must be a power of two >= 64");
    cfg.engine.oracle.span_factor =
        get_number(block, "oracle", "span_factor", cfg.engine.oracle.span_factor);
    if (cfg.engine.oracle.span_factor < 1.0) fail("oracle.span_factor must be >= 1");
    cfg.engine.oracle.dt_factor = get_number(block, "oracle", "dt_factor", cfg.engine.oracle.dt_factor);
    if (cfg.engine.oracle.dt_factor <= 0.0 || cfg.engine.oracle.dt_factor > 0.5)
      fail("oracle.dt_factor must be in (0, 0.5]");
    cfg.engine.oracle.max_n =
        static_cast<int>(get_integer(block, "oracle", "max_n", cfg.engine.oracle.max_n));
    if (cfg.engine.oracle.max_n < cfg.engine.oracle.n) fail("oracle.max_n must be >= oracle.n");
    oracle_resolved = {{"n", cfg.engine.oracle.n},
                       {"span_factor", cfg.engine.oracle.span_factor},
                       {"dt_factor", cfg.engine.oracle.dt_factor},
                       {"max_n", cfg.engine.oracle.max_n}};
  }

  cfg.engine.workers = static_cast<int>(get_integer(j, "config root", "workers", 0));
  if (cfg.engine.workers < 0) fail("workers must be >= 0");

  {
    json block = j.contains("output") ? j["output"] : json::object();
    check_keys(block, "output", {"prefix"});
    cfg.output_prefix = get_string(block, "output", "prefix", cfg.output_prefix);
    if (cfg.output_prefix.empty()) fail("output.prefix must not be empty");
  }

  json sweep_resolved;
  if (j.contains("sweep")) {
    const json& sw = j["sweep"];
    check_keys(sw, "sweep", {"parameter", "values", "fit_pair"});
    cfg.has_sweep = true;
    cfg.sweep_parameter = get_string(sw, "sweep", "parameter", "", /*required=*/true);
    if (cfg.sweep_parameter != "eps" && cfg.sweep_parameter != "hbar" && cfg.sweep_parameter != "t")
      fail("sweep.parameter must be one of eps|hbar|t");
    if (!sw.contains("values") || !sw["values"].is_array() || sw["values"].size() < 2)
      fail("sweep.values must be an array with at least two entries");
    for (const json& v : sw["values"]) {
      if (!v.is_number()) fail("sweep.values must contain numbers");
      const double value = v.get<double>();
      if (value <= 0.0) fail("sweep.values must be positive");
      cfg.sweep_values.push_back(value);
    }
    if (sw.contains("fit_pair")) {
      if (!sw["fit_pair"].is_array() || sw["fit_pair"].size() != 2)
        fail("sweep.fit_pair must be an array of two method names");
      const auto a = method_from_name(sw["fit_pair"][0].get<std::string>());
      const auto b = method_from_name(sw["fit_pair"][1].get<std::string>());
      if (!a || !b) fail("sweep.fit_pair contains an unknown method");
      bool have_a = false, have_b = false;
      for (Method m : cfg.methods) {
        have_a = have_a || m == *a;
        have_b = have_b || m == *b;
      }
      if (!have_a || !have_b) fail("sweep.fit_pair methods must be listed in methods");
      cfg.has_sweep_fit = true;
      cfg.sweep_fit_a = *a;
      cfg.sweep_fit_b = *b;
    }
    sweep_resolved = {{"parameter", cfg.sweep_parameter}, {"values", cfg.sweep_values}};
    if (cfg.has_sweep_fit)
      sweep_resolved["fit_pair"] = {method_name(cfg.sweep_fit_a), method_name(cfg.sweep_fit_b)};
  }

  if (cfg.state.dof() != system.h.dof()) fail("state dimension must match the system");

  json methods_resolved = json::array();
  for (Method m : cfg.methods) methods_resolved.push_back(method_name(m));

  cfg.resolved = json{{"label", cfg.label},
                      {"system", system.resolved},
                      {"perturbation", pert.resolved},
                      {"state", state_resolved},
                      {"time", time_resolved},
                      {"methods", methods_resolved},
                      {"sampler", sampler_resolved},
                      {"integrator", integrator_resolved},
                      {"oracle", oracle_resolved},
                      {"workers", cfg.engine.workers},
                      {"output", json{{"prefix", cfg.output_prefix}}}};
  if (cfg.has_sweep) cfg.resolved["sweep"] = sweep_resolved;
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open \"" + path + "\"");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(j);
}

RunConfig apply_sweep_value(const RunConfig& base, const std::string& parameter, double value) {
  nlohmann::json j = base.resolved;
  j.erase("sweep");
  if (parameter == "eps") {
    if (base.resolved["perturbation"]["preset"] == "none")
      throw ValidationError("config: cannot sweep eps with perturbation preset \"none\"");
    j["perturbation"]["epsilon"] = value;
  } else if (parameter == "hbar") {
    j["state"]["hbar"] = value;
  } else if (parameter == "t") {
    if (!j["time"].contains("t_max"))
      throw ValidationError("config: sweeping t requires time.t_max/time.points");
    j["time"]["t_max"] = value;
  } else {
    throw ValidationError("config: unknown sweep parameter \"" + parameter + "\"");
  }
  return parse_config(j);
}

}  // namespace loschmidt
