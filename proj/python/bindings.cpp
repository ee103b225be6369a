// Python bindings for the Loschmidt echo library: model construction, action
// and weight evaluation, the estimator engine, the exact grid reference, and
// the counter-based random source.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "loschmidt/config.hpp"
#include "loschmidt/echo_action.hpp"
#include "loschmidt/engine.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/io.hpp"
#include "loschmidt/phasespace.hpp"
#include "loschmidt/quantum_oracle.hpp"
#include "loschmidt/rng.hpp"
#include "loschmidt/states.hpp"

namespace py = pybind11;
using namespace loschmidt;

namespace {

ActionScheme scheme_from_string(const std::string& s) {
  if (s == "auto") return ActionScheme::automatic;
  if (s == "exact") return ActionScheme::exact_flow;
  if (s == "midpoint") return ActionScheme::midpoint;
  throw std::invalid_argument("unknown action scheme '" + s + "' (use auto|exact|midpoint)");
}

std::vector<Method> methods_from_names(const std::vector<std::string>& names) {
  std::vector<Method> out;
  out.reserve(names.size());
  for (const std::string& n : names) {
    const auto m = method_from_name(n);
    if (!m) throw std::invalid_argument("unknown method '" + n + "'");
    out.push_back(*m);
  }
  return out;
}

EngineOptions engine_options(long n, std::uint64_t seed, int workers, double dt,
                             const std::string& sampler, int gh_order) {
  EngineOptions opts;
  opts.sampler.n = n;
  opts.sampler.seed = seed;
  opts.sampler.gh_order = gh_order;
  if (sampler == "mc") {
    opts.sampler.kind = SamplerOptions::Kind::mc;
  } else if (sampler == "gauss_hermite" || sampler == "gh") {
    opts.sampler.kind = SamplerOptions::Kind::gauss_hermite;
  } else {
    throw std::invalid_argument("unknown sampler '" + sampler + "' (use mc|gauss_hermite)");
  }
  opts.workers = workers;
  opts.integrator.dt = dt;
  return opts;
}

py::dict series_to_dict(const EchoSeries& s) {
  py::list series;
  for (const MethodSeries& ms : s.series) {
    std::vector<double> w_mean, err13;
    std::vector<bool> caustic;
    w_mean.reserve(ms.diag.size());
    for (const TimePointDiag& d : ms.diag) {
      w_mean.push_back(d.w_mean);
      err13.push_back(d.err13_mean);
      caustic.push_back(d.caustic);
    }
    py::dict d;
    d["method"] = std::string(method_name(ms.method));
    d["values"] = ms.values;
    d["se_re"] = ms.se_re;
    d["se_im"] = ms.se_im;
    d["w_mean"] = w_mean;
    d["err13_mean"] = err13;
    d["caustic"] = caustic;
    series.append(d);
  }
  py::dict out;
  out["times"] = s.times;
  out["series"] = series;
  return out;
}

}  // namespace

PYBIND11_MODULE(_loschmidt, m) {
  m.doc() =
      "Loschmidt echo estimators: semiclassical dephasing representations with "
      "amplitude weights, exact quadratic references, and a numerically exact "
      "grid propagator.";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CausticEncountered>(m, "CausticError", PyExc_RuntimeError);
  py::register_exception<IntegrationError>(m, "IntegrationFailure", PyExc_RuntimeError);

  // ------------------------------------------------------------ phase space
  m.def("symplectic_j", &symplectic_j, py::arg("dof") = 1,
        "Symplectic structure matrix J in (p, q) block order.");
  m.def("skew_product", &skew_product, py::arg("a"), py::arg("x"),
        "Skew product a ^ x = a . (J x).");
  m.def("symplectic_defect", &symplectic_defect, py::arg("m"),
        "Max-norm deviation of M^T J M from J.");

  // ------------------------------------------------------------------ models
  py::class_<Hamiltonian>(m, "Hamiltonian")
      .def_property_readonly("dof", &Hamiltonian::dof)
      .def_property_readonly("is_quadratic", &Hamiltonian::is_quadratic)
      .def("value", &Hamiltonian::value, py::arg("x"))
      .def("gradient", &Hamiltonian::gradient, py::arg("x"))
      .def("hessian", &Hamiltonian::hessian, py::arg("x"))
      .def("__repr__", [](const Hamiltonian& h) {
        return std::string("<Hamiltonian ") + (h.is_quadratic() ? "quadratic" : "general") +
               ", dof=" + std::to_string(h.dof()) + ">";
      });

  m.def("free_particle", &preset_free, "H = p^2 / 2.");
  m.def("harmonic", &preset_harmonic, py::arg("omega"), "H = omega (p^2 + q^2) / 2.");
  m.def("inverted", &preset_inverted, py::arg("omega"), "H = omega (p^2 - q^2) / 2.");
  m.def("quartic", &preset_quartic, py::arg("lam"), "H = p^2 / 2 + lam q^4 / 4.");
  m.def("linear", &preset_linear, py::arg("a"),
        "H = a ^ x: pure drift with phase-space velocity a.");
  m.def(
      "quadratic",
      [](const Mat& hess, const PhaseVec& a) {
        return Hamiltonian::quadratic(SymmetricMatrix::from_dense(hess), a);
      },
      py::arg("hess"), py::arg("a"), "H = x . hess . x / 2 + a ^ x (hess must be symmetric).");

  py::class_<PerturbationPair>(m, "PerturbationPair")
      .def_property_readonly("dof", &PerturbationPair::dof)
      .def_property_readonly("is_quadratic", &PerturbationPair::quadratic)
      .def_readonly("mean", &PerturbationPair::mean)
      .def_readonly("delta", &PerturbationPair::delta)
      .def("plus", &PerturbationPair::plus, "Forward branch H + delta/2.")
      .def("minus", &PerturbationPair::minus, "Backward branch H - delta/2.")
      .def("swapped", &PerturbationPair::swapped, "Exchange the branches (conjugates the echo).")
      .def("__repr__", [](const PerturbationPair& p) {
        return std::string("<PerturbationPair dof=") + std::to_string(p.dof()) +
               (p.quadratic() ? ", quadratic>" : ">");
      });

  m.def(
      "pair",
      [](const Hamiltonian& mean, const Hamiltonian& delta) {
        PerturbationPair p;
        p.mean = mean;
        p.delta = delta;
        return p;
      },
      py::arg("mean"), py::arg("delta"),
      "Perturbation pair from the mean Hamiltonian and the difference delta = H+ - H-.");
  m.def("pair_from_branches", &make_pair, py::arg("h_minus"), py::arg("h_plus"),
        "Perturbation pair from the two branch Hamiltonians.");

  // ------------------------------------------------------------------ states
  py::class_<GaussianState>(m, "GaussianState")
      .def_property_readonly("dof", &GaussianState::dof)
      .def_readonly("center", &GaussianState::center)
      .def_readonly("hbar", &GaussianState::hbar)
      .def_property_readonly("g", [](const GaussianState& s) { return s.g.mat(); })
      .def("__repr__", [](const GaussianState& s) {
        return std::string("<GaussianState dof=") + std::to_string(s.dof()) +
               ", hbar=" + std::to_string(s.hbar) + ">";
      });

  m.def("coherent_state", &coherent_state, py::arg("center"), py::arg("hbar") = 1.0,
        "Minimum-uncertainty Gaussian with isotropic width matrix.");
  m.def("squeezed_state", &squeezed_state, py::arg("center"), py::arg("r"), py::arg("hbar") = 1.0,
        "One-dof squeezed Gaussian, G = diag(exp(-2r), exp(2r)).");
  m.def("wigner", &wigner_eval, py::arg("state"), py::arg("x"),
        "Phase-space density of the state at x.");
  m.def("sample_point", &sample_point, py::arg("state"), py::arg("seed"), py::arg("index"),
        "Counter-based Gaussian sample: depends only on (state, seed, index).");

  // --------------------------------------------------------- action and weight
  m.def(
      "delta_action",
      [](const PerturbationPair& pair, const PhaseVec& x, double t, const std::string& scheme,
         double dt) {
        IntegratorOptions opt;
        opt.dt = dt;
        return delta_action(pair, x, t, scheme_from_string(scheme), opt);
      },
      py::arg("pair"), py::arg("x"), py::arg("t"), py::arg("scheme") = "auto",
      py::arg("dt") = 1e-3,
      "Accumulated perturbation action -int_0^t delta(xbar(tau; x)) dtau along the "
      "mean-Hamiltonian trajectory through x.");
  m.def(
      "chord",
      [](const PerturbationPair& pair, const PhaseVec& x, double t) { return chord(pair, x, t); },
      py::arg("pair"), py::arg("x"), py::arg("t"),
      "Phase-space chord J grad(delta action) at x.");
  m.def(
      "action_hessian",
      [](const PerturbationPair& pair, const PhaseVec& x, double t) {
        return hessian_delta_action(pair, x, t).mat();
      },
      py::arg("pair"), py::arg("x"), py::arg("t"),
      "Hessian of the accumulated perturbation action at x.");
  m.def(
      "amplitude_weight",
      [](const PerturbationPair& pair, const PhaseVec& x, double t) {
        return amplitude_weight(hessian_delta_action(pair, x, t));
      },
      py::arg("pair"), py::arg("x"), py::arg("t"),
      "Quadratic-estimator amplitude weight |det(I + J B)|^{1/2}, B = Hessian/2.");

  // ------------------------------------------------------------------ engine
  m.def(
      "run",
      [](const GaussianState& state, const PerturbationPair& pair, std::vector<double> times,
         const std::vector<std::string>& methods, long n, std::uint64_t seed, int workers,
         double dt, const std::string& sampler, int gh_order) {
        const EngineOptions opts = engine_options(n, seed, workers, dt, sampler, gh_order);
        EchoSeries result;
        {
          py::gil_scoped_release release;
          result = run_methods(state, pair, times, methods_from_names(methods), opts);
        }
        return series_to_dict(result);
      },
      py::arg("state"), py::arg("pair"), py::arg("times"),
      py::arg("methods") = std::vector<std::string>{"idr"}, py::arg("n") = 10000L,
      py::arg("seed") = std::uint64_t{20260816}, py::arg("workers") = 0, py::arg("dt") = 1e-3,
      py::arg("sampler") = "mc", py::arg("gh_order") = 64,
      "Run echo estimators over a time grid. methods: dr_minus | dr_mean | idr | "
      "quad_closed | grid. Returns {'times': [...], 'series': [per-method dict]}.");

  m.def(
      "exact_series",
      [](const GaussianState& state, const PerturbationPair& pair, std::vector<double> times) {
        py::gil_scoped_release release;
        return loschmidt_exact_series(state, pair, times);
      },
      py::arg("state"), py::arg("pair"), py::arg("times"),
      "Numerically exact echo overlap on a position grid (split-operator reference).");

  m.def(
      "run_config",
      [](const std::string& config_json) {
        const RunConfig cfg = parse_config(nlohmann::json::parse(config_json));
        if (cfg.has_sweep)
          throw std::invalid_argument("run_config runs a single series; remove the sweep block");
        EchoSeries result;
        {
          py::gil_scoped_release release;
          result = run_methods(cfg.state, cfg.pair, cfg.times, cfg.methods, cfg.engine);
        }
        py::dict out = series_to_dict(result);
        out["label"] = cfg.label;
        out["resolved_config"] = cfg.resolved.dump();
        return out;
      },
      py::arg("config_json"),
      "Run the estimators described by a JSON config string (same schema as the CLI).");

  // --------------------------------------------------------------------- rng
  m.def(
      "philox_raw",
      [](std::uint64_t k0, std::uint64_t k1, std::uint64_t c0, std::uint64_t c1, std::uint64_t c2,
         std::uint64_t c3) {
        const auto r = philox4x64({k0, k1}, {c0, c1, c2, c3});
        return py::make_tuple(r[0], r[1], r[2], r[3]);
      },
      py::arg("key0"), py::arg("key1"), py::arg("counter0"), py::arg("counter1") = 0,
      py::arg("counter2") = 0, py::arg("counter3") = 0,
      "Raw Philox4x64-10 block for an explicit (key, counter).");
  m.def(
      "uniforms",
      [](std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int n) {
        std::vector<double> out(static_cast<std::size_t>(n));
        CounterRng(seed, stream).uniforms(index, out.data(), n);
        return out;
      },
      py::arg("seed"), py::arg("stream"), py::arg("index"), py::arg("n"),
      "Counter-based uniforms in (0, 1] for the given sample index.");
  m.def(
      "gaussians",
      [](std::uint64_t seed, std::uint64_t stream, std::uint64_t index, int n) {
        std::vector<double> out(static_cast<std::size_t>(n));
        CounterRng(seed, stream).gaussians(index, out.data(), n);
        return out;
      },
      py::arg("seed"), py::arg("stream"), py::arg("index"), py::arg("n"),
      "Counter-based standard normals for the given sample index.");
}
