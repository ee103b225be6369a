#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loschmidt/common.hpp"
#include "loschmidt/dynamics.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/quantum_oracle.hpp"
#include "loschmidt/states.hpp"

namespace loschmidt {

/// Echo estimators.
///   dr_minus    phase-average of exp(-i deltaS / hbar) along H_- trajectories
///   dr_mean     same along mean-Hamiltonian trajectories
///   idr         mean-trajectory phase with the amplitude weight w = |det(I+JB)|^{1/2}
///   quad_closed closed Gaussian integral of the idr integrand (quadratic pairs)
///   grid        numerically exact split-operator reference
enum class Method { dr_minus, dr_mean, idr, quad_closed, grid };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct SamplerOptions {
  enum class Kind { mc, gauss_hermite };
  Kind kind = Kind::mc;
  long n = 10000;                  // Monte Carlo sample count
  std::uint64_t seed = 20260816;   // counter-based; results independent of worker count
  int gh_order = 64;               // Gauss-Hermite nodes per axis (1 dof only)
};

struct EngineOptions {
  SamplerOptions sampler;
  IntegratorOptions integrator;
  OracleOptions oracle;
  int workers = 0;  // worker threads for the sample sweep; 0 = hardware concurrency
};

/// Per-time-point averaged diagnostics. Entries that do not apply to a method
/// are NaN.
struct TimePointDiag {
  double w_mean = 0.0;        // mean amplitude weight of the estimator (1 for dr_*)
  double err13_mean = 0.0;    // mean of -(1/8) xi . [int hess dH] . xi
  double eta_db_eta = 0.0;    // mean stationary-phase remainder (quadratic pairs)
  bool caustic = false;       // time point skipped: amplitude undefined
  long caustic_samples = 0;   // samples that hit a caustic (general pairs)
};

struct MethodSeries {
  Method method = Method::dr_mean;
  std::vector<cplx> values;      // NaN at caustic-flagged points
  std::vector<double> se_re;     // Monte Carlo standard errors (0 for deterministic)
  std::vector<double> se_im;
  std::vector<TimePointDiag> diag;
};

struct EchoSeries {
  std::vector<double> times;
  std::vector<MethodSeries> series;  // one entry per requested method, in request order
};

/// Run the requested estimators over a common time grid. Sample-based methods
/// (dr_minus, dr_mean, idr) share one sweep: identical samples, identical
/// trajectories where they coincide. times must be nondecreasing and >= 0.
EchoSeries run_methods(const GaussianState& state, const PerturbationPair& pair,
                       const std::vector<double>& times, const std::vector<Method>& methods,
                       const EngineOptions& opts = {});

MethodSeries estimate_dr(const GaussianState& state, const PerturbationPair& pair,
                         const std::vector<double>& times, const EngineOptions& opts = {},
                         bool minus_trajectories = false);
MethodSeries estimate_idr(const GaussianState& state, const PerturbationPair& pair,
                          const std::vector<double>& times, const EngineOptions& opts = {});

/// Exact Gaussian integral of the (improved) estimator for quadratic pairs;
/// include_amplitude = false drops the weight factor (plain dephasing form).
MethodSeries estimate_quadratic_closed(const GaussianState& state, const PerturbationPair& pair,
                                       const std::vector<double>& times,
                                       const EngineOptions& opts = {},
                                       bool include_amplitude = true);

MethodSeries oracle_series(const GaussianState& state, const PerturbationPair& pair,
                           const std::vector<double>& times, const EngineOptions& opts = {});

struct MethodComparison {
  Method a = Method::dr_mean;
  Method b = Method::grid;
  double max_abs_diff = 0.0;   // max_t |L_a(t) - L_b(t)| over points both define
  double mean_abs_diff = 0.0;
  long points = 0;             // points compared
  long skipped = 0;            // points where either side is NaN (caustic)
};

struct ComparisonReport {
  EchoSeries series;
  std::vector<MethodComparison> pairs;  // all unordered method pairs
};

ComparisonReport compare(const GaussianState& state, const PerturbationPair& pair,
                         const std::vector<double>& times, const std::vector<Method>& methods,
                         const EngineOptions& opts = {});

}  // namespace loschmidt
