#include "loschmidt/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <vector>

#include "loschmidt/config.hpp"
#include "loschmidt/dynamics.hpp"
#include "loschmidt/echo_action.hpp"
#include "loschmidt/engine.hpp"
#include "loschmidt/io.hpp"
#include "loschmidt/phasespace.hpp"
#include "loschmidt/quadratic_exact.hpp"
#include "loschmidt/quantum_oracle.hpp"
#include "loschmidt/rng.hpp"

namespace loschmidt {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPi = 3.14159265358979323846264338327950288;

int resolve_workers(const CliOptions& cli, int config_workers) {
  if (cli.workers_override >= 0) return cli.workers_override;
  if (const char* env = std::getenv("LOSCHMIDT_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0 && v <= 4096) return static_cast<int>(v);
    std::cerr << "warning: ignoring invalid LOSCHMIDT_WORKERS value \"" << env << "\"\n";
  }
  return config_workers;
}

struct RunOutcome {
  EchoSeries series;
  std::vector<std::string> failed;  // "method: reason"
  std::string initial_error;
  int exit_code = 0;
};

/// Run all methods together (shared sample sweep); on a numerical abort fall
/// back to per-method runs so the deliverable carries every series that can
/// still be computed, flagged as partial (exit code 3).
RunOutcome run_with_fallback(const RunConfig& cfg) {
  RunOutcome out;
  try {
    out.series = run_methods(cfg.state, cfg.pair, cfg.times, cfg.methods, cfg.engine);
    return out;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    out.initial_error = e.what();
  }
  out.series.times = cfg.times;
  for (Method m : cfg.methods) {
    try {
      EchoSeries one = run_methods(cfg.state, cfg.pair, cfg.times, {m}, cfg.engine);
      out.series.series.push_back(std::move(one.series.front()));
    } catch (const std::exception& e) {
      out.failed.push_back(std::string(method_name(m)) + ": " + e.what());
    }
  }
  out.exit_code = 3;
  return out;
}

json caustic_counts(const EchoSeries& series) {
  json out = json::object();
  for (const MethodSeries& ms : series.series) {
    long n = 0;
    for (const TimePointDiag& d : ms.diag) n += d.caustic ? 1 : 0;
    out[method_name(ms.method)] = n;
  }
  return out;
}

std::vector<MethodComparison> pairwise_diffs(const EchoSeries& series) {
  std::vector<MethodComparison> out;
  for (std::size_t a = 0; a < series.series.size(); ++a) {
    for (std::size_t b = a + 1; b < series.series.size(); ++b) {
      MethodComparison cmp;
      cmp.a = series.series[a].method;
      cmp.b = series.series[b].method;
      double sum = 0.0;
      for (std::size_t j = 0; j < series.times.size(); ++j) {
        const cplx va = series.series[a].values[j];
        const cplx vb = series.series[b].values[j];
        if (std::isnan(va.real()) || std::isnan(vb.real())) {
          ++cmp.skipped;
          continue;
        }
        const double diff = std::abs(va - vb);
        cmp.max_abs_diff = std::max(cmp.max_abs_diff, diff);
        sum += diff;
        ++cmp.points;
      }
      cmp.mean_abs_diff = cmp.points > 0 ? sum / static_cast<double>(cmp.points) : 0.0;
      out.push_back(cmp);
    }
  }
  return out;
}

json comparison_json(const std::vector<MethodComparison>& pairs) {
  json out = json::array();
  for (const MethodComparison& c : pairs) {
    out.push_back(json{{"a", method_name(c.a)},
                       {"b", method_name(c.b)},
                       {"max_abs_diff", c.max_abs_diff},
                       {"mean_abs_diff", c.mean_abs_diff},
                       {"points", c.points},
                       {"skipped", c.skipped}});
  }
  return out;
}

std::string data_file_name(const std::string& prefix, const std::string& format) {
  return prefix + (format == "json" ? ".json" : ".csv");
}

void write_series(const std::string& path, const EchoSeries& series, const std::string& format) {
  if (format == "json") {
    write_text_file(path, series_to_json(series).dump(2) + "\n");
  } else {
    write_text_file(path, series_to_csv(series));
  }
}

json base_metadata(const std::string& command, const RunConfig& cfg, int workers, double wall_s) {
  json meta;
  meta["version"] = kVersion;
  meta["command"] = command;
  meta["config"] = cfg.resolved;
  meta["seed"] = cfg.engine.sampler.seed;
  meta["workers_used"] = workers;
  meta["wall_time_s"] = wall_s;
  return meta;
}

void print_verbose_summary(const EchoSeries& series) {
  for (const MethodSeries& ms : series.series) {
    double max_abs = 0.0;
    long caustics = 0;
    for (std::size_t j = 0; j < series.times.size(); ++j) {
      if (!std::isnan(ms.values[j].real())) max_abs = std::max(max_abs, std::abs(ms.values[j]));
      caustics += ms.diag[j].caustic ? 1 : 0;
    }
    std::cout << "  " << method_name(ms.method) << ": max|L| = " << format_double(max_abs)
              << ", final se = (" << format_double(ms.se_re.back()) << ", "
              << format_double(ms.se_im.back()) << ")"
              << ", caustic points = " << caustics << "\n";
  }
}

int finish_run(const CliOptions& cli, const std::string& command, const RunConfig& cfg,
               int workers, const RunOutcome& outcome, double wall_s,
               const std::vector<MethodComparison>* comparisons) {
  const std::string data_name = data_file_name(cfg.output_prefix, cli.format);
  const std::string data_path = (fs::path(cli.output_dir) / data_name).string();
  write_series(data_path, outcome.series, cli.format);

  json meta = base_metadata(command, cfg, workers, wall_s);
  meta["status"] = outcome.exit_code == 0 ? "ok" : "partial";
  meta["outputs"] = json::array({data_name});
  meta["caustic_points"] = caustic_counts(outcome.series);
  if (!outcome.initial_error.empty()) meta["error"] = outcome.initial_error;
  if (!outcome.failed.empty()) meta["failed_methods"] = outcome.failed;
  if (comparisons != nullptr) meta["comparison"] = comparison_json(*comparisons);
  const std::string meta_path =
      (fs::path(cli.output_dir) / (cfg.output_prefix + "_metadata.json")).string();
  write_text_file(meta_path, meta.dump(2) + "\n");

  std::cout << "wrote " << data_path << " and " << meta_path << "\n";
  if (cli.verbose) print_verbose_summary(outcome.series);
  if (comparisons != nullptr) {
    for (const MethodComparison& c : *comparisons) {
      std::cout << "  " << method_name(c.a) << " vs " << method_name(c.b)
                << ": max|diff| = " << format_double(c.max_abs_diff)
                << ", mean = " << format_double(c.mean_abs_diff) << ", points = " << c.points
                << ", skipped = " << c.skipped << "\n";
    }
  }
  if (outcome.exit_code != 0) {
    std::cerr << "numerical abort: results are partial";
    if (!outcome.initial_error.empty()) std::cerr << " (" << outcome.initial_error << ")";
    std::cerr << "\n";
  }
  return outcome.exit_code;
}

int guarded(const CliOptions& cli, const std::string& command,
            int (*body)(const CliOptions&, const std::string&)) {
  try {
    return body(cli, command);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_body(const CliOptions& cli, const std::string& command) {
  RunConfig cfg = parse_config_file(cli.config_path);
  if (cfg.has_sweep)
    throw ValidationError("config: \"sweep\" block is only valid for the sweep command");
  if (command == "compare" && cfg.methods.size() < 2)
    throw ValidationError("config: compare needs at least two methods");
  const int workers = resolve_workers(cli, cfg.engine.workers);
  cfg.engine.workers = workers;
  fs::create_directories(cli.output_dir);

  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome outcome = run_with_fallback(cfg);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (command == "compare") {
    const std::vector<MethodComparison> cmps = pairwise_diffs(outcome.series);
    return finish_run(cli, command, cfg, workers, outcome, wall_s, &cmps);
  }
  return finish_run(cli, command, cfg, workers, outcome, wall_s, nullptr);
}

int sweep_body(const CliOptions& cli, const std::string& command) {
  RunConfig base = parse_config_file(cli.config_path);
  if (!base.has_sweep) throw ValidationError("config: sweep command needs a \"sweep\" block");
  const int workers = resolve_workers(cli, base.engine.workers);
  fs::create_directories(cli.output_dir);

  const auto t0 = std::chrono::steady_clock::now();
  json entries = json::array();
  std::vector<double> fit_x, fit_y;
  int exit_code = 0;
  std::vector<std::string> outputs;

  for (std::size_t i = 0; i < base.sweep_values.size(); ++i) {
    const double value = base.sweep_values[i];
    RunConfig sub = apply_sweep_value(base, base.sweep_parameter, value);
    sub.engine.workers = workers;
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_sweep_%03zu", i);
    sub.output_prefix = base.output_prefix + suffix;

    RunOutcome outcome = run_with_fallback(sub);
    exit_code = std::max(exit_code, outcome.exit_code);

    const std::string data_name = data_file_name(sub.output_prefix, cli.format);
    write_series((fs::path(cli.output_dir) / data_name).string(), outcome.series, cli.format);
    outputs.push_back(data_name);

    json entry;
    entry[base.sweep_parameter] = value;
    entry["output"] = data_name;
    entry["caustic_points"] = caustic_counts(outcome.series);
    if (!outcome.failed.empty()) entry["failed_methods"] = outcome.failed;

    if (base.has_sweep_fit) {
      const MethodSeries* sa = nullptr;
      const MethodSeries* sb = nullptr;
      for (const MethodSeries& ms : outcome.series.series) {
        if (ms.method == base.sweep_fit_a) sa = &ms;
        if (ms.method == base.sweep_fit_b) sb = &ms;
      }
      double metric = std::numeric_limits<double>::quiet_NaN();
      if (sa != nullptr && sb != nullptr) {
        metric = 0.0;
        for (std::size_t j = 0; j < outcome.series.times.size(); ++j) {
          const cplx va = sa->values[j];
          const cplx vb = sb->values[j];
          if (std::isnan(va.real()) || std::isnan(vb.real())) continue;
          metric = std::max(metric, std::abs(va - vb));
        }
      }
      entry["fit_metric"] = metric;
      if (std::isfinite(metric) && metric > 0.0) {
        fit_x.push_back(std::log(value));
        fit_y.push_back(std::log(metric));
      }
      std::cout << base.sweep_parameter << " = " << format_double(value)
                << ": max|" << method_name(base.sweep_fit_a) << " - "
                << method_name(base.sweep_fit_b) << "| = " << format_double(metric) << "\n";
    }
    entries.push_back(entry);
  }
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json meta = base_metadata(command, base, workers, wall_s);
  meta["status"] = exit_code == 0 ? "ok" : "partial";
  meta["outputs"] = outputs;
  json sweep_meta;
  sweep_meta["parameter"] = base.sweep_parameter;
  sweep_meta["entries"] = entries;
  if (base.has_sweep_fit && fit_x.size() >= 2) {
    // Least-squares slope of log(metric) against log(value).
    const double n = static_cast<double>(fit_x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < fit_x.size(); ++k) {
      sx += fit_x[k];
      sy += fit_y[k];
      sxx += fit_x[k] * fit_x[k];
      sxy += fit_x[k] * fit_y[k];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) > 1e-12) {
      const double slope = (n * sxy - sx * sy) / denom;
      sweep_meta["fit"] = json{{"pair", {method_name(base.sweep_fit_a), method_name(base.sweep_fit_b)}},
                               {"exponent", slope},
                               {"points", fit_x.size()}};
      std::cout << "fitted scaling exponent: " << format_double(slope) << "\n";
    }
  }
  meta["sweep"] = sweep_meta;
  const std::string meta_path =
      (fs::path(cli.output_dir) / (base.output_prefix + "_metadata.json")).string();
  write_text_file(meta_path, meta.dump(2) + "\n");
  std::cout << "wrote " << meta_path << "\n";
  return exit_code;
}

// ---------------------------------------------------------------------------
// Selftest
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

PerturbationPair squeeze_pair(double omega, double eps) {
  PerturbationPair pair;
  pair.mean = preset_harmonic(omega);
  SymmetricMatrix hess(2);
  hess.set(0, 0, 2.0 * eps * omega);
  hess.set(1, 1, -2.0 * eps * omega);
  pair.delta = Hamiltonian::quadratic(hess, PhaseVec::Zero(2));
  return pair;
}

std::vector<CheckResult> run_selftest_checks(bool flip_cayley) {
  std::vector<CheckResult> checks;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  };

  {  // Counter-based generator against frozen known-answer vectors. The
     // reference generator advances its 256-bit counter before emitting a
     // block, so its block at counter c equals the bare function at c+1.
    const auto r0 = philox4x64({0ull, 0ull}, {1ull, 0ull, 0ull, 0ull});
    const auto r42 = philox4x64({42ull, 0ull}, {1ull, 0ull, 0ull, 0ull});
    const bool pass = r0[0] == 0x02f4ba6408e4d89bull && r0[1] == 0x3dd62b0b9ca8c5b2ull &&
                      r0[2] == 0x1c8667a55d902e79ull && r0[3] == 0x907d7a052fd5b4dcull &&
                      r42[0] == 0xd1f8817d4d62880eull;
    add("rng_reference", pass, "Philox4x64-10 known-answer vectors");
  }

  {  // Antisymmetric product orientation.
    PhaseVec a(2), b(2);
    a << 2, 3;
    b << 5, 7;
    add("skew_orientation", std::abs(skew_product(a, b) - 1.0) < 1e-15,
        "skew product (2,3)^(5,7) = 1");
  }

  {  // Cayley convention against the exact quarter-period rotation.
    const Hamiltonian ho = preset_harmonic(1.0);
    const Mat m_exact = mat_exp(symplectic_j(1) * ho.quad().hess.mat(), kPi / 2.0);
    bool pass = false;
    std::string detail;
    try {
      const CenterGenerating gen = center_generating(ho.quad(), kPi / 2.0);
      const Mat m_back = cayley_b_to_m(gen.b, flip_cayley).m;
      const double db = (gen.b.mat() + Mat::Identity(2, 2)).norm();
      const double dm = (m_back - m_exact).norm();
      pass = db <= 1e-9 && dm <= 1e-9;
      detail = "B(quarter period) = -I: " + format_double(db) +
               ", Cayley-vs-exponential: " + format_double(dm);
      if (flip_cayley) detail += " [convention flipped by test hook]";
    } catch (const std::exception& e) {
      detail = e.what();
    }
    add("cayley_calibration", pass, detail);
  }

  {  // Cayley round trip on a generic symmetric matrix.
    SymmetricMatrix b(2);
    b.set(0, 0, 0.3);
    b.set(0, 1, -0.2);
    b.set(1, 1, 0.8);
    const Mat m = cayley_b_to_m(b).m;
    const SymmetricMatrix b2 = cayley_m_to_b(m);
    const double diff = (b.mat() - b2.mat()).norm();
    add("cayley_roundtrip", diff <= 1e-12, "|B - B(M(B))| = " + format_double(diff));
  }

  {  // Chord convention against the exact echo map of a quadratic pair.
    const PerturbationPair pair = squeeze_pair(1.0, 1e-3);
    PhaseVec x(2);
    x << 0.7, -0.4;
    const double t = 1.1;
    const PhaseVec xi = chord(pair, x, t);
    const PhaseVec exact = exact_echo_chord(pair, x, t);
    const double diff = (xi - exact).norm();
    const double flipped = (-xi - exact).norm();
    add("chord_calibration", diff <= 5e-6 && flipped > 1e-4,
        "|chord - exact| = " + format_double(diff) +
            ", sign-flipped candidate differs by " + format_double(flipped));
  }

  {  // Tangent flow of a nonlinear Hamiltonian stays symplectic.
    PhaseVec x(2);
    x << 0.3, 1.1;
    IntegratorOptions opt;
    const Trajectory traj = integrate_trajectory(preset_quartic(0.1), x, 2.0, opt);
    const TangentFlow tf = integrate_tangent(preset_quartic(0.1), traj);
    double worst = 0.0;
    for (const Mat& m : tf.m) worst = std::max(worst, symplectic_defect(m));
    add("tangent_symplectic", worst <= 1e-9, "max defect = " + format_double(worst));
  }

  {  // Action gradient against finite differences of the action.
    PerturbationPair pair;
    pair.mean = preset_quartic(0.1);
    SymmetricMatrix hess(2);
    hess.set(1, 1, 0.02);
    pair.delta = Hamiltonian::quadratic(hess, PhaseVec::Zero(2));
    PhaseVec x(2);
    x << 0.2, 0.9;
    const double t = 1.5;
    const PhaseVec g = delta_action_gradient(pair, x, t);
    const PhaseVec g_fd =
        fd_gradient([&](const PhaseVec& y) { return delta_action(pair, y, t); }, x);
    const double rel = (g - g_fd).norm() / std::max(1.0, g_fd.norm());
    add("gradient_consistency", rel <= 1e-6, "relative deviation = " + format_double(rel));
  }

  {  // Hessian: tangent accumulation vs central differences.
    const PerturbationPair pair = squeeze_pair(1.0, 0.1);
    PhaseVec x(2);
    x << 0.5, -0.3;
    const double t = 1.3;
    const SymmetricMatrix b_tan = hessian_delta_action(pair, x, t, HessianMethod::tangent);
    const SymmetricMatrix b_fd = hessian_delta_action(pair, x, t, HessianMethod::fd);
    const double diff = (b_tan.mat() - b_fd.mat()).norm();
    add("hessian_consistency", diff <= 1e-6, "|tangent - fd| = " + format_double(diff));
  }

  {  // Exact-flow and midpoint action quadratures agree on a quadratic pair.
    const PerturbationPair pair = squeeze_pair(1.0, 0.1);
    PhaseVec x(2);
    x << 1.0, 2.0;
    const double t = 0.9;
    IntegratorOptions fine;
    fine.dt = 1e-4;
    const double s_exact = delta_action(pair, x, t, ActionScheme::exact_flow, fine);
    const double s_mid = delta_action(pair, x, t, ActionScheme::midpoint, fine);
    const double diff = std::abs(s_exact - s_mid);
    add("action_schemes_agree", diff <= 1e-8, "|exact - midpoint| = " + format_double(diff));
  }

  {  // Amplitude from the action Hessian equals the stationary-phase weight.
    const PerturbationPair pair = squeeze_pair(1.0, 0.05);
    PhaseVec x(2);
    x << 0.4, 0.8;
    const double t = 1.2;
    const double w_form = amplitude_weight(quad_action_form(pair, t).b);
    const double w_sp = sp_reduce(pair, x, t).weight;
    const double diff = std::abs(w_form - w_sp);
    add("amplitude_identity", diff <= 1e-8, "|w(form) - w(sp)| = " + format_double(diff));
  }

  {  // Grid propagation is unitary and starts at exactly L(0) = 1.
    const PerturbationPair pair = squeeze_pair(1.0, 0.01);
    PhaseVec c(2);
    c << 0.0, 1.0;
    const GaussianState state = coherent_state(c);
    OracleReport report;
    const std::vector<double> times{0.0, 0.5, 1.0};
    const std::vector<cplx> l = loschmidt_exact_series(state, pair, times, {}, &report);
    const double drift = report.norm_drift;
    const double at0 = std::abs(l.front() - cplx(1.0, 0.0));
    add("grid_unitarity", drift <= 1e-10 && at0 <= 1e-12,
        "norm drift = " + format_double(drift) + ", |L(0) - 1| = " + format_double(at0));
  }

  {  // Exact grid result against the closed Gaussian integral (small eps).
    const PerturbationPair pair = squeeze_pair(1.0, 0.01);
    PhaseVec c(2);
    c << 0.0, 1.0;
    const GaussianState state = coherent_state(c);
    const std::vector<double> times{1.0};
    const cplx l_grid = loschmidt_exact(state, pair, 1.0);
    const MethodSeries closed = estimate_quadratic_closed(state, pair, times);
    const double diff = std::abs(l_grid - closed.values.front());
    add("oracle_vs_closed", diff <= 1e-3, "|grid - closed| = " + format_double(diff));
  }

  {  // Worker-count independence of the Monte Carlo sweep.
    const PerturbationPair pair = squeeze_pair(1.0, 0.1);
    PhaseVec c(2);
    c << 0.0, 1.0;
    const GaussianState state = coherent_state(c);
    const std::vector<double> times{0.0, 0.6, 1.2};
    EngineOptions a, b;
    a.sampler.n = 2000;
    a.sampler.seed = 777;
    a.workers = 1;
    b = a;
    b.workers = 4;
    const EchoSeries ra = run_methods(state, pair, times, {Method::dr_mean, Method::idr}, a);
    const EchoSeries rb = run_methods(state, pair, times, {Method::dr_mean, Method::idr}, b);
    bool same = true;
    for (std::size_t s = 0; s < ra.series.size(); ++s) {
      for (std::size_t j = 0; j < times.size(); ++j) {
        same = same && ra.series[s].values[j] == rb.series[s].values[j] &&
               ra.series[s].se_re[j] == rb.series[s].se_re[j] &&
               ra.series[s].se_im[j] == rb.series[s].se_im[j];
      }
    }
    add("determinism_workers", same, "1-worker and 4-worker runs are bitwise identical");
  }

  {  // Vanishing perturbation: every estimator returns exactly 1.
    PerturbationPair pair;
    pair.mean = preset_harmonic(1.0);
    pair.delta = Hamiltonian::quadratic(SymmetricMatrix(2), PhaseVec::Zero(2));
    PhaseVec c(2);
    c << 0.3, -0.2;
    const GaussianState state = coherent_state(c);
    EngineOptions opts;
    opts.sampler.n = 500;
    const EchoSeries r =
        run_methods(state, pair, {0.0, 0.7, 1.4}, {Method::dr_mean, Method::idr}, opts);
    bool exact = true;
    for (const MethodSeries& ms : r.series)
      for (std::size_t j = 0; j < r.times.size(); ++j)
        exact = exact && ms.values[j] == cplx(1.0, 0.0) && ms.se_re[j] == 0.0;
    add("vanishing_perturbation", exact, "all values exactly 1 with zero standard error");
  }

  return checks;
}

}  // namespace

int cmd_run(const CliOptions& cli) { return guarded(cli, "run", run_body); }

int cmd_compare(const CliOptions& cli) { return guarded(cli, "compare", run_body); }

int cmd_sweep(const CliOptions& cli) { return guarded(cli, "sweep", sweep_body); }

int cmd_selftest(const CliOptions& cli) {
  std::vector<CheckResult> checks;
  try {
    checks = run_selftest_checks(cli.flip_cayley);
  } catch (const std::exception& e) {
    std::cerr << "selftest aborted: " << e.what() << "\n";
    return 3;
  }
  int failures = 0;
  for (const CheckResult& c : checks) {
    std::printf("[%s] %-24s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    if (!c.pass) ++failures;
  }
  std::printf("%zu checks, %d failure%s\n", checks.size(), failures, failures == 1 ? "" : "s");
  return failures == 0 ? 0 : 3;
}

}  // namespace loschmidt
