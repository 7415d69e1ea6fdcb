// vacle command-line driver. Talks to the library only through vacle.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vacle/vacle.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Failure {
  vacle_status status;
  std::string message;
};

int exit_code(vacle_status st) {
  switch (st) {
    case VACLE_OK:
      return kExitOk;
    case VACLE_ERR_ARGUMENT:
    case VACLE_ERR_CONFIG:
    case VACLE_ERR_IO:
      return kExitConfig;
    case VACLE_ERR_NUMERICAL:
      return kExitNumerical;
    case VACLE_ERR_INTERNAL:
      return kExitInternal;
  }
  return kExitInternal;
}

void check(vacle_status st) {
  if (st != VACLE_OK) throw Failure{st, vacle_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  vacle_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using SpectrumPtr = std::unique_ptr<vacle_spectrum, Deleter<vacle_spectrum, vacle_spectrum_free>>;
using ResultPtr = std::unique_ptr<vacle_result, Deleter<vacle_result, vacle_result_free>>;
using CalibrationPtr =
    std::unique_ptr<vacle_calibration, Deleter<vacle_calibration, vacle_calibration_free>>;
using ExperimentPtr =
    std::unique_ptr<vacle_experiment, Deleter<vacle_experiment, vacle_experiment_free>>;
using ReportsPtr = std::unique_ptr<vacle_reports, Deleter<vacle_reports, vacle_reports_free>>;

vacle_family parse_family(const std::string& s) {
  if (s == "population") return VACLE_FAMILY_POPULATION;
  if (s == "fisher") return VACLE_FAMILY_FISHER;
  if (s == "autocov") return VACLE_FAMILY_AUTOCOV;
  throw Failure{VACLE_ERR_CONFIG, "unknown family '" + s + "' (population, fisher or autocov)"};
}

vacle_method parse_method(const std::string& s) {
  if (s == "vacle") return VACLE_METHOD_VACLE;
  if (s == "tvacle") return VACLE_METHOD_TVACLE;
  if (s == "py") return VACLE_METHOD_PY;
  if (s == "lwy") return VACLE_METHOD_LWY;
  if (s == "wy") return VACLE_METHOD_WY;
  throw Failure{VACLE_ERR_CONFIG, "unknown method '" + s + "' (vacle, tvacle, py, lwy or wy)"};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Failure{VACLE_ERR_IO, "cannot write " + path};
  out << text;
  if (!out) throw Failure{VACLE_ERR_IO, "cannot write " + path};
}

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(10);
  out << x;
  return out.str();
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string family = "population";
  std::size_t p = 0, n = 0, T = 0, reps = 500, threads = 0;
  std::uint64_t seed = 0;
  std::string cache_dir;
  bool force = false;
};

int cmd_calibrate(const CalibrateArgs& a, bool json) {
  vacle_calibration* raw = nullptr;
  int hit = 0;
  check(vacle_calibrate(parse_family(a.family), a.p, a.n, a.T, a.reps, a.seed, a.cache_dir.c_str(),
                        a.force ? 1 : 0, a.threads, &raw, &hit));
  CalibrationPtr cal(raw);
  char* path_raw = nullptr;
  check(vacle_calibration_cache_path(cal.get(), a.cache_dir.c_str(), &path_raw));
  const std::string path = take(path_raw);
  if (json) {
    char* js = nullptr;
    check(vacle_calibration_json(cal.get(), &js));
    auto j = nlohmann::json::parse(take(js));
    j["cache_file"] = path;
    j["cache_hit"] = hit != 0;
    std::cout << j.dump() << '\n';
    return kExitOk;
  }
  std::cout << (hit ? "cache hit: " : "wrote: ") << path << '\n';
  for (const char* which : {"c1", "c2", "c3a", "c3b"}) {
    double v = 0.0;
    int clamped = 0;
    check(vacle_calibration_ridge(cal.get(), which, &v, &clamped));
    std::cout << which << " = " << fmt(v) << (clamped ? "  (clamped: nonpositive raw value)" : "")
              << '\n';
  }
  std::cout << "lwy_dT = " << fmt(vacle_calibration_lwy_dT(cal.get())) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string input;
  std::string column;
  std::string method = "tvacle";
  std::string family = "population";
  std::size_t n = 0, T = 0, L = 20;
  double sigma2 = 1.0;
  bool estimate_sigma2 = false;
  std::optional<double> tau, ridge, k1, k2, kappa, C, dT, dn;
  std::string ridge_choice;
  int py_start = 0;
  std::size_t calib_reps = 500;
  std::uint64_t seed = 0;
  std::string cache_dir;
  std::string trace, plot_data;
};

int cmd_estimate(const EstimateArgs& a, bool json) {
  const vacle_family family = parse_family(a.family);
  const vacle_method method = parse_method(a.method);
  const int scale_power = family == VACLE_FAMILY_AUTOCOV ? 2 : 1;

  vacle_spectrum* sraw = nullptr;
  check(vacle_spectrum_ingest(a.input.c_str(), a.column.empty() ? nullptr : a.column.c_str(), a.n,
                              a.T, scale_power, &sraw));
  SpectrumPtr spectrum(sraw);
  const std::size_t p = vacle_spectrum_size(spectrum.get());

  vacle_estimate_options o;
  vacle_estimate_options_default(&o);
  o.method = method;
  o.family = family;
  o.L = a.L;
  o.sigma2 = a.sigma2;
  o.estimate_sigma2 = a.estimate_sigma2 ? 1 : 0;
  o.py_start = a.py_start;
  if (a.tau) o.tau = *a.tau;
  if (a.k1) o.k1 = *a.k1;
  if (a.k2) o.k2 = *a.k2;
  if (a.kappa) o.kappa = *a.kappa;
  if (a.C) o.py_C = *a.C;
  if (a.dn) o.wy_dn = *a.dn;

  const bool valley = method == VACLE_METHOD_VACLE || method == VACLE_METHOD_TVACLE;
  if (valley && a.L > p) {
    throw Failure{VACLE_ERR_CONFIG, "search bound L = " + std::to_string(a.L) + " needs at least L eigenvalues, got p = " +
                                        std::to_string(p) + ": L + 1 exceeds p"};
  }
  const bool need_ridge = valley && !a.ridge;
  const bool need_dT = method == VACLE_METHOD_LWY && !a.dT;
  std::string ridge_used;
  if (need_ridge || need_dT) {
    vacle_calibration* craw = nullptr;
    check(vacle_calibrate(family, p, a.n, a.T, a.calib_reps, a.seed, a.cache_dir.c_str(), 0, 0,
                          &craw, nullptr));
    CalibrationPtr cal(craw);
    if (need_ridge) {
      ridge_used = a.ridge_choice;
      if (ridge_used.empty()) {
        ridge_used = method == VACLE_METHOD_VACLE ? "c1"
                     : family == VACLE_FAMILY_FISHER ? "c3a"
                                                     : "c2";
      }
      check(vacle_calibration_ridge(cal.get(), ridge_used.c_str(), &o.ridge, nullptr));
    }
    if (need_dT) o.lwy_dT = vacle_calibration_lwy_dT(cal.get());
  }
  if (a.ridge) o.ridge = *a.ridge;
  if (a.dT) o.lwy_dT = *a.dT;

  vacle_result* rraw = nullptr;
  check(vacle_estimate(spectrum.get(), &o, &rraw));
  ResultPtr result(rraw);
  const std::size_t q = vacle_result_q(result.get());
  const bool exhausted = vacle_result_exhausted(result.get()) != 0;

  std::string trace_json;
  if (valley) {
    char* t = nullptr;
    check(vacle_result_trace_json(result.get(), &t));
    trace_json = take(t);
    if (!a.trace.empty()) write_file(a.trace, trace_json + "\n");
    if (!a.plot_data.empty()) {
      char* csv = nullptr;
      check(vacle_result_plot_csv(result.get(), &csv));
      write_file(a.plot_data, take(csv));
    }
  } else if (!a.trace.empty() || !a.plot_data.empty()) {
    throw Failure{VACLE_ERR_CONFIG, "--trace and --plot-data need method vacle or tvacle"};
  }

  if (json) {
    nlohmann::json j{{"method", a.method}, {"family", a.family}, {"p", p},
                     {"q_hat", q},         {"exhausted", exhausted},
                     {"sigma2", vacle_result_sigma2(result.get())}};
    if (valley) {
      j["c_n"] = o.ridge;
      if (!ridge_used.empty()) j["ridge"] = ridge_used;
    }
    if (method == VACLE_METHOD_LWY) j["d_T"] = o.lwy_dT;
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "q_hat = " << q << (exhausted ? "  (exhausted: scanned to L without stopping)" : "")
              << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps, threads;
  std::string output;
  std::vector<std::string> sets;
  bool trace = false;
  bool timing = false;
};

void emit_reports(const vacle_reports* reports, bool json, const std::string& output) {
  char* csv = nullptr;
  check(vacle_reports_csv(reports, &csv));
  const std::string csv_text = take(csv);
  char* js = nullptr;
  check(vacle_reports_json(reports, &js));
  const auto arr = nlohmann::json::parse(take(js));
  if (!output.empty()) {
    write_file(output, csv_text);
    std::filesystem::path mirror(output);
    mirror.replace_extension(".json");
    if (mirror.string() != output) write_file(mirror.string(), arr.dump(1) + "\n");
  }
  if (json) {
    for (const auto& r : arr) std::cout << r.dump() << '\n';
  } else if (output.empty()) {
    std::cout << csv_text;
  }
}

int cmd_simulate(const SimulateArgs& a, bool json) {
  vacle_experiment* eraw = nullptr;
  check(vacle_experiment_load(a.config.c_str(), &eraw));
  ExperimentPtr exp(eraw);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure{VACLE_ERR_CONFIG, "--set expects key=value, got '" + kv + "'"};
    check(vacle_experiment_set(exp.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (a.seed) check(vacle_experiment_set(exp.get(), "harness.seed", std::to_string(*a.seed).c_str()));
  if (a.reps) check(vacle_experiment_set(exp.get(), "harness.reps", std::to_string(*a.reps).c_str()));
  if (a.threads) {
    check(vacle_experiment_set(exp.get(), "harness.threads", std::to_string(*a.threads).c_str()));
  }
  if (!a.output.empty()) check(vacle_experiment_set(exp.get(), "io.output", a.output.c_str()));
  if (a.trace) check(vacle_experiment_set(exp.get(), "io.trace", "true"));
  if (a.timing) check(vacle_experiment_set(exp.get(), "io.timing", "true"));
  check(vacle_experiment_validate(exp.get()));

  char* out_raw = nullptr;
  check(vacle_experiment_output(exp.get(), &out_raw, nullptr));
  const std::string output = take(out_raw);

  vacle_reports* rraw = nullptr;
  const vacle_status st = vacle_experiment_run(exp.get(), &rraw);
  const std::string err = st == VACLE_OK ? "" : vacle_last_error();
  ReportsPtr reports(rraw);
  if (reports) emit_reports(reports.get(), json, output);
  if (st != VACLE_OK) throw Failure{st, err};
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::string format = "csv";
  std::string output;
};

int cmd_report(const ReportArgs& a, bool json) {
  vacle_reports* rraw = nullptr;
  check(vacle_reports_load_json(a.input.c_str(), &rraw));
  ReportsPtr reports(rraw);
  std::string text;
  if (a.format == "csv" && !json) {
    char* csv = nullptr;
    check(vacle_reports_csv(reports.get(), &csv));
    text = take(csv);
  } else if (a.format == "json" || json) {
    char* js = nullptr;
    check(vacle_reports_json(reports.get(), &js));
    std::ostringstream out;
    for (const auto& r : nlohmann::json::parse(take(js))) out << r.dump() << '\n';
    text = out.str();
  } else {
    throw Failure{VACLE_ERR_CONFIG, "--format must be csv or json"};
  }
  if (a.output.empty()) {
    std::cout << text;
  } else {
    write_file(a.output, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct LimitsArgs {
  std::string family = "population";
  double c = 0.0, y = 0.0, sigma2 = 1.0;
  std::vector<double> spikes, theta, gamma;
};

int cmd_limits(const LimitsArgs& a, bool json) {
  const vacle_family family = parse_family(a.family);
  const std::vector<double>& first = family == VACLE_FAMILY_AUTOCOV ? a.theta : a.spikes;
  char* js = nullptr;
  check(vacle_limits_json(family, a.c, a.y, a.sigma2, first.data(), first.size(), a.gamma.data(),
                          a.gamma.size(), &js));
  const auto j = nlohmann::json::parse(take(js));
  if (json) {
    std::cout << j.dump() << '\n';
    return kExitOk;
  }
  if (family == VACLE_FAMILY_POPULATION) {
    std::cout << "M-P support = [" << fmt(j["lower_edge"]) << ", " << fmt(j["upper_edge"]) << "]\n";
    std::cout << "spike threshold = " << fmt(j["threshold"]) << '\n';
    for (const auto& s : j["spikes"]) {
      std::cout << "spike " << fmt(s["spike"]) << " -> " << fmt(s["limit"])
                << (s["identifiable"].get<bool>() ? "" : "  (below threshold)") << '\n';
    }
  } else if (family == VACLE_FAMILY_FISHER) {
    std::cout << "spike threshold U = " << fmt(j["threshold"]) << '\n';
    std::cout << "eigenvalue support = [" << fmt(j["lower_edge"]) << ", " << fmt(j["upper_edge"])
              << "]\n";
    for (const auto& s : j["spikes"]) {
      std::cout << "spike " << fmt(s["spike"]) << " -> " << fmt(s["limit"])
                << (s["identifiable"].get<bool>() ? "" : "  (below threshold)") << '\n';
    }
  } else {
    std::cout << "b_1 = " << fmt(j["upper_edge"]) << '\n';
    std::cout << "lower edge = " << fmt(j["lower_edge"]) << '\n';
    std::cout << "T(b_1+) = " << fmt(j["t_at_edge"]) << '\n';
    for (const auto& f : j["factors"]) {
      std::cout << "theta " << fmt(f["theta"]) << " -> " << fmt(f["limit"])
                << (f["identifiable"].get<bool>() ? "" : "  (not identifiable)") << '\n';
    }
  }
  std::cout << "identifiable = " << j["identifiable"].get<std::size_t>() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Valley-cliff order determination for spiked models"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "One JSON object per line on stdout");
  app.set_version_flag("--version", std::string(vacle_version()));

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Pure-noise ridge calibration (cached)");
  cal->add_option("--kind,--family", ca.family, "population, fisher or autocov")->capture_default_str();
  cal->add_option("--p", ca.p, "Dimension")->required();
  cal->add_option("--n", ca.n, "Sample size (population, Fisher)");
  cal->add_option("--T", ca.T, "Noise sample size (Fisher) or series length (autocov)");
  cal->add_option("--reps", ca.reps, "Noise replications R >= 2")->capture_default_str();
  cal->add_option("--seed", ca.seed, "Master seed")->capture_default_str();
  cal->add_option("--cache-dir", ca.cache_dir, "Cache directory (default $VACLE_CACHE_DIR or .vacle-cache)");
  cal->add_option("--threads", ca.threads, "Worker threads, 0 = all cores")->capture_default_str();
  cal->add_flag("--force", ca.force, "Recompute even when cached");
  cal->add_flag("--json", json, "JSON output");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate the number of spikes of a spectrum file");
  est->add_option("input,--input", ea.input, "Eigenvalue file (one per line, or CSV with --column)")
      ->required();
  est->add_option("--column", ea.column, "CSV column holding the eigenvalues");
  est->add_option("--method", ea.method, "vacle, tvacle, py, lwy or wy")->capture_default_str();
  est->add_option("--family", ea.family, "population, fisher or autocov")->capture_default_str();
  est->add_option("--n", ea.n, "Sample size behind the spectrum");
  est->add_option("--T", ea.T, "Noise sample size (Fisher) or series length (autocov)");
  est->add_option("--sigma2", ea.sigma2, "Known noise level")->capture_default_str();
  est->add_flag("--estimate-sigma2", ea.estimate_sigma2, "Estimate sigma2 (population only)");
  est->add_option("--tau", ea.tau, "Threshold in (0, 1)");
  est->add_option("--L", ea.L, "Search bound")->capture_default_str();
  est->add_option("--ridge", ea.ridge, "Fixed ridge c_n (otherwise calibrated)");
  est->add_option("--ridge-choice", ea.ridge_choice, "Calibrated ridge: c1, c2, c3a or c3b");
  est->add_option("--k1", ea.k1, "Left slope of f_n");
  est->add_option("--k2", ea.k2, "Right slope of f_n");
  est->add_option("--kappa", ea.kappa, "Half-width of the identity window of f_n");
  est->add_option("--C", ea.C, "PY constant");
  est->add_option("--py-start", ea.py_start, "First PY index (0 or 1)")->capture_default_str();
  est->add_option("--dT", ea.dT, "LWY threshold d_T (otherwise calibrated)");
  est->add_option("--dn", ea.dn, "WY margin d_n");
  est->add_option("--calib-reps", ea.calib_reps, "Replications for automatic calibration")
      ->capture_default_str();
  est->add_option("--seed", ea.seed, "Calibration seed")->capture_default_str();
  est->add_option("--cache-dir", ea.cache_dir, "Calibration cache directory");
  est->add_option("--trace", ea.trace, "Write the ratio trace as JSON");
  est->add_option("--plot-data", ea.plot_data, "Write (i, ratio, tau) rows as CSV");
  est->add_flag("--json", json, "JSON output");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo experiment config");
  sim->add_option("--config", sa.config, "Experiment config file")->required();
  sim->add_option("--seed", sa.seed, "Override harness.seed");
  sim->add_option("--reps", sa.reps, "Override harness.reps");
  sim->add_option("--threads", sa.threads, "Override harness.threads");
  sim->add_option("--output", sa.output, "CSV path; a .json mirror is written next to it");
  sim->add_option("--set", sa.sets, "Override any key: section.key=value");
  sim->add_flag("--trace", sa.trace, "Keep ratio traces in the JSON mirror");
  sim->add_flag("--timing", sa.timing, "Record wall-clock runtime_s");
  sim->add_flag("--json", json, "JSON output");

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Render a JSON result file");
  rep->add_option("input,--input", ra.input, "JSON written by simulate")->required();
  rep->add_option("--format", ra.format, "csv or json")->capture_default_str();
  rep->add_option("--output", ra.output, "Write here instead of stdout");
  rep->add_flag("--json", json, "JSON output");

  LimitsArgs la;
  auto* lim = app.add_subcommand("limits", "Print edges, thresholds and spike limits");
  lim->add_option("--family", la.family, "population, fisher or autocov")->capture_default_str();
  lim->add_option("--c", la.c, "p / n");
  lim->add_option("--y", la.y, "p / T");
  lim->add_option("--sigma2", la.sigma2, "Noise level")->capture_default_str();
  lim->add_option("--spikes", la.spikes, "Population spikes")->delimiter(',');
  lim->add_option("--theta", la.theta, "AR(1) coefficients of the factors")->delimiter(',');
  lim->add_option("--gamma", la.gamma, "Innovation variances (one or one per theta)")->delimiter(',');
  lim->add_flag("--json", json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (cal->parsed()) return cmd_calibrate(ca, json);
    if (est->parsed()) return cmd_estimate(ea, json);
    if (sim->parsed()) return cmd_simulate(sa, json);
    if (rep->parsed()) return cmd_report(ra, json);
    if (lim->parsed()) return cmd_limits(la, json);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
