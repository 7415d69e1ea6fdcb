#pragma once

// Seeded Monte-Carlo runner: per grid point, calibrate once, then simulate
// R spectra and apply every configured estimator to each of them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vacle/calibration.hpp"
#include "vacle/config.hpp"
#include "vacle/estimators.hpp"

namespace vacle {

/// Fully resolved tuning of every estimator at one grid point.
struct MethodParams {
  ModelKind kind = ModelKind::SpikedPopulation;
  double tau = 0.5;
  std::size_t L = 20;
  double vacle_ridge = 0.0;
  double tvacle_ridge = 0.0;
  TransformParams transform;  ///< edge, kappa, k1, k2
  double py_C = 0.0;
  PyStart py_start = PyStart::Zero;
  double lwy_dT = 0.0;
  double wy_edge = 0.0;
  double wy_dn = 0.0;
};

/// Resolves defaults of `cfg` at grid point `g`. `calib` may be empty when
/// no selected method needs it.
MethodParams resolve_params(const ExperimentConfig& cfg, const GridPoint& g,
                            const CalibrationResult* calib);

/// True when some selected method needs a calibration run.
bool needs_calibration(const ExperimentConfig& cfg);

/// Runs one estimator. VACLE and TVACLE keep their ratio trace.
Estimate run_method(Method method, const Spectrum& spectrum, double sigma2,
                    const MethodParams& params);

/// Number of histogram columns in the CSV: d0 .. d19 and d_ge_20.
inline constexpr std::size_t kCsvBuckets = 20;

struct SimulationReport {
  std::string model_id;
  ModelKind kind = ModelKind::SpikedPopulation;
  GridPoint size;
  Method method = Method::Vacle;
  std::size_t reps = 0;        ///< replications that entered the metrics
  std::uint64_t seed = 0;
  std::size_t true_q = 0;
  double mean = 0.0;
  double mse = 0.0;
  double misest_rate = 0.0;
  /// counts[k] = number of replications with q_hat = k, k = 0..L.
  std::vector<std::size_t> counts;
  std::size_t exhausted = 0;   ///< stopping-rule runs that hit L
  double runtime_s = 0.0;
  bool partial = false;
  std::string diagnostic;
  std::optional<double> sigma2_mean;
  std::optional<double> sigma2_mse;
  std::vector<std::size_t> estimates;       ///< q_hat per replication
  std::vector<std::uint64_t> spectrum_hashes;
  std::vector<RatioTrace> traces;           ///< kept with io.trace

  /// Share of replications with q_hat = k; the last entry folds q_hat >= 20.
  std::vector<double> csv_distribution() const;
  double exact_rate() const { return 1.0 - misest_rate; }
};

void to_json(nlohmann::json& j, const SimulationReport& r);
void from_json(const nlohmann::json& j, SimulationReport& r);

/// Aggregates per-replication estimates into a report.
SimulationReport aggregate(std::vector<std::size_t> estimates, std::size_t true_q, std::size_t L);

/// Runs every grid point. Reports are grouped by grid point, methods in
/// configuration order. A failing replication stops its grid point; the
/// replications before it are reported with `partial` set.
std::vector<SimulationReport> run_experiment(const ExperimentConfig& cfg);

/// Header plus one row per report, in input order.
std::string summarize(const std::vector<SimulationReport>& reports);
std::string csv_header();

/// JSON array of reports. Traces are included only when present.
nlohmann::json reports_to_json(const std::vector<SimulationReport>& reports);
std::vector<SimulationReport> reports_from_json(const nlohmann::json& j);

}  // namespace vacle
