#pragma once

// Experiment description and its sectioned key = value text format.
//
//   [model]
//   family = population
//   spikes = 7, 6, 5, 4
//   grid   = 100x100, 200x800
//   [estimator]
//   methods = vacle, tvacle, py
//   [harness]
//   reps = 200
//   seed = 7
//
// A key may also be written fully qualified ("harness.seed = 7") outside any
// section. Unknown sections and keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vacle/calibration.hpp"
#include "vacle/estimators.hpp"
#include "vacle/spectra.hpp"

namespace vacle {

/// One (p, n, T) combination. Population grids leave T empty, auto-covariance
/// grids leave n at 0.
struct GridPoint {
  std::size_t p = 0;
  std::size_t n = 0;
  std::optional<std::size_t> T;

  bool operator==(const GridPoint&) const = default;
};

/// "p x n" (population), "p x n x T" (Fisher) or "p x T" (auto-covariance).
GridPoint parse_grid_point(const std::string& token, ModelKind kind);
std::string to_string(const GridPoint& g, ModelKind kind);

enum class Sigma2Mode { Known, Estimated };

struct ExperimentConfig {
  // [model]
  std::string model_id = "model";
  ModelKind family = ModelKind::SpikedPopulation;
  std::vector<double> spikes;
  std::vector<double> alpha;
  FisherNoise noise = FisherNoise::SplitOneTwo;
  std::vector<double> theta;
  std::vector<double> gamma;
  double sigma2 = 1.0;
  std::size_t burn_in = 1000;
  std::vector<GridPoint> grid;

  // [estimator]
  std::vector<Method> methods;
  std::optional<double> tau;            ///< default 0.5, 0.8 for Fisher
  std::size_t L = 20;
  double k1 = 5.0;
  double k2 = 5.0;
  std::optional<double> kappa;          ///< default log log p * p^{-2/3}
  RidgeChoice vacle_ridge = RidgeChoice::C1;
  std::optional<RidgeChoice> tvacle_ridge;  ///< default c2, c3a for Fisher
  std::optional<double> ridge;          ///< fixed c_n for both valley-cliff methods
  std::optional<double> py_C;           ///< default from the PY table at c = p/n
  PyStart py_start = PyStart::Zero;
  std::optional<double> lwy_dT;         ///< default from calibration
  std::optional<double> wy_dn;          ///< default log log p * p^{-2/3}

  // [calibration]
  std::size_t calibration_reps = 500;
  std::optional<std::uint64_t> calibration_seed;  ///< default harness seed
  std::optional<std::filesystem::path> cache_dir;  ///< none: keep in memory

  // [harness]
  std::size_t reps = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  Sigma2Mode sigma2_mode = Sigma2Mode::Known;

  // [io]
  std::string output;
  bool trace = false;
  bool timing = false;  ///< record wall-clock runtime_s

  double effective_tau() const;
  RidgeChoice effective_tvacle_ridge() const;
  std::uint64_t effective_calibration_seed() const { return calibration_seed.value_or(seed); }

  /// The model at one grid point.
  ModelSpec model_at(const GridPoint& g) const;
  /// Throws ConfigError naming the problem.
  void validate() const;

  /// Applies "section.key" = value. Throws ConfigError on unknown keys or
  /// unparsable values, naming the key.
  void set(const std::string& key, const std::string& value);
};

ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "<memory>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every accepted "section.key".
const std::vector<std::string>& config_keys();

}  // namespace vacle
