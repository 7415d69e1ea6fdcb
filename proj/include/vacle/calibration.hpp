#pragma once

// Pure-noise ridge calibration, the one-step sigma2 estimator and the
// tabulated PY constant.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vacle/spectra.hpp"

namespace vacle {

/// Identifies one calibration run. For the auto-covariance family `n` is
/// unused and the series length is `T`.
struct CalibrationKey {
  ModelKind kind = ModelKind::SpikedPopulation;
  std::size_t p = 0;
  std::size_t n = 0;
  std::optional<std::size_t> T;
  std::size_t reps = 500;
  std::uint64_t seed = 0;

  /// Sample size entering log log n: T for auto-covariance, else n.
  std::size_t sample_size() const;
  /// Pure-noise model of this family and size.
  ModelSpec noise_model() const;
  /// "calib-<kind>-p<p>-n<n>-T<T>-R<reps>-s<seed>.json"
  std::string file_name() const;
  /// Throws ConfigError on reps < 2, sample size < 3 or missing dimensions.
  void validate() const;

  bool operator==(const CalibrationKey&) const = default;
};

/// Levels at which the top-gap distribution is summarized.
inline constexpr std::array<double, 5> kQuantileLevels{0.01, 0.05, 0.8, 0.95, 0.99};

struct Ridge {
  double raw = 0.0;     ///< value before clamping
  double value = 0.0;   ///< max(raw, kRidgeFloor) when clamped
  bool clamped = false;

  bool operator==(const Ridge&) const = default;
};

inline constexpr double kRidgeFloor = 1e-8;

enum class RidgeChoice { C1, C2, C3a, C3b };

std::string to_string(RidgeChoice r);
/// Accepts "c1", "c2", "c3a", "c3b".
RidgeChoice parse_ridge_choice(const std::string& text);

struct CalibrationResult {
  CalibrationKey key;
  double mean_gap = 0.0;                     ///< m
  std::array<double, 5> quantiles{};         ///< q(alpha) at kQuantileLevels
  Ridge c1, c2, c3a, c3b;
  /// LWY tuning: smallest d_T for which the stopping rule fires at i = 1
  /// in at least 99% of the noise runs.
  double lwy_dT = 0.0;

  double quantile(double alpha) const;
  const Ridge& ridge(RidgeChoice choice) const;
  bool any_clamped() const;

  bool operator==(const CalibrationResult&) const = default;
};

void to_json(nlohmann::json& j, const CalibrationResult& r);
void from_json(const nlohmann::json& j, CalibrationResult& r);

/// Sample value at rank ceil(R alpha) of an ascending sample.
double order_statistic(const std::vector<double>& sorted, double alpha);

/// Aggregates top gaps and LWY statistics (one per noise run, in run order)
/// into a result. Deterministic in its inputs.
CalibrationResult summarize_gaps(const CalibrationKey& key, std::vector<double> gaps,
                                 std::vector<double> lwy_stats);

/// Simulates key.reps noise spectra on up to `threads` workers (0 = all
/// cores) and summarizes their top gaps lambda_1 - lambda_2 on the
/// normalized scale. The result depends only on the key.
CalibrationResult calibrate_ridge(const CalibrationKey& key, std::size_t threads = 0);

/// On-disk store of calibration results, one JSON file per key.
class CalibrationCache {
 public:
  explicit CalibrationCache(std::filesystem::path dir);
  /// $VACLE_CACHE_DIR, or ".vacle-cache" in the working directory.
  static std::filesystem::path default_dir();

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const CalibrationKey& key) const;

  /// Returns the stored result, or nothing when the file is absent. Throws
  /// IoError on a corrupt file or a key mismatch.
  std::optional<CalibrationResult> load(const CalibrationKey& key) const;
  /// Writes through a temporary file and renames it into place.
  void store(const CalibrationResult& result) const;

  /// Loads or computes (and stores). `hit` reports whether the file was used.
  CalibrationResult get(const CalibrationKey& key, bool force = false, std::size_t threads = 0,
                        bool* hit = nullptr) const;

 private:
  std::filesystem::path dir_;
};

/// One-step sigma2 estimate from the M-P alpha-quantile, with
/// alpha = 1 - 1/(2 max(1, c)). Requires at least 4 eigenvalues.
double estimate_sigma2(const Spectrum& spectrum, double c);

/// The alpha used by estimate_sigma2 and the 1-based eigenvalue index it reads.
double sigma2_alpha(double c);
std::size_t sigma2_index(std::size_t p, double c);

struct PyConstant {
  double value = 0.0;
  bool interpolated = false;
};

/// Tabulated PY constant: 5.5226, 6.3424, 7.6257 at c = 0.25, 1, 2. Other c
/// interpolate linearly in log c, flat outside the table.
PyConstant py_constant(double c);

}  // namespace vacle
