#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vacle/rng.hpp"

namespace vacle {

enum class ModelKind { SpikedPopulation, SpikedFisher, AutocovFactor };

std::string to_string(ModelKind kind);
/// Accepts "population", "fisher", "autocov" (and the enum spellings).
ModelKind parse_model_kind(const std::string& text);

/// Exponent k such that eigenvalues are normalized by sigma2^k.
/// 1 for covariance and Fisher spectra, 2 for auto-covariance spectra.
int scale_power_for(ModelKind kind);

enum class Provenance { Simulated, Ingested };

/// Dimensions attached to a spectrum. `n` is the signal sample size
/// (0 when not applicable), `T` the noise or time-series length.
struct SpectrumShape {
  std::size_t p = 0;
  std::size_t n = 0;
  std::optional<std::size_t> T;
};

/// Sample eigenvalues in descending order plus their provenance.
class Spectrum {
 public:
  /// Sorts `values` descending. Throws ConfigError on non-finite entries,
  /// an empty vector, or scale_power outside {1, 2}.
  Spectrum(std::vector<double> values, SpectrumShape shape, int scale_power,
           Provenance provenance = Provenance::Simulated);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  /// i-th largest eigenvalue, 0-based.
  double operator[](std::size_t i) const { return values_[i]; }

  const SpectrumShape& shape() const { return shape_; }
  std::size_t p() const { return shape_.p; }
  std::size_t n() const { return shape_.n; }
  std::optional<std::size_t> T() const { return shape_.T; }
  int scale_power() const { return scale_power_; }
  Provenance provenance() const { return provenance_; }

  /// sigma2^scale_power; divides eigenvalues onto the normalized scale.
  double normalizer(double sigma2) const;
  /// Copy with every eigenvalue multiplied by s (> 0).
  Spectrum scaled(double s) const;
  /// FNV-1a hash over the eigenvalue bytes.
  std::uint64_t hash() const;

 private:
  std::vector<double> values_;
  SpectrumShape shape_;
  int scale_power_;
  Provenance provenance_;
};

// ---------------------------------------------------------------------------
// Generative models

/// Gaussian data with covariance diag(spikes, sigma2, ..., sigma2).
struct PopulationModel {
  std::vector<double> spikes;  ///< descending, each > sigma2
  double sigma2 = 1.0;
  std::size_t p = 0;
  std::size_t n = 0;
};

/// Noise covariance Sigma_2 of the Fisher model.
enum class FisherNoise {
  Identity,
  /// diag(1, ..., 1, 2, ..., 2) with p/2 ones (ceil) followed by twos.
  SplitOneTwo,
};

/// Signal x = A u + eps with cov(u) = I_q and eps ~ N(0, sigma2 Sigma_2);
/// noise sample e ~ N(0, Sigma_2).
///
/// Loadings follow a fixed pattern: alpha[0] loads coordinate 0 alone, then
/// consecutive pairs (alpha[k], alpha[k+1]) load two coordinates with
/// columns sqrt(alpha/2) (1, 1) and sqrt(alpha/2) (1, -1); a trailing
/// unpaired entry loads one coordinate alone. With alpha = (a1, a2, a3)
/// this is the 3 x p loading matrix of the classic signal-detection design.
struct FisherModel {
  std::vector<double> alpha;
  FisherNoise noise = FisherNoise::Identity;
  double sigma2 = 1.0;
  std::size_t p = 0;
  std::size_t n = 0;
  std::size_t T = 0;

  Eigen::MatrixXd loadings() const;             ///< p x q
  std::vector<double> noise_diagonal() const;   ///< diagonal of Sigma_2
  /// Descending spikes of Sigma_1 Sigma_2^{-1}: sigma2 + eig(A^T Sigma_2^{-1} A).
  std::vector<double> spikes() const;
};

/// y_t = A x_t + eps_t with A = (I_q, 0)^T, x_t = Theta x_{t-1} + e_t,
/// e_t ~ N(0, diag(gamma)), eps_t ~ N(0, sigma2 I_p).
struct AutocovModel {
  std::vector<double> theta;  ///< diagonal of Theta, |theta| < 1
  std::vector<double> gamma;  ///< innovation variances, > 0
  double sigma2 = 1.0;
  std::size_t p = 0;
  std::size_t T = 0;
  std::size_t burn_in = 1000;
};

using ModelSpec = std::variant<PopulationModel, FisherModel, AutocovModel>;

ModelKind kind_of(const ModelSpec& spec);
SpectrumShape shape_of(const ModelSpec& spec);
/// Checks dimensions and parameter ranges; throws ConfigError.
void validate(const ModelSpec& spec, std::size_t search_bound = 0);
/// Largest identifiable order according to the rmt phase-transition oracles.
std::size_t identifiable_order(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Simulation

/// Eigenvalues of the uncentered S = X X^T / n.
Spectrum simulate_population(const PopulationModel& spec, Rng& rng);
/// Generalized eigenvalues of S1 v = lambda S2 v (Cholesky reduction).
Spectrum simulate_fisher(const FisherModel& spec, Rng& rng);
/// Eigenvalues of M = Sigma_y Sigma_y^T from T + 1 observations.
Spectrum simulate_autocov(const AutocovModel& spec, Rng& rng);
Spectrum simulate(const ModelSpec& spec, Rng& rng);

/// Lag-1 sample auto-covariance (1/T) sum_{t=2}^{T+1} y_t y_{t-1}^T of the
/// factor model; exposed for the singular-value identity check.
Eigen::MatrixXd sample_autocovariance(const AutocovModel& spec, Rng& rng);

/// Descending eigenvalues of a symmetric matrix (tridiagonal QR).
std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m);
/// Descending eigenvalues of S1 v = lambda S2 v. Throws NumericalError when
/// S2 is not positive definite or its condition estimate exceeds 1e12.
std::vector<double> generalized_eigenvalues(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2);

// ---------------------------------------------------------------------------
// Ingestion

struct IngestOptions {
  /// CSV column to read; when empty the file holds one value per line.
  std::string column;
  std::size_t n = 0;
  std::optional<std::size_t> T;
  int scale_power = 1;
  /// When set, the number of values read must match.
  std::optional<std::size_t> expected_p;
};

/// Reads eigenvalues in any order. Lines starting with '#' and blank lines
/// are skipped. Values in [-1e-12, 0) are clamped to 0; more negative values,
/// unparsable lines and files with fewer than 3 values throw IoError.
Spectrum ingest_spectrum(const std::filesystem::path& path, const IngestOptions& options);
Spectrum parse_spectrum(const std::string& text, const IngestOptions& options,
                        const std::string& source_name = "<memory>");

}  // namespace vacle
