#pragma once

// Order-determination criteria: ridge ratios and the valley-cliff
// estimators (plain and transformed), plus the PY, LWY and WY baselines.
//
// All estimators work on the normalized scale lambda_i / sigma2^k where k is
// Spectrum::scale_power(), so their output depends on the spectrum and
// sigma2 only through that ratio.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vacle/spectra.hpp"

namespace vacle {

/// Parameters of the C^1 piecewise-quadratic transform f_n.
///
/// f_n is the identity on [edge - kappa, edge + kappa), flattens to a
/// constant left of edge - kappa - 1/k1 and grows with slope 1 + k2 (x - R)
/// right of R = edge + kappa. k1 = 0 (k2 = 0) keeps the identity on the
/// left (right) side.
struct TransformParams {
  double edge = 0.0;
  double kappa = 0.0;
  double k1 = 5.0;
  double k2 = 5.0;
};

struct EstimatorConfig {
  double tau = 0.5;      ///< threshold in (0, 1)
  std::size_t L = 20;    ///< search bound, ratios i = 1..L-2
  double ridge = 0.0;    ///< c_n > 0
  TransformParams transform;

  /// Throws ConfigError unless 0 < tau < 1, 3 <= L <= p, ridge > 0,
  /// kappa > 0 (when `with_transform`) and k1, k2 >= 0.
  void validate(std::size_t p, bool with_transform = false) const;
};

/// Differences, ratios and the selected index of one valley-cliff run.
struct RatioTrace {
  std::vector<double> deltas;  ///< delta_1 .. delta_{L-1}
  std::vector<double> ratios;  ///< r_1 .. r_{L-2}
  double tau = 0.0;
  double ridge = 0.0;
  std::size_t q_hat = 0;
};

void to_json(nlohmann::json& j, const RatioTrace& t);
void from_json(const nlohmann::json& j, RatioTrace& t);

/// Rows "i,ratio,tau" for plotting the ratio sequence against the threshold.
std::string plot_csv(const RatioTrace& trace);

struct Estimate {
  std::size_t q = 0;
  /// Set when a stopping-rule baseline scanned up to L without firing.
  bool exhausted = false;
  std::optional<RatioTrace> trace;
};

/// Ridge ratios (delta_{i+1} + c) / (delta_i + c) on the normalized scale.
/// `q_hat` of the returned trace is left at 0. Throws ConfigError when
/// L > p or the configuration is invalid.
RatioTrace ridge_ratios(const Spectrum& spectrum, double sigma2, const EstimatorConfig& cfg);

/// Largest i in 1..L-2 with ratio <= tau; 0 when none qualifies.
std::size_t valley_cliff_index(const std::vector<double>& ratios, double tau);

Estimate vacle(const Spectrum& spectrum, double sigma2, const EstimatorConfig& cfg);

double fn_transform(double x, const TransformParams& params);
double fn_transform_derivative(double x, const TransformParams& params);

/// Valley-cliff on f_n-transformed normalized eigenvalues.
Estimate tvacle(const Spectrum& spectrum, double sigma2, const EstimatorConfig& cfg);

/// kappa_n = log(log p) p^{-2/3}; also the WY margin d_n.
double loglog_rate(std::size_t p);

/// Where the PY scan starts.
enum class PyStart {
  /// i = 0, so an all-noise spectrum yields 0.
  Zero,
  /// i = 1 as in the literal display; the result can never be 0.
  One,
};

/// d_n = C n^{-2/3} sqrt(2 log log n).
double py_threshold(double C, std::size_t n);

/// First i with delta_{i+1} < d_n and delta_{i+2} < d_n, scanning i up to L.
/// Throws ConfigError when n < 3.
Estimate py_estimator(const Spectrum& spectrum, double sigma2, double C, std::size_t L,
                      PyStart start = PyStart::Zero);

/// min{i >= 1 : lambda_{i+1}/lambda_i > 1 - d_T and lambda_{i+2}/lambda_{i+1} > 1 - d_T} - 1.
/// 0/0 ratios count as 1.
Estimate lwy_estimator(const Spectrum& spectrum, double d_T, std::size_t L);

/// max{i : lambda_i / sigma2^k >= edge + d_n}, capped at L; 0 when empty.
/// `edge` is on the normalized scale.
Estimate wy_estimator(const Spectrum& spectrum, double sigma2, double edge, double d_n,
                      std::size_t L);

/// Normalized bulk edge e for a family at the spectrum's dimensions:
/// (1 + sqrt(p/n))^2, ((1 + sqrt(c + y - c y)) / (1 - y))^2 or b1(p/T).
double normalized_edge(ModelKind kind, const SpectrumShape& shape);

enum class Method { Vacle, Tvacle, Py, Lwy, Wy };

std::string to_string(Method m);
Method parse_method(const std::string& text);

}  // namespace vacle
