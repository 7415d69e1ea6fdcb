#pragma once

// Random-matrix limits used as oracles by the estimators, calibration and
// tests: limiting spectral densities, support edges, phase-transition
// thresholds and the forward maps of supercritical spikes.
//
// Every function here is pure. Nothing is cached.

#include <cstddef>
#include <span>
#include <vector>

namespace vacle::rmt {

// ---------------------------------------------------------------------------
// Marcenko-Pastur law (spiked population model)

/// Marcenko-Pastur law with aspect ratio c = p/n and scale sigma2.
struct MpLaw {
  double c = 1.0;
  double sigma2 = 1.0;

  /// Validates c > 0 and sigma2 > 0; throws ConfigError otherwise.
  static MpLaw make(double c, double sigma2 = 1.0);

  double lower_edge() const;  ///< sigma2 (1 - sqrt c)^2
  double upper_edge() const;  ///< sigma2 (1 + sqrt c)^2
  /// Mass of the atom at zero: 1 - 1/c when c > 1, else 0.
  double atom() const;
  /// Mass of the absolutely continuous part, min(1, 1/c).
  double continuous_mass() const;
};

/// Continuous part of the M-P density. Zero outside (a, b).
double mp_density(double x, const MpLaw& law);

/// Distribution function including the zero atom when c > 1.
double mp_cdf(double x, const MpLaw& law);

/// The alpha-quantile of the unit-scale law, inf{x : F_{c,1}(x) >= alpha}.
///
/// Inverts `mp_cdf` by bisection. Throws ConfigError when alpha is outside
/// (0, 1) or falls inside the atom (alpha <= 1 - 1/c for c > 1).
double mp_quantile(double alpha, double c);

/// Phase-transition threshold sigma2 (1 + sqrt c).
double pop_threshold(double c, double sigma2);

/// Almost-sure limit sigma2 * phi(lambda / sigma2) of the sample eigenvalue
/// attached to a supercritical spike, with phi(x) = x + c x / (x - 1).
/// Throws ConfigError when lambda <= pop_threshold(c, sigma2).
double pop_spike_map(double lambda, double c, double sigma2);

/// Number of spikes strictly above pop_threshold(c, sigma2).
std::size_t pop_identifiable_count(std::span<const double> spikes, double c, double sigma2);

// ---------------------------------------------------------------------------
// Fisher matrices F = S1 S2^{-1}

/// Limit law of a Fisher matrix with c = p/n (signal sample) and
/// y = p/T (noise sample), 0 < y < 1.
///
/// Two different "edges" are in play. `spike_threshold()` is the
/// population-scale bound U = sigma2 gamma (1 + sqrt(c + y - c y)) that a
/// spike must exceed to separate; `upper_edge()` is the right end of the
/// eigenvalue support, sigma2 ((1 + sqrt(c + y - c y)) / (1 - y))^2, which is
/// also the image of U under the spike map.
struct FisherLaw {
  double c = 0.5;
  double y = 0.5;
  double sigma2 = 1.0;

  static FisherLaw make(double c, double y, double sigma2 = 1.0);

  double gamma() const;  ///< 1 / (1 - y)
  double h() const;      ///< c + y - c y
  double spike_threshold() const;
  double lower_edge() const;
  double upper_edge() const;
  double atom() const;  ///< 1 - 1/c when c > 1
};

/// Continuous part of the Fisher LSD density (scale sigma2).
double fisher_density(double x, const FisherLaw& law);
double fisher_cdf(double x, const FisherLaw& law);

/// sigma2 * psi(lambda / sigma2) with psi(x) = gamma x (x - 1 + c) / (x - gamma).
/// Throws ConfigError when lambda <= law.spike_threshold().
double fisher_spike_map(double lambda, const FisherLaw& law);

std::size_t fisher_identifiable_count(std::span<const double> spikes, const FisherLaw& law);

// ---------------------------------------------------------------------------
// Lag-1 auto-covariance factor model, M = Sigma_y Sigma_y^T / sigma^4

/// Limit of the noise part of M / sigma^4 when p/T -> y.
///
/// The Stieltjes transform S of the measure nu solves
///   z^2 S^3 - 2 z (y - 1) S^2 + ((y - 1)^2 - z) S - 1 = 0.
/// nu equals y times the limiting eigenvalue law of M / sigma^4 (with the
/// zero atom removed when y > 1); it is the measure the T-transform below is
/// taken against. `autocov_lsd_density` reports the eigenvalue law itself.
struct AutocovLaw {
  double y = 0.5;
  double sigma2 = 1.0;

  static AutocovLaw make(double y, double sigma2 = 1.0);

  /// a1 = (-1 + 20y + 8y^2 - (1 + 8y)^{3/2}) / 8, clipped to 0 when y < 1.
  double lower_edge() const;
  /// b1 = (-1 + 20y + 8y^2 + (1 + 8y)^{3/2}) / 8.
  double upper_edge() const;
  /// Zero atom 1 - 1/y of the eigenvalue law when y > 1.
  double atom() const;
};

/// Root of the Stieltjes cubic with the largest imaginary part, evaluated at
/// x + i*eta with eta = 1e-9 min(1, x). Returns its imaginary part divided
/// by pi, i.e. the density of nu at x. Throws NumericalError when every root is numerically real
/// strictly inside the support.
double autocov_nu_density(double x, const AutocovLaw& law);

/// Continuous part of the limiting eigenvalue law of M / sigma^4; integrates
/// to 1 - atom(). Zero outside (lower_edge, upper_edge).
double autocov_lsd_density(double x, const AutocovLaw& law);
double autocov_cdf(double x, const AutocovLaw& law);

/// T(z) = integral of t / (z - t) dnu(t) for real z > b1.
/// Throws ConfigError when z <= b1.
double autocov_t_transform(double z, const AutocovLaw& law);

/// One-sided limit T(b1+), approximated at z = b1 (1 + rel_offset).
double autocov_t_at_edge(const AutocovLaw& law, double rel_offset = 1e-6);

/// Variance gamma0 and lag-1 auto-covariance gamma1 of one factor.
struct FactorSignature {
  double gamma0 = 1.0;
  double gamma1 = 0.0;

  /// Validates gamma0 > 0 and |gamma1| < gamma0.
  static FactorSignature make(double gamma0, double gamma1);
  /// Stationary AR(1) x_t = theta x_{t-1} + e_t with Var(e_t) = innovation_var.
  static FactorSignature ar1(double theta, double innovation_var);
};

/// T_1 for one factor:
///   (A - sqrt(A^2 - 4 y^2 sigma^4 (gamma0^2 - gamma1^2))) / (2 gamma0^2 - 2 gamma1^2)
/// with A = 2 y sigma2 gamma0 + gamma1^2.
/// Throws NumericalError on a zero denominator or negative discriminant.
double autocov_t1(const FactorSignature& sig, const AutocovLaw& law);

struct FactorLimit {
  double value = 0.0;         ///< limit of lambda_i / sigma^4
  bool identifiable = false;  ///< false: the eigenvalue sticks to b1
};

/// Solves T(beta) = T_1 on (b1, inf) by bisection when T_1 < T(b1+);
/// otherwise returns b1 flagged unidentifiable.
FactorLimit autocov_factor_limit(const FactorSignature& sig, const AutocovLaw& law);

std::size_t autocov_identifiable_count(std::span<const FactorSignature> sigs,
                                       const AutocovLaw& law);

}  // namespace vacle::rmt
