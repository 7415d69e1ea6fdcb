#include "vacle/rmt.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "quadrature.hpp"
#include "vacle/error.hpp"

namespace vacle::rmt {

namespace {

constexpr double kPi = std::numbers::pi;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(name) + " must be a positive finite number, got " +
                      std::to_string(v));
  }
}

// Bisection on a monotone increasing function until the bracket collapses to
// adjacent doubles or the function value is within ftol of the target.
template <class F>
double bisect_increasing(F&& f, double target, double lo, double hi, double ftol) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = f(mid);
    if (std::abs(v - target) <= ftol) return mid;
    (v < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

// ---------------------------------------------------------------------------
// Marcenko-Pastur

MpLaw MpLaw::make(double c, double sigma2) {
  require_positive(c, "aspect ratio c");
  require_positive(sigma2, "sigma2");
  return MpLaw{c, sigma2};
}

double MpLaw::lower_edge() const {
  const double r = 1.0 - std::sqrt(c);
  return sigma2 * r * r;
}

double MpLaw::upper_edge() const {
  const double r = 1.0 + std::sqrt(c);
  return sigma2 * r * r;
}

double MpLaw::atom() const { return c > 1.0 ? 1.0 - 1.0 / c : 0.0; }

double MpLaw::continuous_mass() const { return std::min(1.0, 1.0 / c); }

double mp_density(double x, const MpLaw& law) {
  const double a = law.lower_edge();
  const double b = law.upper_edge();
  if (!(x > a && x < b)) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * kPi * x * law.c * law.sigma2);
}

double mp_cdf(double x, const MpLaw& law) {
  const double a = law.lower_edge();
  const double b = law.upper_edge();
  if (x < 0.0) return 0.0;
  if (x <= a) return law.atom();
  if (x >= b) return 1.0;
  // With x = a + (b - a) sin^2 t the integrand reduces to a smooth
  // trigonometric expression; the generic helper handles it.
  const double part = detail::integrate_edges([&](double t) { return mp_density(t, law); }, a, b,
                                              detail::edge_angle(x, a, b));
  return std::min(1.0, law.atom() + part);
}

double mp_quantile(double alpha, double c) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("quantile level alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  const MpLaw law = MpLaw::make(c, 1.0);
  if (alpha <= law.atom()) {
    throw ConfigError("quantile inside point mass: alpha = " + std::to_string(alpha) +
                      " <= 1 - 1/c = " + std::to_string(law.atom()));
  }
  const double lo = law.lower_edge();
  const double hi = law.upper_edge();
  return bisect_increasing([&](double x) { return mp_cdf(x, law); }, alpha, lo, hi, 1e-13);
}

double pop_threshold(double c, double sigma2) {
  require_positive(c, "aspect ratio c");
  require_positive(sigma2, "sigma2");
  return sigma2 * (1.0 + std::sqrt(c));
}

double pop_spike_map(double lambda, double c, double sigma2) {
  const double threshold = pop_threshold(c, sigma2);
  if (!(lambda > threshold)) {
    throw ConfigError("subcritical spike: lambda = " + std::to_string(lambda) +
                      " <= sigma2 (1 + sqrt c) = " + std::to_string(threshold));
  }
  const double x = lambda / sigma2;
  return sigma2 * (x + c * x / (x - 1.0));
}

std::size_t pop_identifiable_count(std::span<const double> spikes, double c, double sigma2) {
  const double threshold = pop_threshold(c, sigma2);
  return static_cast<std::size_t>(
      std::count_if(spikes.begin(), spikes.end(), [&](double s) { return s > threshold; }));
}

// ---------------------------------------------------------------------------
// Fisher

FisherLaw FisherLaw::make(double c, double y, double sigma2) {
  require_positive(c, "aspect ratio c");
  require_positive(sigma2, "sigma2");
  if (!(y > 0.0 && y < 1.0)) {
    throw ConfigError("Fisher ratio y = p/T must lie in (0, 1), got " + std::to_string(y));
  }
  return FisherLaw{c, y, sigma2};
}

double FisherLaw::gamma() const { return 1.0 / (1.0 - y); }

double FisherLaw::h() const { return c + y - c * y; }

double FisherLaw::spike_threshold() const { return sigma2 * gamma() * (1.0 + std::sqrt(h())); }

double FisherLaw::lower_edge() const {
  const double r = (1.0 - std::sqrt(h())) / (1.0 - y);
  return sigma2 * r * r;
}

double FisherLaw::upper_edge() const {
  const double r = (1.0 + std::sqrt(h())) / (1.0 - y);
  return sigma2 * r * r;
}

double FisherLaw::atom() const { return c > 1.0 ? 1.0 - 1.0 / c : 0.0; }

double fisher_density(double x, const FisherLaw& law) {
  const double a = law.lower_edge();
  const double b = law.upper_edge();
  if (!(x > a && x < b)) return 0.0;
  const double u = x / law.sigma2;
  const double au = a / law.sigma2;
  const double bu = b / law.sigma2;
  const double f = (1.0 - law.y) * std::sqrt((bu - u) * (u - au)) /
                   (2.0 * kPi * u * (law.c + u * law.y));
  return f / law.sigma2;
}

double fisher_cdf(double x, const FisherLaw& law) {
  const double a = law.lower_edge();
  const double b = law.upper_edge();
  if (x < 0.0) return 0.0;
  if (x <= a) return law.atom();
  if (x >= b) return 1.0;
  const double part = detail::integrate_edges([&](double t) { return fisher_density(t, law); }, a,
                                              b, detail::edge_angle(x, a, b));
  return std::min(1.0, law.atom() + part);
}

double fisher_spike_map(double lambda, const FisherLaw& law) {
  const double threshold = law.spike_threshold();
  if (!(lambda > threshold)) {
    throw ConfigError("subcritical Fisher spike: lambda = " + std::to_string(lambda) +
                      " <= U = " + std::to_string(threshold));
  }
  const double x = lambda / law.sigma2;
  const double g = law.gamma();
  return law.sigma2 * g * x * (x - 1.0 + law.c) / (x - g);
}

std::size_t fisher_identifiable_count(std::span<const double> spikes, const FisherLaw& law) {
  const double threshold = law.spike_threshold();
  return static_cast<std::size_t>(
      std::count_if(spikes.begin(), spikes.end(), [&](double s) { return s > threshold; }));
}

// ---------------------------------------------------------------------------
// Auto-covariance

AutocovLaw AutocovLaw::make(double y, double sigma2) {
  require_positive(y, "ratio y = p/T");
  require_positive(sigma2, "sigma2");
  return AutocovLaw{y, sigma2};
}

double AutocovLaw::lower_edge() const {
  if (y < 1.0) return 0.0;
  return (-1.0 + 20.0 * y + 8.0 * y * y - std::pow(1.0 + 8.0 * y, 1.5)) / 8.0;
}

double AutocovLaw::upper_edge() const {
  return (-1.0 + 20.0 * y + 8.0 * y * y + std::pow(1.0 + 8.0 * y, 1.5)) / 8.0;
}

double AutocovLaw::atom() const { return y > 1.0 ? 1.0 - 1.0 / y : 0.0; }

namespace {

constexpr double kStieltjesEta = 1e-9;
constexpr double kImagFloor = 1e-12;

// Largest imaginary part among the roots of the Stieltjes cubic at z.
double stieltjes_max_imag(std::complex<double> z, double y) {
  using C = std::complex<double>;
  const C a3 = z * z;
  const C a2 = -2.0 * z * (y - 1.0);
  const C a1 = C((y - 1.0) * (y - 1.0)) - z;
  const C a0 = -1.0;

  Eigen::Matrix3cd companion = Eigen::Matrix3cd::Zero();
  companion(0, 0) = -a2 / a3;
  companion(0, 1) = -a1 / a3;
  companion(0, 2) = -a0 / a3;
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> solver(companion, /*computeEigenvectors=*/false);

  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    C s = solver.eigenvalues()(k);
    // Two Newton steps tighten the companion-matrix root.
    for (int it = 0; it < 2; ++it) {
      const C f = ((a3 * s + a2) * s + a1) * s + a0;
      const C df = (3.0 * a3 * s + 2.0 * a2) * s + a1;
      if (std::abs(df) == 0.0) break;
      s -= f / df;
    }
    best = std::max(best, s.imag());
  }
  return best;
}

}  // namespace

double autocov_nu_density(double x, const AutocovLaw& law) {
  const double lo = law.lower_edge();
  const double hi = law.upper_edge();
  if (!(x > lo && x < hi)) return 0.0;
  const double im = stieltjes_max_imag({x, kStieltjesEta * std::min(1.0, x)}, law.y);
  if (im < kImagFloor) {
    const double span = hi - lo;
    const bool near_edge = (x - lo) < 1e-8 * span || (hi - x) < 1e-8 * span;
    if (near_edge) return 0.0;
    throw NumericalError("no Stieltjes root with positive imaginary part at x = " +
                         std::to_string(x) + " (y = " + std::to_string(law.y) + ")");
  }
  return im / kPi;
}

double autocov_lsd_density(double x, const AutocovLaw& law) {
  return autocov_nu_density(x, law) / law.y;
}

double autocov_cdf(double x, const AutocovLaw& law) {
  const double lo = law.lower_edge();
  const double hi = law.upper_edge();
  if (x < 0.0) return 0.0;
  if (x <= lo) return law.atom();
  if (x >= hi) return 1.0;
  const double part = detail::integrate_edges(
      [&](double t) { return autocov_lsd_density(t, law); }, lo, hi,
      detail::edge_angle(x, lo, hi));
  return std::min(1.0, law.atom() + part);
}

double autocov_t_transform(double z, const AutocovLaw& law) {
  const double lo = law.lower_edge();
  const double hi = law.upper_edge();
  if (!(z > hi)) {
    throw ConfigError("T-transform is defined for z > b1 = " + std::to_string(hi) +
                      ", got z = " + std::to_string(z));
  }
  return detail::integrate_edges(
      [&](double t) { return t / (z - t) * autocov_nu_density(t, law); }, lo, hi);
}

double autocov_t_at_edge(const AutocovLaw& law, double rel_offset) {
  return autocov_t_transform(law.upper_edge() * (1.0 + rel_offset), law);
}

FactorSignature FactorSignature::make(double gamma0, double gamma1) {
  require_positive(gamma0, "factor variance gamma0");
  if (!(std::abs(gamma1) < gamma0)) {
    throw ConfigError("lag-1 auto-covariance must satisfy |gamma1| < gamma0");
  }
  return FactorSignature{gamma0, gamma1};
}

FactorSignature FactorSignature::ar1(double theta, double innovation_var) {
  if (!(std::abs(theta) < 1.0)) {
    throw ConfigError("AR(1) coefficient must satisfy |theta| < 1, got " + std::to_string(theta));
  }
  require_positive(innovation_var, "innovation variance");
  const double gamma0 = innovation_var / (1.0 - theta * theta);
  return make(gamma0, theta * gamma0);
}

double autocov_t1(const FactorSignature& sig, const AutocovLaw& law) {
  const double g0 = sig.gamma0;
  const double g1 = sig.gamma1;
  const double y = law.y;
  const double s2 = law.sigma2;
  const double denom = 2.0 * g0 * g0 - 2.0 * g1 * g1;
  if (denom == 0.0) {
    throw NumericalError("degenerate factor signature: gamma0^2 == gamma1^2");
  }
  const double lead = 2.0 * y * s2 * g0 + g1 * g1;
  const double disc = lead * lead - 4.0 * y * y * s2 * s2 * (g0 * g0 - g1 * g1);
  if (disc < 0.0) {
    throw NumericalError("degenerate factor signature: negative discriminant " +
                         std::to_string(disc));
  }
  return (lead - std::sqrt(disc)) / denom;
}

FactorLimit autocov_factor_limit(const FactorSignature& sig, const AutocovLaw& law) {
  const double t1 = autocov_t1(sig, law);
  const double b1 = law.upper_edge();
  const double z_edge = b1 * (1.0 + 1e-6);
  const double t_edge = autocov_t_transform(z_edge, law);
  if (!(t1 < t_edge)) return FactorLimit{b1, false};

  // T decreases from T(b1+) to 0; grow the right end until it drops below t1.
  double hi = 2.0 * b1;
  for (int it = 0; autocov_t_transform(hi, law) > t1; ++it) {
    if (it > 60) throw NumericalError("factor limit: failed to bracket T(z) = T1");
    hi *= 2.0;
  }
  auto f = [&](double z) { return autocov_t_transform(z, law) - t1; };
  std::uintmax_t max_iter = 200;
  const auto [lo_z, hi_z] = boost::math::tools::toms748_solve(
      f, z_edge, hi, t_edge - t1, f(hi), boost::math::tools::eps_tolerance<double>(44), max_iter);
  if (max_iter >= 200) throw NumericalError("factor limit: root finder did not converge");
  return FactorLimit{0.5 * (lo_z + hi_z), true};
}

std::size_t autocov_identifiable_count(std::span<const FactorSignature> sigs,
                                       const AutocovLaw& law) {
  if (sigs.empty()) return 0;
  const double t_edge = autocov_t_at_edge(law);
  return static_cast<std::size_t>(std::count_if(sigs.begin(), sigs.end(), [&](const auto& s) {
    return autocov_t1(s, law) < t_edge;
  }));
}

}  // namespace vacle::rmt
