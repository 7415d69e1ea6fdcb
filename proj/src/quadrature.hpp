#pragma once

// Internal helpers shared by the rmt translation unit and tests.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vacle::detail {

inline constexpr double kQuadRelTol = 1e-12;
inline constexpr unsigned kQuadMaxDepth = 18;

/// Integrates f over (a, b) after the change of variables
/// x = a + (b - a) sin^2(theta), theta in (0, theta_end). The Jacobian
/// (b - a) sin(2 theta) cancels square-root behaviour at both edges.
/// theta_end = pi/2 integrates the whole interval.
template <class F>
double integrate_edges(F&& f, double a, double b, double theta_end = std::numbers::pi / 2) {
  const double width = b - a;
  auto g = [&](double theta) {
    const double s = std::sin(theta);
    const double x = a + width * s * s;
    return f(x) * width * std::sin(2.0 * theta);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, theta_end,
                                                                       kQuadMaxDepth, kQuadRelTol);
}

/// theta such that a + (b - a) sin^2(theta) = x, for a <= x <= b.
inline double edge_angle(double x, double a, double b) {
  const double u = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return std::asin(std::sqrt(u));
}

}  // namespace vacle::detail
