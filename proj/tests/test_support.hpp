#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace test_support {

// Integral of f over (a, b) after x = a + (b - a)(1 - cos t)/2, which removes
// square-root endpoint singularities.
inline double integrate_edges(const std::function<double(double)>& f, double a, double b,
                              int panels = 20000) {
  const double pi = std::acos(-1.0);
  const double h = pi / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double t = (k + 0.5) * h;
    const double x = a + (b - a) * (1.0 - std::cos(t)) / 2.0;
    sum += f(x) * (b - a) * std::sin(t) / 2.0;
  }
  return sum * h;
}

// Distribution function atom + integral of density over (a, x], tabulated
// once on the same substitution grid and interpolated linearly.
class TabulatedCdf {
 public:
  TabulatedCdf(const std::function<double(double)>& density, double a, double b, double atom,
               int panels = 20000)
      : a_(a), b_(b), atom_(atom) {
    const double pi = std::acos(-1.0);
    const double h = pi / panels;
    xs_.push_back(a);
    fs_.push_back(atom);
    double acc = atom;
    for (int k = 0; k < panels; ++k) {
      const double t = (k + 0.5) * h;
      const double x = a + (b - a) * (1.0 - std::cos(t)) / 2.0;
      acc += density(x) * (b - a) * std::sin(t) / 2.0 * h;
      xs_.push_back(a + (b - a) * (1.0 - std::cos((k + 1) * h)) / 2.0);
      fs_.push_back(acc);
    }
  }

  double operator()(double x) const {
    if (x < 0.0) return 0.0;
    if (x <= a_) return atom_;
    if (x >= b_) return fs_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const auto i = static_cast<std::size_t>(it - xs_.begin());
    const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
    return fs_[i - 1] + w * (fs_[i] - fs_[i - 1]);
  }

 private:
  double a_, b_, atom_;
  std::vector<double> xs_, fs_;
};

}  // namespace test_support
