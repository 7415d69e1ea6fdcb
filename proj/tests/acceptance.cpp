// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "vacle/calibration.hpp"
#include "vacle/harness.hpp"
#include "vacle/rmt.hpp"

using namespace vacle;

namespace {

constexpr std::size_t kReps = 200;
constexpr std::uint64_t kSeed = 7;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

ExperimentConfig experiment(const std::string& text) {
  auto cfg = parse_config(text, "acceptance");
  cfg.reps = kReps;
  cfg.seed = kSeed;
  cfg.threads = 0;
  return cfg;
}

const SimulationReport& find(const std::vector<SimulationReport>& reps, Method m,
                             std::size_t p, std::size_t n = 0) {
  for (const auto& r : reps) {
    if (r.method == m && r.size.p == p && (n == 0 || r.size.n == n)) return r;
  }
  throw std::runtime_error("missing report");
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void criterion1(Outcome& o) {
  const auto reps = run_experiment(experiment(R"(
[model]
family = population
spikes = 259.72, 17.97, 11.04, 7.88, 4.82
grid = 50x200
[estimator]
methods = vacle, tvacle
)"));
  for (Method m : {Method::Vacle, Method::Tvacle}) {
    const auto& r = find(reps, m, 50);
    o.detail << " " << to_string(m) << " misest " << fmt(r.misest_rate, 3) << " mean " << fmt(r.mean, 3);
    o.require(r.misest_rate <= 0.05, to_string(m) + " misest <= 0.05");
    o.require(r.mean >= 4.9 && r.mean <= 5.1, to_string(m) + " mean in [4.9, 5.1]");
  }
}

void criterion2(Outcome& o) {
  const auto reps = run_experiment(experiment(R"(
[model]
family = population
spikes = 5, 4, 3, 3
grid = 400x200
[estimator]
methods = tvacle, py
)"));
  const auto& t = find(reps, Method::Tvacle, 400);
  const auto& p = find(reps, Method::Py, 400);
  o.detail << " tvacle mean " << fmt(t.mean, 3) << " py mean " << fmt(p.mean, 3);
  o.require(t.spectrum_hashes == p.spectrum_hashes, "paired spectra");
  o.require(t.mean > p.mean, "tvacle mean > py mean");
  o.require(t.mean >= 2.2 && t.mean <= 3.1, "tvacle mean in [2.2, 3.1]");
}

void criterion3(Outcome& o) {
  const auto reps = run_experiment(experiment(R"(
[model]
family = population
spikes = 5, 5, 5, 5, 5, 5
grid = 200x200, 100x100
[estimator]
methods = tvacle, py
)"));
  const auto& t = find(reps, Method::Tvacle, 200);
  const auto& p = find(reps, Method::Py, 100);
  o.detail << " tvacle (200,200) exact " << fmt(t.exact_rate(), 3) << " py (100,100) exact "
           << fmt(p.exact_rate(), 3);
  o.require(t.exact_rate() >= 0.97, "tvacle exact >= 0.97");
  o.require(p.exact_rate() >= 0.45 && p.exact_rate() <= 0.70, "py exact in [0.45, 0.70]");
}

void criterion4(Outcome& o) {
  const auto reps = run_experiment(experiment(R"(
[model]
family = population
spikes = 7, 6, 5, 4
grid = 200x800
[estimator]
methods = vacle
[harness]
sigma2_mode = estimated
)"));
  const auto& r = find(reps, Method::Vacle, 200);
  const double mean = r.sigma2_mean.value_or(NAN);
  const double mse = r.sigma2_mse.value_or(NAN);
  o.detail << " sigma2 mean " << fmt(mean) << " mse " << fmt(mse, 5);
  o.require(mean >= 1.005 && mean <= 1.025, "mean in [1.005, 1.025]");
  o.require(mse <= 0.001, "mse <= 0.001");

  const PopulationModel m{{7, 6, 5, 4}, 1.0, 200, 800};
  bool bitwise = true;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    auto rng = Rng::for_stream(kSeed, StreamTag::Adhoc, 4, k);
    const auto s = simulate_population(m, rng);
    const double base = estimate_sigma2(s, 0.25);
    for (double f : {0.125, 2.0, 1024.0}) bitwise = bitwise && estimate_sigma2(s.scaled(f), 0.25) == f * base;
    for (double f : {0.3, 3.0, 17.5}) {
      worst = std::max(worst, std::abs(estimate_sigma2(s.scaled(f), 0.25) / (f * base) - 1.0));
    }
  }
  o.detail << "; equivariance bitwise for s = 2^k: " << (bitwise ? "yes" : "no")
           << ", max rel error otherwise " << worst;
  o.require(bitwise, "bitwise equivariance for power-of-two scales");
  o.require(worst <= 4.5e-16, "equivariance within rounding for other scales");
}

void criterion5(Outcome& o) {
  const double theta[3] = {0.6, -0.5, 0.3};
  const double want_half[3] = {7.726, 5.496, 3.613};
  const double want_two[3] = {23.744, 20.464, 17.970};
  const auto half = rmt::AutocovLaw::make(0.5);
  const auto two = rmt::AutocovLaw::make(2.0);
  double worst = 0.0;
  bool identifiable = true;
  o.detail << " limits";
  for (int i = 0; i < 3; ++i) {
    const auto sig = rmt::FactorSignature::ar1(theta[i], 2.0);
    const auto a = rmt::autocov_factor_limit(sig, half);
    const auto b = rmt::autocov_factor_limit(sig, two);
    identifiable = identifiable && a.identifiable && b.identifiable;
    worst = std::max({worst, std::abs(a.value - want_half[i]), std::abs(b.value - want_two[i])});
    o.detail << " " << fmt(a.value, 3) << "/" << fmt(b.value, 3);
  }
  const double e1 = half.upper_edge();
  const double e2 = two.upper_edge();
  o.detail << "; edges " << fmt(e1) << " " << fmt(e2);
  o.require(identifiable, "all factors identifiable");
  o.require(worst < 1e-2, "limits within 1e-2");
  o.require(std::abs(e1 - 2.773) < 1e-3 && std::abs(e2 - 17.637) < 1e-3, "edges within 1e-3");
}

void criterion6(Outcome& o) {
  const auto three = run_experiment(experiment(R"(
[model]
family = autocov
theta = 0.6, -0.5, 0.3
gamma = 2
grid = 300x600
[estimator]
methods = tvacle, lwy
)"));
  const auto six = run_experiment(experiment(R"(
[model]
family = autocov
theta = 0.5, 0.5, 0.5, 0.5, 0.5, 0.5
gamma = 2
grid = 300x600
[estimator]
methods = tvacle, lwy
)"));
  const double t3 = find(three, Method::Tvacle, 300).exact_rate();
  const double l3 = find(three, Method::Lwy, 300).exact_rate();
  const double t6 = find(six, Method::Tvacle, 300).exact_rate();
  const double l6 = find(six, Method::Lwy, 300).exact_rate();
  o.detail << " three factors: tvacle " << fmt(t3, 3) << " lwy " << fmt(l3, 3)
           << "; six factors: tvacle " << fmt(t6, 3) << " lwy " << fmt(l6, 3);
  o.require(t3 >= 0.90, "three-factor tvacle >= 0.90");
  o.require(l3 >= 0.90, "three-factor lwy >= 0.90");
  o.require(t6 >= 0.95, "six-factor tvacle >= 0.95");
  o.require(l6 <= 0.75, "six-factor lwy <= 0.75");
}

void criterion7(Outcome& o) {
  const auto reps = run_experiment(experiment(R"(
[model]
family = fisher
alpha = 10, 5, 5
noise = split
grid = 250x1250x500
[estimator]
methods = tvacle, wy
tau = 0.8
)"));
  const double t = find(reps, Method::Tvacle, 250).exact_rate();
  const double w = find(reps, Method::Wy, 250).exact_rate();
  o.detail << " tvacle " << fmt(t, 3) << " wy " << fmt(w, 3);
  o.require(t >= 0.88, "tvacle >= 0.88");
  o.require(w >= 0.88, "wy >= 0.88");
}

std::vector<Spectrum> property_spectra() {
  std::vector<Spectrum> out;
  const std::vector<ModelSpec> specs{
      PopulationModel{{7, 6, 5, 4}, 1.0, 100, 100},
      FisherModel{{10, 5, 5}, FisherNoise::SplitOneTwo, 1.0, 50, 250, 100},
      AutocovModel{{0.6, -0.5, 0.3}, {2, 2, 2}, 1.0, 60, 120, 1000},
  };
  for (std::size_t f = 0; f < specs.size(); ++f) {
    for (std::uint64_t k = 0; k < 40; ++k) {
      auto rng = Rng::for_stream(kSeed, StreamTag::Adhoc, 80 + f, k);
      out.push_back(simulate(specs[f], rng));
    }
  }
  return out;
}

void criterion8(Outcome& o) {
  // Scale invariance and the k1 = k2 = 0 degeneracy on simulated spectra.
  std::size_t mismatches = 0;
  std::size_t trace_mismatches = 0;
  std::size_t checked = 0;
  for (const auto& s : property_spectra()) {
    const ModelKind kind = s.scale_power() == 2 ? ModelKind::AutocovFactor
                           : s.T() && s.n() > 0 ? ModelKind::SpikedFisher
                                                : ModelKind::SpikedPopulation;
    MethodParams mp;
    mp.kind = kind;
    mp.tau = kind == ModelKind::SpikedFisher ? 0.8 : 0.5;
    mp.L = 20;
    mp.vacle_ridge = 0.2;
    mp.tvacle_ridge = 0.1;
    mp.transform = {normalized_edge(kind, s.shape()), loglog_rate(s.p()), 5.0, 5.0};
    mp.py_C = 6.0;
    mp.lwy_dT = 0.1;
    mp.wy_edge = mp.transform.edge;
    mp.wy_dn = loglog_rate(s.p());
    std::vector<Method> methods{Method::Vacle, Method::Tvacle, Method::Lwy, Method::Wy};
    if (kind != ModelKind::AutocovFactor) methods.push_back(Method::Py);
    for (Method m : methods) {
      const auto ref = run_method(m, s, 1.0, mp).q;
      for (double f : {0.37, 3.7, 1024.0}) {
        ++checked;
        if (run_method(m, s.scaled(std::pow(f, s.scale_power())), f, mp).q != ref) ++mismatches;
      }
    }
    EstimatorConfig cfg;
    cfg.tau = 0.5;
    cfg.L = 20;
    cfg.ridge = 0.1;
    cfg.transform = {mp.transform.edge, mp.transform.kappa, 0.0, 0.0};
    const auto a = vacle::vacle(s, 1.0, cfg);
    const auto b = tvacle(s, 1.0, cfg);
    if (!(a.q == b.q && same_bits(a.trace->ratios, b.trace->ratios) &&
          same_bits(a.trace->deltas, b.trace->deltas))) {
      ++trace_mismatches;
    }
  }
  o.detail << " scale " << checked - mismatches << "/" << checked;
  o.require(mismatches == 0, "scale invariance of every estimator");
  o.detail << "; degeneracy traces " << (trace_mismatches == 0 ? "bitwise" : "differ");
  o.require(trace_mismatches == 0, "tvacle = vacle at k1 = k2 = 0");

  // C^1 continuity of f_n at its three knots.
  double knot_gap = 0.0;
  for (const TransformParams tp : {TransformParams{2.25, 0.1, 5, 5}, TransformParams{17.6, 0.03, 2, 8}}) {
    const double ln = tp.edge - tp.kappa;
    for (double k : {ln - 1.0 / tp.k1, ln, tp.edge + tp.kappa}) {
      const double lo = std::nextafter(k, -INFINITY);
      const double hi = std::nextafter(k, INFINITY);
      knot_gap = std::max({knot_gap, std::abs(fn_transform(lo, tp) - fn_transform(hi, tp)),
                           std::abs(fn_transform_derivative(lo, tp) - fn_transform_derivative(hi, tp))});
    }
  }
  o.detail << "; knot gap " << knot_gap;
  o.require(knot_gap <= 1e-12, "f_n C1 at knots");

  // Spike map continuity at the phase transition.
  double phi_gap = 0.0;
  for (double c : {0.25, 1.0, 2.0}) {
    const double thr = rmt::pop_threshold(c, 1.0);
    for (double eps : {1e-4, 1e-6}) {
      phi_gap = std::max(phi_gap, std::abs(rmt::pop_spike_map(thr * (1 + eps), c, 1.0) -
                                           rmt::MpLaw::make(c).upper_edge()));
    }
  }
  o.detail << "; phi gap " << phi_gap;
  o.require(phi_gap <= 1e-3, "phi continuity");

  // Marcenko-Pastur mass and quantile round trip.
  double mass_err = 0.0;
  double quant_err = 0.0;
  for (double c : {0.1, 0.25, 1.0, 2.0, 5.0}) {
    const auto law = rmt::MpLaw::make(c);
    const double mass = test_support::integrate_edges(
        [&](double x) { return rmt::mp_density(x, law); }, law.lower_edge(), law.upper_edge());
    mass_err = std::max(mass_err, std::abs(mass - std::min(1.0, 1.0 / c)));
    const double lo = c > 1 ? 1.0 - 1.0 / c : 0.0;
    for (int k = 1; k < 10; ++k) {
      const double alpha = lo + (1.0 - lo) * k / 10.0;
      quant_err = std::max(quant_err, std::abs(rmt::mp_cdf(rmt::mp_quantile(alpha, c), law) - alpha));
    }
  }
  o.detail << "; mass err " << mass_err << "; quantile err " << quant_err;
  o.require(mass_err <= 1e-6, "M-P mass");
  o.require(quant_err <= 1e-8, "quantile round trip");

  // False detections on pure noise.
  const auto noise = run_experiment(experiment(R"(
[model]
family = population
grid = 200x200
[estimator]
methods = vacle, tvacle
)"));
  for (Method m : {Method::Vacle, Method::Tvacle}) {
    const auto& r = find(noise, m, 200);
    const double rate = 1.0 - static_cast<double>(r.counts[0]) / static_cast<double>(r.reps);
    o.detail << "; " << to_string(m) << " false detection " << fmt(rate, 3);
    o.require(rate <= 0.05, to_string(m) + " false detection <= 5%");
  }

  // Thread-count independence.
  auto cfg = experiment(R"(
[model]
family = population
spikes = 7, 6, 5, 4
grid = 100x100, 50x200
[estimator]
methods = vacle, tvacle, py, lwy, wy
[calibration]
reps = 100
)");
  cfg.reps = 50;
  cfg.threads = 1;
  const auto one = reports_to_json(run_experiment(cfg));
  cfg.threads = 4;
  const auto four = reports_to_json(run_experiment(cfg));
  o.detail << "; threads 1 vs 4 " << (one == four ? "identical" : "differ");
  o.require(one == four, "thread-count independence");
}

void check_shape(Outcome& o, const std::string& name, std::vector<double> images, double edge,
                 std::size_t p, SpectrumShape shape, int power) {
  const std::size_t q = images.size();
  const double d = images.back();
  std::vector<double> v = std::move(images);
  v.resize(p, edge);
  shape.p = p;
  const Spectrum s(v, shape, power);
  bool ok = true;
  for (double cn : {0.01, 0.1, 0.5}) {
    EstimatorConfig cfg;
    cfg.L = 20;
    cfg.ridge = cn;
    const auto t = ridge_ratios(s, 1.0, cfg);
    ok = ok && t.ratios[q - 1] == cn / (d - edge + cn);
    for (std::size_t i = q; i < t.ratios.size(); ++i) ok = ok && t.ratios[i] == 1.0;
    ok = ok && vacle::vacle(s, 1.0, cfg).q == q;
  }
  o.detail << " " << name << (ok ? " exact" : " mismatch");
  o.require(ok, name + " valley-cliff shape");
}

void criterion9(Outcome& o) {
  {
    const double c = 0.25;
    std::vector<double> img;
    for (double l : {259.72, 17.97, 11.04, 7.88, 4.82}) img.push_back(rmt::pop_spike_map(l, c, 1.0));
    check_shape(o, "population c=0.25", img, rmt::MpLaw::make(c).upper_edge(), 50, {0, 200, {}}, 1);
  }
  {
    std::vector<double> img;
    for (double l : {5.0, 4.0, 3.0, 3.0}) img.push_back(rmt::pop_spike_map(l, 1.0, 1.0));
    check_shape(o, "population c=1", img, rmt::MpLaw::make(1.0).upper_edge(), 100, {0, 100, {}}, 1);
  }
  {
    const auto law = rmt::FisherLaw::make(0.2, 0.5);
    std::vector<double> img;
    for (double l : {11.0, 6.0, 6.0}) img.push_back(rmt::fisher_spike_map(l, law));
    check_shape(o, "fisher", img, law.upper_edge(), 50, {0, 250, 100}, 1);
  }
  {
    const auto law = rmt::AutocovLaw::make(0.5);
    std::vector<double> img;
    for (double th : {0.6, -0.5, 0.3}) {
      img.push_back(rmt::autocov_factor_limit(rmt::FactorSignature::ar1(th, 2.0), law).value);
    }
    check_shape(o, "autocov", img, law.upper_edge(), 60, {0, 0, 120}, 2);
  }
}

}  // namespace

int main() {
  const std::vector<std::function<void(Outcome&)>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i](o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu: %s%s (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.str().c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
