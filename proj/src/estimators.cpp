#include "vacle/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "vacle/error.hpp"
#include "vacle/rmt.hpp"

namespace vacle {

namespace {

// Normalized eigenvalues lambda_i / sigma2^k for i = 1..count.
std::vector<double> normalized_head(const Spectrum& spectrum, double sigma2, std::size_t count) {
  const double norm = spectrum.normalizer(sigma2);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = spectrum[i] / norm;
  return out;
}

std::vector<double> ratios_from_deltas(const std::vector<double>& deltas, double ridge) {
  std::vector<double> ratios(deltas.size() - 1);
  for (std::size_t i = 0; i + 1 < deltas.size(); ++i) {
    ratios[i] = (deltas[i + 1] + ridge) / (deltas[i] + ridge);
  }
  return ratios;
}

double loglog(double x) { return std::log(std::log(x)); }

}  // namespace

void EstimatorConfig::validate(std::size_t p, bool with_transform) const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("threshold tau must lie in (0, 1), got " + std::to_string(tau));
  }
  if (L < 3) throw ConfigError("search bound L must be at least 3, got " + std::to_string(L));
  if (L > p) {
    throw ConfigError("search bound L = " + std::to_string(L) + " exceeds p = " +
                      std::to_string(p) + " (L + 1 exceeds p)");
  }
  if (!(ridge > 0.0) || !std::isfinite(ridge)) {
    throw ConfigError("ridge c_n must be positive, got " + std::to_string(ridge));
  }
  if (with_transform) {
    if (!(transform.kappa > 0.0)) throw ConfigError("kappa_n must be positive");
    if (!(transform.k1 >= 0.0 && transform.k2 >= 0.0)) {
      throw ConfigError("transform slopes k1, k2 must be nonnegative");
    }
    if (!std::isfinite(transform.edge)) throw ConfigError("transform edge must be finite");
  }
}

void to_json(nlohmann::json& j, const RatioTrace& t) {
  j = nlohmann::json{{"deltas", t.deltas},
                     {"ratios", t.ratios},
                     {"tau", t.tau},
                     {"c_n", t.ridge},
                     {"q_hat", t.q_hat}};
}

void from_json(const nlohmann::json& j, RatioTrace& t) {
  j.at("deltas").get_to(t.deltas);
  j.at("ratios").get_to(t.ratios);
  j.at("tau").get_to(t.tau);
  j.at("c_n").get_to(t.ridge);
  j.at("q_hat").get_to(t.q_hat);
}

std::string plot_csv(const RatioTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "i,ratio,tau\n";
  for (std::size_t i = 0; i < trace.ratios.size(); ++i) {
    out << (i + 1) << ',' << trace.ratios[i] << ',' << trace.tau << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Valley-cliff

RatioTrace ridge_ratios(const Spectrum& spectrum, double sigma2, const EstimatorConfig& cfg) {
  cfg.validate(spectrum.size());
  const auto lambda = normalized_head(spectrum, sigma2, cfg.L);
  RatioTrace trace;
  trace.deltas.resize(cfg.L - 1);
  for (std::size_t i = 0; i + 1 < cfg.L; ++i) trace.deltas[i] = lambda[i] - lambda[i + 1];
  trace.ratios = ratios_from_deltas(trace.deltas, cfg.ridge);
  trace.tau = cfg.tau;
  trace.ridge = cfg.ridge;
  return trace;
}

std::size_t valley_cliff_index(const std::vector<double>& ratios, double tau) {
  for (std::size_t i = ratios.size(); i > 0; --i) {
    if (ratios[i - 1] <= tau) return i;
  }
  return 0;
}

Estimate vacle(const Spectrum& spectrum, double sigma2, const EstimatorConfig& cfg) {
  RatioTrace trace = ridge_ratios(spectrum, sigma2, cfg);
  trace.q_hat = valley_cliff_index(trace.ratios, trace.tau);
  return Estimate{trace.q_hat, false, std::move(trace)};
}

double fn_transform(double x, const TransformParams& params) {
  const double left = params.edge - params.kappa;
  const double right = params.edge + params.kappa;
  if (params.k1 > 0.0 && x < left) {
    const double knot = left - 1.0 / params.k1;
    if (x < knot) return left - 1.0 / (2.0 * params.k1);
    // 1/2 k1 x^2 + (1 - k1 L) x + 1/2 k1 L^2, written around the knot L.
    const double d = x - left;
    return x + 0.5 * params.k1 * d * d;
  }
  if (params.k2 > 0.0 && x >= right) {
    const double d = x - right;
    return x + 0.5 * params.k2 * d * d;
  }
  return x;
}

double fn_transform_derivative(double x, const TransformParams& params) {
  const double left = params.edge - params.kappa;
  const double right = params.edge + params.kappa;
  if (params.k1 > 0.0 && x < left) {
    if (x < left - 1.0 / params.k1) return 0.0;
    return 1.0 + params.k1 * (x - left);
  }
  if (params.k2 > 0.0 && x >= right) return 1.0 + params.k2 * (x - right);
  return 1.0;
}

Estimate tvacle(const Spectrum& spectrum, double sigma2, const EstimatorConfig& cfg) {
  cfg.validate(spectrum.size(), /*with_transform=*/true);
  auto lambda = normalized_head(spectrum, sigma2, cfg.L);
  for (double& v : lambda) v = fn_transform(v, cfg.transform);
  RatioTrace trace;
  trace.deltas.resize(cfg.L - 1);
  for (std::size_t i = 0; i + 1 < cfg.L; ++i) trace.deltas[i] = lambda[i] - lambda[i + 1];
  trace.ratios = ratios_from_deltas(trace.deltas, cfg.ridge);
  trace.tau = cfg.tau;
  trace.ridge = cfg.ridge;
  trace.q_hat = valley_cliff_index(trace.ratios, trace.tau);
  return Estimate{trace.q_hat, false, std::move(trace)};
}

// ---------------------------------------------------------------------------
// Baselines

double loglog_rate(std::size_t p) {
  if (p < 3) throw ConfigError("log log p needs p >= 3");
  const double pd = static_cast<double>(p);
  return loglog(pd) * std::pow(pd, -2.0 / 3.0);
}

double py_threshold(double C, std::size_t n) {
  if (n < 3) throw ConfigError("PY threshold needs n >= 3 (log log n must be positive)");
  const double nd = static_cast<double>(n);
  return C * std::pow(nd, -2.0 / 3.0) * std::sqrt(2.0 * loglog(nd));
}

Estimate py_estimator(const Spectrum& spectrum, double sigma2, double C, std::size_t L,
                      PyStart start) {
  const double d_n = py_threshold(C, spectrum.n());
  if (L < 1) throw ConfigError("PY search bound must be positive");
  const std::size_t p = spectrum.size();
  // delta_{i+2} needs lambda_{i+3}, so i <= p - 3.
  const std::size_t last = std::min(L, p >= 3 ? p - 3 : 0);
  const double norm = spectrum.normalizer(sigma2);
  auto delta = [&](std::size_t k) { return spectrum[k - 1] / norm - spectrum[k] / norm; };
  const std::size_t first = start == PyStart::Zero ? 0 : 1;
  for (std::size_t i = first; i <= last; ++i) {
    if (delta(i + 1) < d_n && delta(i + 2) < d_n) return Estimate{i, false, std::nullopt};
  }
  return Estimate{L, true, std::nullopt};
}

Estimate lwy_estimator(const Spectrum& spectrum, double d_T, std::size_t L) {
  if (!(d_T > 0.0 && d_T < 1.0)) {
    throw ConfigError("LWY tuning d_T must lie in (0, 1), got " + std::to_string(d_T));
  }
  if (L < 1) throw ConfigError("LWY search bound must be positive");
  const std::size_t p = spectrum.size();
  if (p < 3) throw ConfigError("LWY needs at least 3 eigenvalues");
  // ratio(k) = lambda_{k+1} / lambda_k, 1-based; 0/0 counts as 1.
  auto ratio = [&](std::size_t k) {
    const double num = spectrum[k];
    const double den = spectrum[k - 1];
    if (den == 0.0) return 1.0;
    return num / den;
  };
  const double cut = 1.0 - d_T;
  const std::size_t last = std::min(L + 1, p - 2);
  for (std::size_t i = 1; i <= last; ++i) {
    if (ratio(i) > cut && ratio(i + 1) > cut) return Estimate{i - 1, false, std::nullopt};
  }
  return Estimate{L, true, std::nullopt};
}

Estimate wy_estimator(const Spectrum& spectrum, double sigma2, double edge, double d_n,
                      std::size_t L) {
  if (!(d_n > 0.0)) throw ConfigError("WY margin d_n must be positive");
  const double norm = spectrum.normalizer(sigma2);
  const double cut = edge + d_n;
  std::size_t count = 0;
  const std::size_t limit = std::min(L, spectrum.size());
  while (count < limit && spectrum[count] / norm >= cut) ++count;
  return Estimate{count, false, std::nullopt};
}

double normalized_edge(ModelKind kind, const SpectrumShape& shape) {
  const double p = static_cast<double>(shape.p);
  switch (kind) {
    case ModelKind::SpikedPopulation: {
      if (shape.n == 0) throw ConfigError("population edge needs n");
      return rmt::MpLaw::make(p / static_cast<double>(shape.n)).upper_edge();
    }
    case ModelKind::SpikedFisher: {
      if (shape.n == 0 || !shape.T) throw ConfigError("Fisher edge needs n and T");
      return rmt::FisherLaw::make(p / static_cast<double>(shape.n),
                                  p / static_cast<double>(*shape.T))
          .upper_edge();
    }
    case ModelKind::AutocovFactor: {
      if (!shape.T) throw ConfigError("auto-covariance edge needs T");
      return rmt::AutocovLaw::make(p / static_cast<double>(*shape.T)).upper_edge();
    }
  }
  throw ConfigError("unknown model family");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Vacle:
      return "vacle";
    case Method::Tvacle:
      return "tvacle";
    case Method::Py:
      return "py";
    case Method::Lwy:
      return "lwy";
    case Method::Wy:
      return "wy";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "vacle") return Method::Vacle;
  if (t == "tvacle") return Method::Tvacle;
  if (t == "py") return Method::Py;
  if (t == "lwy") return Method::Lwy;
  if (t == "wy") return Method::Wy;
  throw ConfigError("unknown method '" + text + "' (expected vacle, tvacle, py, lwy or wy)");
}

}  // namespace vacle
