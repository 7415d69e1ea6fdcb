#include "vacle/vacle.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "vacle/calibration.hpp"
#include "vacle/config.hpp"
#include "vacle/error.hpp"
#include "vacle/estimators.hpp"
#include "vacle/harness.hpp"
#include "vacle/rmt.hpp"
#include "vacle/spectra.hpp"

struct vacle_spectrum {
  vacle::Spectrum value;
};

struct vacle_model {
  vacle::ModelSpec value;
};

struct vacle_result {
  vacle::Estimate estimate;
  double sigma2 = 1.0;
};

struct vacle_calibration {
  vacle::CalibrationResult value;
};

struct vacle_experiment {
  vacle::ExperimentConfig value;
};

struct vacle_reports {
  std::vector<vacle::SimulationReport> value;
};

namespace {

thread_local std::string g_last_error;

struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Fn>
vacle_status guard(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return VACLE_OK;
  } catch (const ArgumentError& e) {
    g_last_error = e.what();
    return VACLE_ERR_ARGUMENT;
  } catch (const vacle::ConfigError& e) {
    g_last_error = e.what();
    return VACLE_ERR_CONFIG;
  } catch (const vacle::NumericalError& e) {
    g_last_error = e.what();
    return VACLE_ERR_NUMERICAL;
  } catch (const vacle::IoError& e) {
    g_last_error = e.what();
    return VACLE_ERR_IO;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return VACLE_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VACLE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VACLE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VACLE_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) throw ArgumentError(std::string(name) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

vacle::ModelKind kind_from(vacle_family f) {
  switch (f) {
    case VACLE_FAMILY_POPULATION:
      return vacle::ModelKind::SpikedPopulation;
    case VACLE_FAMILY_FISHER:
      return vacle::ModelKind::SpikedFisher;
    case VACLE_FAMILY_AUTOCOV:
      return vacle::ModelKind::AutocovFactor;
  }
  throw ArgumentError("unknown family");
}

vacle::Method method_from(vacle_method m) {
  switch (m) {
    case VACLE_METHOD_VACLE:
      return vacle::Method::Vacle;
    case VACLE_METHOD_TVACLE:
      return vacle::Method::Tvacle;
    case VACLE_METHOD_PY:
      return vacle::Method::Py;
    case VACLE_METHOD_LWY:
      return vacle::Method::Lwy;
    case VACLE_METHOD_WY:
      return vacle::Method::Wy;
  }
  throw ArgumentError("unknown method");
}

vacle_method method_to(vacle::Method m) {
  switch (m) {
    case vacle::Method::Vacle:
      return VACLE_METHOD_VACLE;
    case vacle::Method::Tvacle:
      return VACLE_METHOD_TVACLE;
    case vacle::Method::Py:
      return VACLE_METHOD_PY;
    case vacle::Method::Lwy:
      return VACLE_METHOD_LWY;
    case vacle::Method::Wy:
      return VACLE_METHOD_WY;
  }
  return VACLE_METHOD_VACLE;
}

std::optional<std::size_t> opt_T(std::size_t T) {
  return T == 0 ? std::nullopt : std::optional<std::size_t>(T);
}

std::vector<double> to_vec(const double* a, std::size_t n, const char* name) {
  if (n > 0) need(a, name);
  return n > 0 ? std::vector<double>(a, a + n) : std::vector<double>{};
}

nlohmann::json limits(vacle_family family, double c, double y, double sigma2,
                      const std::vector<double>& a, const std::vector<double>& b) {
  using namespace vacle::rmt;
  nlohmann::json j;
  switch (family) {
    case VACLE_FAMILY_POPULATION: {
      const auto law = MpLaw::make(c, sigma2);
      j["family"] = "population";
      j["c"] = c;
      j["lower_edge"] = law.lower_edge();
      j["upper_edge"] = law.upper_edge();
      j["threshold"] = pop_threshold(c, sigma2);
      nlohmann::json spikes = nlohmann::json::array();
      for (double s : a) {
        const bool ok = s > pop_threshold(c, sigma2);
        spikes.push_back({{"spike", s},
                          {"identifiable", ok},
                          {"limit", ok ? pop_spike_map(s, c, sigma2) : law.upper_edge()}});
      }
      j["spikes"] = spikes;
      j["identifiable"] = pop_identifiable_count(a, c, sigma2);
      break;
    }
    case VACLE_FAMILY_FISHER: {
      const auto law = FisherLaw::make(c, y, sigma2);
      j["family"] = "fisher";
      j["c"] = c;
      j["y"] = y;
      j["threshold"] = law.spike_threshold();
      j["lower_edge"] = law.lower_edge();
      j["upper_edge"] = law.upper_edge();
      nlohmann::json spikes = nlohmann::json::array();
      for (double s : a) {
        const bool ok = s > law.spike_threshold();
        spikes.push_back({{"spike", s},
                          {"identifiable", ok},
                          {"limit", ok ? fisher_spike_map(s, law) : law.upper_edge()}});
      }
      j["spikes"] = spikes;
      j["identifiable"] = fisher_identifiable_count(a, law);
      break;
    }
    case VACLE_FAMILY_AUTOCOV: {
      const auto law = AutocovLaw::make(y, sigma2);
      j["family"] = "autocov";
      j["y"] = y;
      j["lower_edge"] = law.lower_edge();
      j["upper_edge"] = law.upper_edge();
      j["t_at_edge"] = autocov_t_at_edge(law);
      if (!b.empty() && b.size() != 1 && b.size() != a.size()) {
        throw vacle::ConfigError("need one innovation variance, or one per theta");
      }
      nlohmann::json factors = nlohmann::json::array();
      std::vector<FactorSignature> sigs;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double g = b.empty() ? 1.0 : (b.size() == 1 ? b[0] : b[i]);
        const auto sig = FactorSignature::ar1(a[i], g);
        sigs.push_back(sig);
        const auto lim = autocov_factor_limit(sig, law);
        factors.push_back({{"theta", a[i]},
                           {"innovation_var", g},
                           {"t1", autocov_t1(sig, law)},
                           {"identifiable", lim.identifiable},
                           {"limit", lim.value}});
      }
      j["factors"] = factors;
      j["identifiable"] = autocov_identifiable_count(sigs, law);
      break;
    }
    default:
      throw ArgumentError("unknown family");
  }
  j["sigma2"] = sigma2;
  return j;
}

}  // namespace

extern "C" {

const char* vacle_version(void) { return "0.1.0"; }

const char* vacle_last_error(void) { return g_last_error.c_str(); }

void vacle_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------------------
// Oracles

vacle_status vacle_mp_edges(double c, double sigma2, double* lower, double* upper) {
  return guard([&] {
    need(lower, "lower");
    need(upper, "upper");
    const auto law = vacle::rmt::MpLaw::make(c, sigma2);
    *lower = law.lower_edge();
    *upper = law.upper_edge();
  });
}

vacle_status vacle_mp_quantile(double alpha, double c, double* out) {
  return guard([&] {
    need(out, "out");
    *out = vacle::rmt::mp_quantile(alpha, c);
  });
}

vacle_status vacle_pop_spike_map(double lambda, double c, double sigma2, double* out) {
  return guard([&] {
    need(out, "out");
    *out = vacle::rmt::pop_spike_map(lambda, c, sigma2);
  });
}

vacle_status vacle_fisher_limits(double c, double y, double sigma2, double* threshold,
                                 double* upper_edge) {
  return guard([&] {
    need(threshold, "threshold");
    need(upper_edge, "upper_edge");
    const auto law = vacle::rmt::FisherLaw::make(c, y, sigma2);
    *threshold = law.spike_threshold();
    *upper_edge = law.upper_edge();
  });
}

vacle_status vacle_fisher_spike_map(double lambda, double c, double y, double sigma2, double* out) {
  return guard([&] {
    need(out, "out");
    *out = vacle::rmt::fisher_spike_map(lambda, vacle::rmt::FisherLaw::make(c, y, sigma2));
  });
}

vacle_status vacle_autocov_edge(double y, double sigma2, double* upper) {
  return guard([&] {
    need(upper, "upper");
    *upper = vacle::rmt::AutocovLaw::make(y, sigma2).upper_edge();
  });
}

vacle_status vacle_autocov_factor_limit(double theta, double innovation_var, double y, double sigma2,
                                        double* value, int* identifiable) {
  return guard([&] {
    need(value, "value");
    const auto lim = vacle::rmt::autocov_factor_limit(
        vacle::rmt::FactorSignature::ar1(theta, innovation_var),
        vacle::rmt::AutocovLaw::make(y, sigma2));
    *value = lim.value;
    if (identifiable) *identifiable = lim.identifiable ? 1 : 0;
  });
}

vacle_status vacle_limits_json(vacle_family family, double c, double y, double sigma2,
                               const double* a, size_t na, const double* b, size_t nb,
                               char** json) {
  return guard([&] {
    need(json, "json");
    *json = dup(limits(family, c, y, sigma2, to_vec(a, na, "a"), to_vec(b, nb, "b")).dump());
  });
}

// ---------------------------------------------------------------------------
// Spectra

vacle_status vacle_spectrum_create(const double* values, size_t count, size_t n, size_t T,
                                   int scale_power, vacle_spectrum** out) {
  return guard([&] {
    need(out, "out");
    need(values, "values");
    vacle::Spectrum s(std::vector<double>(values, values + count),
                      vacle::SpectrumShape{count, n, opt_T(T)}, scale_power,
                      vacle::Provenance::Ingested);
    *out = new vacle_spectrum{std::move(s)};
  });
}

vacle_status vacle_spectrum_ingest(const char* path, const char* column, size_t n, size_t T,
                                   int scale_power, vacle_spectrum** out) {
  return guard([&] {
    need(out, "out");
    need(path, "path");
    vacle::IngestOptions opts;
    if (column) opts.column = column;
    opts.n = n;
    opts.T = opt_T(T);
    opts.scale_power = scale_power;
    *out = new vacle_spectrum{vacle::ingest_spectrum(path, opts)};
  });
}

size_t vacle_spectrum_size(const vacle_spectrum* s) { return s ? s->value.size() : 0; }

vacle_status vacle_spectrum_values(const vacle_spectrum* s, double* out, size_t capacity) {
  return guard([&] {
    need(s, "spectrum");
    if (capacity > 0) need(out, "out");
    const auto v = s->value.values();
    const std::size_t k = std::min(capacity, v.size());
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), out);
  });
}

uint64_t vacle_spectrum_hash(const vacle_spectrum* s) { return s ? s->value.hash() : 0; }

void vacle_spectrum_free(vacle_spectrum* s) { delete s; }

// ---------------------------------------------------------------------------
// Models

vacle_status vacle_model_population(const double* spikes, size_t q, double sigma2, size_t p,
                                    size_t n, vacle_model** out) {
  return guard([&] {
    need(out, "out");
    vacle::ModelSpec spec = vacle::PopulationModel{to_vec(spikes, q, "spikes"), sigma2, p, n};
    vacle::validate(spec);
    *out = new vacle_model{std::move(spec)};
  });
}

vacle_status vacle_model_fisher(const double* alpha, size_t q, int split_noise, double sigma2,
                                size_t p, size_t n, size_t T, vacle_model** out) {
  return guard([&] {
    need(out, "out");
    vacle::ModelSpec spec = vacle::FisherModel{
        to_vec(alpha, q, "alpha"),
        split_noise ? vacle::FisherNoise::SplitOneTwo : vacle::FisherNoise::Identity, sigma2, p,
        n, T};
    vacle::validate(spec);
    *out = new vacle_model{std::move(spec)};
  });
}

vacle_status vacle_model_autocov(const double* theta, const double* gamma, size_t q, double sigma2,
                                 size_t p, size_t T, vacle_model** out) {
  return guard([&] {
    need(out, "out");
    vacle::AutocovModel m;
    m.theta = to_vec(theta, q, "theta");
    m.gamma = to_vec(gamma, q, "gamma");
    m.sigma2 = sigma2;
    m.p = p;
    m.T = T;
    vacle::ModelSpec spec = m;
    vacle::validate(spec);
    *out = new vacle_model{std::move(spec)};
  });
}

vacle_status vacle_model_true_order(const vacle_model* m, size_t* out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    *out = vacle::identifiable_order(m->value);
  });
}

vacle_status vacle_simulate(const vacle_model* m, uint64_t seed, vacle_spectrum** out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    vacle::Rng rng = vacle::Rng::for_stream(seed, vacle::StreamTag::Adhoc, 0, 0);
    *out = new vacle_spectrum{vacle::simulate(m->value, rng)};
  });
}

void vacle_model_free(vacle_model* m) { delete m; }

// ---------------------------------------------------------------------------
// Estimation

void vacle_estimate_options_default(vacle_estimate_options* o) {
  if (o == nullptr) return;
  o->method = VACLE_METHOD_TVACLE;
  o->family = VACLE_FAMILY_POPULATION;
  o->tau = 0.0;
  o->L = 20;
  o->ridge = 0.0;
  o->sigma2 = 1.0;
  o->estimate_sigma2 = 0;
  o->k1 = 5.0;
  o->k2 = 5.0;
  o->kappa = 0.0;
  o->py_C = 0.0;
  o->py_start = 0;
  o->lwy_dT = 0.0;
  o->wy_dn = 0.0;
}

vacle_status vacle_estimate(const vacle_spectrum* s, const vacle_estimate_options* o,
                            vacle_result** out) {
  return guard([&] {
    need(s, "spectrum");
    need(o, "options");
    need(out, "out");
    const vacle::Spectrum& sp = s->value;
    const vacle::ModelKind kind = kind_from(o->family);
    const vacle::Method method = method_from(o->method);
    if (o->py_start != 0 && o->py_start != 1) throw vacle::ConfigError("py_start must be 0 or 1");

    double sigma2 = o->sigma2;
    if (o->estimate_sigma2) {
      if (kind != vacle::ModelKind::SpikedPopulation) {
        throw vacle::ConfigError("sigma2 estimation is only available for the population family");
      }
      if (sp.n() == 0) throw vacle::ConfigError("sigma2 estimation needs n");
      sigma2 = vacle::estimate_sigma2(sp, static_cast<double>(sp.p()) / static_cast<double>(sp.n()));
    }
    if (!(sigma2 > 0.0)) throw vacle::ConfigError("sigma2 must be positive");

    vacle::MethodParams mp;
    mp.kind = kind;
    mp.tau = o->tau > 0.0 ? o->tau : (kind == vacle::ModelKind::SpikedFisher ? 0.8 : 0.5);
    mp.L = o->L;
    mp.py_start = o->py_start == 0 ? vacle::PyStart::Zero : vacle::PyStart::One;
    const bool needs_edge = method == vacle::Method::Tvacle || method == vacle::Method::Wy;
    const double edge = needs_edge ? vacle::normalized_edge(kind, sp.shape()) : 0.0;
    const double rate = vacle::loglog_rate(sp.p());
    switch (method) {
      case vacle::Method::Vacle:
      case vacle::Method::Tvacle:
        if (!(o->ridge > 0.0)) throw vacle::ConfigError("ridge c_n must be positive");
        mp.vacle_ridge = mp.tvacle_ridge = o->ridge;
        mp.transform = vacle::TransformParams{edge, o->kappa > 0.0 ? o->kappa : rate, o->k1, o->k2};
        break;
      case vacle::Method::Py:
        if (sp.n() == 0) throw vacle::ConfigError("py needs a sample size n");
        mp.py_C = o->py_C > 0.0
                      ? o->py_C
                      : vacle::py_constant(static_cast<double>(sp.p()) / static_cast<double>(sp.n())).value;
        break;
      case vacle::Method::Lwy:
        mp.lwy_dT = o->lwy_dT;
        break;
      case vacle::Method::Wy:
        mp.wy_edge = edge;
        mp.wy_dn = o->wy_dn > 0.0 ? o->wy_dn : rate;
        break;
    }
    auto r = std::make_unique<vacle_result>();
    r->estimate = vacle::run_method(method, sp, sigma2, mp);
    r->sigma2 = sigma2;
    *out = r.release();
  });
}

size_t vacle_result_q(const vacle_result* r) { return r ? r->estimate.q : 0; }

int vacle_result_exhausted(const vacle_result* r) { return r && r->estimate.exhausted ? 1 : 0; }

double vacle_result_sigma2(const vacle_result* r) { return r ? r->sigma2 : std::nan(""); }

vacle_status vacle_result_trace_json(const vacle_result* r, char** json) {
  return guard([&] {
    need(r, "result");
    need(json, "json");
    if (!r->estimate.trace) throw vacle::ConfigError("this method keeps no ratio trace");
    *json = dup(nlohmann::json(*r->estimate.trace).dump());
  });
}

vacle_status vacle_result_plot_csv(const vacle_result* r, char** csv) {
  return guard([&] {
    need(r, "result");
    need(csv, "csv");
    if (!r->estimate.trace) throw vacle::ConfigError("this method keeps no ratio trace");
    *csv = dup(vacle::plot_csv(*r->estimate.trace));
  });
}

void vacle_result_free(vacle_result* r) { delete r; }

// ---------------------------------------------------------------------------
// Calibration

vacle_status vacle_calibrate(vacle_family family, size_t p, size_t n, size_t T, size_t reps,
                             uint64_t seed, const char* cache_dir, int force, size_t threads,
                             vacle_calibration** out, int* cache_hit) {
  return guard([&] {
    need(out, "out");
    vacle::CalibrationKey key{kind_from(family), p, n, opt_T(T), reps, seed};
    bool hit = false;
    vacle::CalibrationResult r;
    if (cache_dir == nullptr) {
      r = vacle::calibrate_ridge(key, threads);
    } else {
      const std::filesystem::path dir =
          *cache_dir ? std::filesystem::path(cache_dir) : vacle::CalibrationCache::default_dir();
      r = vacle::CalibrationCache(dir).get(key, force != 0, threads, &hit);
    }
    if (cache_hit) *cache_hit = hit ? 1 : 0;
    *out = new vacle_calibration{std::move(r)};
  });
}

vacle_status vacle_calibration_ridge(const vacle_calibration* c, const char* which, double* value,
                                     int* clamped) {
  return guard([&] {
    need(c, "calibration");
    need(which, "which");
    need(value, "value");
    const auto& r = c->value.ridge(vacle::parse_ridge_choice(which));
    *value = r.value;
    if (clamped) *clamped = r.clamped ? 1 : 0;
  });
}

double vacle_calibration_lwy_dT(const vacle_calibration* c) {
  return c ? c->value.lwy_dT : std::nan("");
}

vacle_status vacle_calibration_json(const vacle_calibration* c, char** json) {
  return guard([&] {
    need(c, "calibration");
    need(json, "json");
    *json = dup(nlohmann::json(c->value).dump());
  });
}

vacle_status vacle_calibration_cache_path(const vacle_calibration* c, const char* cache_dir,
                                          char** path) {
  return guard([&] {
    need(c, "calibration");
    need(path, "path");
    const std::filesystem::path dir = cache_dir && *cache_dir
                                          ? std::filesystem::path(cache_dir)
                                          : vacle::CalibrationCache::default_dir();
    *path = dup(vacle::CalibrationCache(dir).path_for(c->value.key).string());
  });
}

void vacle_calibration_free(vacle_calibration* c) { delete c; }

// ---------------------------------------------------------------------------
// Experiments

vacle_status vacle_experiment_load(const char* path, vacle_experiment** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new vacle_experiment{vacle::load_config(path)};
  });
}

vacle_status vacle_experiment_parse(const char* text, vacle_experiment** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = new vacle_experiment{vacle::parse_config(text)};
  });
}

vacle_status vacle_experiment_set(vacle_experiment* e, const char* key, const char* value) {
  return guard([&] {
    need(e, "experiment");
    need(key, "key");
    need(value, "value");
    e->value.set(key, value);
  });
}

vacle_status vacle_experiment_validate(const vacle_experiment* e) {
  return guard([&] {
    need(e, "experiment");
    e->value.validate();
  });
}

vacle_status vacle_experiment_output(const vacle_experiment* e, char** path, int* trace) {
  return guard([&] {
    need(e, "experiment");
    need(path, "path");
    *path = dup(e->value.output);
    if (trace) *trace = e->value.trace ? 1 : 0;
  });
}

vacle_status vacle_experiment_run(const vacle_experiment* e, vacle_reports** out) {
  std::string diagnostic;
  vacle_status st = guard([&] {
    need(e, "experiment");
    need(out, "out");
    auto reports = std::make_unique<vacle_reports>();
    reports->value = vacle::run_experiment(e->value);
    for (const auto& r : reports->value) {
      if (r.partial && diagnostic.empty()) diagnostic = r.diagnostic;
    }
    *out = reports.release();
  });
  if (st == VACLE_OK && !diagnostic.empty()) {
    g_last_error = "partial results: " + diagnostic;
    return VACLE_ERR_NUMERICAL;
  }
  return st;
}

void vacle_experiment_free(vacle_experiment* e) { delete e; }

vacle_status vacle_reports_load_json(const char* path, vacle_reports** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path);
    if (!in) throw vacle::IoError(std::string("cannot open ") + path);
    *out = new vacle_reports{vacle::reports_from_json(nlohmann::json::parse(in))};
  });
}

size_t vacle_reports_count(const vacle_reports* r) { return r ? r->value.size() : 0; }

vacle_status vacle_reports_get(const vacle_reports* r, size_t i, vacle_report_summary* out) {
  return guard([&] {
    need(r, "reports");
    need(out, "out");
    if (i >= r->value.size()) throw ArgumentError("report index out of range");
    const auto& s = r->value[i];
    out->method = method_to(s.method);
    out->p = s.size.p;
    out->n = s.size.n;
    out->T = s.size.T.value_or(0);
    out->reps = s.reps;
    out->true_q = s.true_q;
    out->mean = s.mean;
    out->mse = s.mse;
    out->misest_rate = s.misest_rate;
    out->partial = s.partial ? 1 : 0;
  });
}

vacle_status vacle_reports_csv(const vacle_reports* r, char** csv) {
  return guard([&] {
    need(r, "reports");
    need(csv, "csv");
    *csv = dup(vacle::summarize(r->value));
  });
}

vacle_status vacle_reports_json(const vacle_reports* r, char** json) {
  return guard([&] {
    need(r, "reports");
    need(json, "json");
    *json = dup(vacle::reports_to_json(r->value).dump());
  });
}

void vacle_reports_free(vacle_reports* r) { delete r; }

}  // extern "C"
