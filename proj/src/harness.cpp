#include "vacle/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>

#include "parallel.hpp"
#include "vacle/error.hpp"

namespace vacle {

namespace {

bool uses(const ExperimentConfig& cfg, Method m) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

std::uint64_t grid_group(const GridPoint& g) {
  return mix64(mix64(mix64(g.p) ^ g.n) ^ g.T.value_or(0));
}

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(12);
  out << x;
  return out.str();
}

}  // namespace

bool needs_calibration(const ExperimentConfig& cfg) {
  const bool ridge_needed = !cfg.ridge && (uses(cfg, Method::Vacle) || uses(cfg, Method::Tvacle));
  const bool dT_needed = !cfg.lwy_dT && uses(cfg, Method::Lwy);
  return ridge_needed || dT_needed;
}

MethodParams resolve_params(const ExperimentConfig& cfg, const GridPoint& g,
                            const CalibrationResult* calib) {
  auto need_calib = [&](const char* what) -> const CalibrationResult& {
    if (calib == nullptr) throw ConfigError(std::string("no calibration available for ") + what);
    return *calib;
  };
  MethodParams mp;
  mp.kind = cfg.family;
  mp.tau = cfg.effective_tau();
  mp.L = cfg.L;
  const SpectrumShape shape{g.p, g.n, g.T};
  const double edge = normalized_edge(cfg.family, shape);
  const double rate = loglog_rate(g.p);

  if (uses(cfg, Method::Vacle)) {
    mp.vacle_ridge = cfg.ridge ? *cfg.ridge : need_calib("the VACLE ridge").ridge(cfg.vacle_ridge).value;
  }
  if (uses(cfg, Method::Tvacle)) {
    mp.tvacle_ridge = cfg.ridge ? *cfg.ridge
                                : need_calib("the TVACLE ridge").ridge(cfg.effective_tvacle_ridge()).value;
  }
  mp.transform = TransformParams{edge, cfg.kappa.value_or(rate), cfg.k1, cfg.k2};
  if (uses(cfg, Method::Py)) {
    if (g.n == 0) throw ConfigError("py needs a sample size n");
    mp.py_C = cfg.py_C ? *cfg.py_C
                       : py_constant(static_cast<double>(g.p) / static_cast<double>(g.n)).value;
  }
  mp.py_start = cfg.py_start;
  if (uses(cfg, Method::Lwy)) {
    mp.lwy_dT = cfg.lwy_dT ? *cfg.lwy_dT : need_calib("the LWY threshold").lwy_dT;
  }
  mp.wy_edge = edge;
  mp.wy_dn = cfg.wy_dn.value_or(rate);
  return mp;
}

Estimate run_method(Method method, const Spectrum& spectrum, double sigma2,
                    const MethodParams& params) {
  switch (method) {
    case Method::Vacle: {
      EstimatorConfig ec;
      ec.tau = params.tau;
      ec.L = params.L;
      ec.ridge = params.vacle_ridge;
      return vacle(spectrum, sigma2, ec);
    }
    case Method::Tvacle: {
      EstimatorConfig ec;
      ec.tau = params.tau;
      ec.L = params.L;
      ec.ridge = params.tvacle_ridge;
      ec.transform = params.transform;
      return tvacle(spectrum, sigma2, ec);
    }
    case Method::Py:
      return py_estimator(spectrum, sigma2, params.py_C, params.L, params.py_start);
    case Method::Lwy:
      return lwy_estimator(spectrum, params.lwy_dT, params.L);
    case Method::Wy:
      return wy_estimator(spectrum, sigma2, params.wy_edge, params.wy_dn, params.L);
  }
  throw ConfigError("unknown method");
}

// ---------------------------------------------------------------------------
// Reports

std::vector<double> SimulationReport::csv_distribution() const {
  std::vector<double> out(kCsvBuckets + 1, 0.0);
  if (reps == 0) return out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out[std::min(k, kCsvBuckets)] += static_cast<double>(counts[k]);
  }
  for (double& v : out) v /= static_cast<double>(reps);
  return out;
}

SimulationReport aggregate(std::vector<std::size_t> estimates, std::size_t true_q, std::size_t L) {
  SimulationReport r;
  r.true_q = true_q;
  r.reps = estimates.size();
  std::size_t top = L;
  for (std::size_t q : estimates) top = std::max(top, q);
  r.counts.assign(top + 1, 0);
  double sum = 0.0;
  double sq = 0.0;
  std::size_t miss = 0;
  for (std::size_t q : estimates) {
    ++r.counts[q];
    const double d = static_cast<double>(q) - static_cast<double>(true_q);
    sum += static_cast<double>(q);
    sq += d * d;
    if (q != true_q) ++miss;
  }
  if (!estimates.empty()) {
    const double n = static_cast<double>(estimates.size());
    r.mean = sum / n;
    r.mse = sq / n;
    r.misest_rate = static_cast<double>(miss) / n;
  }
  r.estimates = std::move(estimates);
  return r;
}

void to_json(nlohmann::json& j, const SimulationReport& r) {
  j = nlohmann::json{{"model_id", r.model_id},
                     {"family", to_string(r.kind)},
                     {"p", r.size.p},
                     {"n", r.size.n},
                     {"T", r.size.T ? nlohmann::json(*r.size.T) : nlohmann::json(nullptr)},
                     {"estimator", to_string(r.method)},
                     {"R", r.reps},
                     {"seed", r.seed},
                     {"true_q", r.true_q},
                     {"mean", r.mean},
                     {"mse", r.mse},
                     {"misest_rate", r.misest_rate},
                     {"counts", r.counts},
                     {"exhausted", r.exhausted},
                     {"runtime_s", r.runtime_s},
                     {"partial", r.partial},
                     {"diagnostic", r.diagnostic},
                     {"estimates", r.estimates},
                     {"spectrum_hashes", r.spectrum_hashes}};
  j["sigma2_mean"] = r.sigma2_mean ? nlohmann::json(*r.sigma2_mean) : nlohmann::json(nullptr);
  j["sigma2_mse"] = r.sigma2_mse ? nlohmann::json(*r.sigma2_mse) : nlohmann::json(nullptr);
  if (!r.traces.empty()) j["traces"] = r.traces;
}

void from_json(const nlohmann::json& j, SimulationReport& r) {
  j.at("model_id").get_to(r.model_id);
  r.kind = parse_model_kind(j.at("family").get<std::string>());
  j.at("p").get_to(r.size.p);
  j.at("n").get_to(r.size.n);
  if (j.at("T").is_null()) {
    r.size.T.reset();
  } else {
    r.size.T = j.at("T").get<std::size_t>();
  }
  r.method = parse_method(j.at("estimator").get<std::string>());
  j.at("R").get_to(r.reps);
  j.at("seed").get_to(r.seed);
  j.at("true_q").get_to(r.true_q);
  j.at("mean").get_to(r.mean);
  j.at("mse").get_to(r.mse);
  j.at("misest_rate").get_to(r.misest_rate);
  j.at("counts").get_to(r.counts);
  j.at("exhausted").get_to(r.exhausted);
  j.at("runtime_s").get_to(r.runtime_s);
  j.at("partial").get_to(r.partial);
  j.at("diagnostic").get_to(r.diagnostic);
  j.at("estimates").get_to(r.estimates);
  j.at("spectrum_hashes").get_to(r.spectrum_hashes);
  if (!j.at("sigma2_mean").is_null()) r.sigma2_mean = j.at("sigma2_mean").get<double>();
  if (!j.at("sigma2_mse").is_null()) r.sigma2_mse = j.at("sigma2_mse").get<double>();
  if (j.contains("traces")) j.at("traces").get_to(r.traces);
}

nlohmann::json reports_to_json(const std::vector<SimulationReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(r);
  return arr;
}

std::vector<SimulationReport> reports_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw IoError("report JSON must be an array");
  return j.get<std::vector<SimulationReport>>();
}

std::string csv_header() {
  std::ostringstream out;
  out << "model_id,p,n,T,estimator,R,mean,mse,misest_rate";
  for (std::size_t k = 0; k < kCsvBuckets; ++k) out << ",d" << k;
  out << ",d_ge_" << kCsvBuckets << ",seed,runtime_s";
  return out.str();
}

std::string summarize(const std::vector<SimulationReport>& reports) {
  std::ostringstream out;
  out << csv_header() << '\n';
  for (const auto& r : reports) {
    out << r.model_id << ',' << r.size.p << ',';
    if (r.size.n > 0) out << r.size.n;
    out << ',';
    if (r.size.T) out << *r.size.T;
    out << ',' << to_string(r.method) << ',' << r.reps << ',' << fmt(r.mean) << ',' << fmt(r.mse)
        << ',' << fmt(r.misest_rate);
    for (double d : r.csv_distribution()) out << ',' << fmt(d);
    out << ',' << r.seed << ',' << fmt(r.runtime_s) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Runner

std::vector<SimulationReport> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<SimulationReport> all;
  const std::size_t M = cfg.methods.size();
  const std::size_t R = cfg.reps;

  for (const GridPoint& g : cfg.grid) {
    const auto started = std::chrono::steady_clock::now();
    const ModelSpec spec = cfg.model_at(g);
    const std::size_t true_q = identifiable_order(spec);

    std::optional<CalibrationResult> calib;
    if (needs_calibration(cfg)) {
      CalibrationKey key{cfg.family, g.p, g.n, g.T, cfg.calibration_reps,
                         cfg.effective_calibration_seed()};
      if (cfg.cache_dir) {
        calib = CalibrationCache(*cfg.cache_dir).get(key, false, cfg.threads);
      } else {
        calib = calibrate_ridge(key, cfg.threads);
      }
    }
    const MethodParams params = resolve_params(cfg, g, calib ? &*calib : nullptr);
    const double c = g.n > 0 ? static_cast<double>(g.p) / static_cast<double>(g.n) : 0.0;

    std::vector<std::vector<std::size_t>> est(M, std::vector<std::size_t>(R, 0));
    std::vector<std::vector<char>> exhausted(M, std::vector<char>(R, 0));
    std::vector<std::vector<RatioTrace>> traces(M, std::vector<RatioTrace>(cfg.trace ? R : 0));
    std::vector<std::uint64_t> hashes(R, 0);
    std::vector<double> sigma2_hat(R, cfg.sigma2);

    std::atomic<std::size_t> fail_at{R};
    std::mutex mu;
    std::size_t first_fail = R;
    std::string failure;
    const std::uint64_t group = grid_group(g);

    detail::parallel_for(R, cfg.threads, [&](std::size_t r) {
      if (r > fail_at.load()) return;
      try {
        Rng rng = Rng::for_stream(cfg.seed, StreamTag::Replication, group, r);
        const Spectrum s = simulate(spec, rng);
        hashes[r] = s.hash();
        const double s2 =
            cfg.sigma2_mode == Sigma2Mode::Estimated ? estimate_sigma2(s, c) : cfg.sigma2;
        sigma2_hat[r] = s2;
        for (std::size_t m = 0; m < M; ++m) {
          Estimate e = run_method(cfg.methods[m], s, s2, params);
          est[m][r] = e.q;
          exhausted[m][r] = e.exhausted ? 1 : 0;
          if (cfg.trace && e.trace) traces[m][r] = std::move(*e.trace);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (r < first_fail) {
          first_fail = r;
          failure = "replication " + std::to_string(r) + ": " + e.what();
          fail_at.store(r);
        }
      }
    });

    const std::size_t done = first_fail;
    const double runtime =
        cfg.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
                   : 0.0;

    for (std::size_t m = 0; m < M; ++m) {
      std::vector<std::size_t> kept(est[m].begin(), est[m].begin() + static_cast<std::ptrdiff_t>(done));
      SimulationReport rep = aggregate(std::move(kept), true_q, cfg.L);
      rep.model_id = cfg.model_id;
      rep.kind = cfg.family;
      rep.size = g;
      rep.method = cfg.methods[m];
      rep.seed = cfg.seed;
      rep.runtime_s = runtime;
      rep.partial = done < R;
      rep.diagnostic = failure;
      for (std::size_t r = 0; r < done; ++r) rep.exhausted += exhausted[m][r] ? 1 : 0;
      rep.spectrum_hashes.assign(hashes.begin(), hashes.begin() + static_cast<std::ptrdiff_t>(done));
      if (cfg.sigma2_mode == Sigma2Mode::Estimated && done > 0) {
        double sum = 0.0;
        double sq = 0.0;
        for (std::size_t r = 0; r < done; ++r) {
          sum += sigma2_hat[r];
          sq += (sigma2_hat[r] - cfg.sigma2) * (sigma2_hat[r] - cfg.sigma2);
        }
        rep.sigma2_mean = sum / static_cast<double>(done);
        rep.sigma2_mse = sq / static_cast<double>(done);
      }
      const bool traced = cfg.methods[m] == Method::Vacle || cfg.methods[m] == Method::Tvacle;
      if (cfg.trace && traced) {
        rep.traces.assign(std::make_move_iterator(traces[m].begin()),
                          std::make_move_iterator(traces[m].begin() + static_cast<std::ptrdiff_t>(done)));
      }
      all.push_back(std::move(rep));
    }
  }
  return all;
}

}  // namespace vacle
