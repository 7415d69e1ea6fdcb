#include "vacle/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>
#include <thread>

#include <unistd.h>

#include "parallel.hpp"
#include "vacle/error.hpp"
#include "vacle/rmt.hpp"

namespace vacle {

namespace {

constexpr int kSchema = 1;
constexpr double kLwyCoverage = 0.99;

std::uint64_t key_group(const CalibrationKey& key) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(key.kind));
  h = mix64(h ^ key.p);
  h = mix64(h ^ key.n);
  h = mix64(h ^ key.T.value_or(0));
  return h;
}

std::string level_name(double alpha) {
  std::ostringstream out;
  out << alpha;
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Keys

std::size_t CalibrationKey::sample_size() const {
  return kind == ModelKind::AutocovFactor ? T.value_or(0) : n;
}

void CalibrationKey::validate() const {
  if (reps < 2) throw ConfigError("calibration needs R >= 2 replications, got " + std::to_string(reps));
  if (p < 3) throw ConfigError("calibration needs p >= 3");
  if (kind != ModelKind::AutocovFactor && n < 3) throw ConfigError("calibration needs n >= 3");
  if (kind != ModelKind::SpikedPopulation && !T) {
    throw ConfigError("calibration of the " + to_string(kind) + " family needs T");
  }
  if (sample_size() < 3) throw ConfigError("calibration needs a sample size >= 3");
}

ModelSpec CalibrationKey::noise_model() const {
  switch (kind) {
    case ModelKind::SpikedPopulation:
      return PopulationModel{{}, 1.0, p, n};
    case ModelKind::SpikedFisher:
      return FisherModel{{}, FisherNoise::Identity, 1.0, p, n, T.value_or(0)};
    case ModelKind::AutocovFactor: {
      AutocovModel m;
      m.p = p;
      m.T = T.value_or(0);
      m.sigma2 = 1.0;
      m.burn_in = 0;
      return m;
    }
  }
  throw ConfigError("unknown model family");
}

std::string CalibrationKey::file_name() const {
  std::ostringstream out;
  out << "calib-" << to_string(kind) << "-p" << p << "-n" << n << "-T" << T.value_or(0) << "-R"
      << reps << "-s" << seed << ".json";
  return out.str();
}

std::string to_string(RidgeChoice r) {
  switch (r) {
    case RidgeChoice::C1:
      return "c1";
    case RidgeChoice::C2:
      return "c2";
    case RidgeChoice::C3a:
      return "c3a";
    case RidgeChoice::C3b:
      return "c3b";
  }
  return "unknown";
}

RidgeChoice parse_ridge_choice(const std::string& text) {
  if (text == "c1") return RidgeChoice::C1;
  if (text == "c2") return RidgeChoice::C2;
  if (text == "c3a") return RidgeChoice::C3a;
  if (text == "c3b") return RidgeChoice::C3b;
  throw ConfigError("unknown ridge '" + text + "' (expected c1, c2, c3a or c3b)");
}

// ---------------------------------------------------------------------------
// Results

double CalibrationResult::quantile(double alpha) const {
  for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
    if (kQuantileLevels[i] == alpha) return quantiles[i];
  }
  throw ConfigError("no calibration quantile at level " + level_name(alpha));
}

const Ridge& CalibrationResult::ridge(RidgeChoice choice) const {
  switch (choice) {
    case RidgeChoice::C1:
      return c1;
    case RidgeChoice::C2:
      return c2;
    case RidgeChoice::C3a:
      return c3a;
    case RidgeChoice::C3b:
      return c3b;
  }
  return c1;
}

bool CalibrationResult::any_clamped() const {
  return c1.clamped || c2.clamped || c3a.clamped || c3b.clamped;
}

namespace {

nlohmann::json ridge_json(const Ridge& r) {
  return {{"value", r.value}, {"raw", r.raw}, {"clamped", r.clamped}};
}

Ridge ridge_from(const nlohmann::json& j) {
  Ridge r;
  j.at("value").get_to(r.value);
  j.at("raw").get_to(r.raw);
  j.at("clamped").get_to(r.clamped);
  return r;
}

Ridge make_ridge(double raw) {
  Ridge r;
  r.raw = raw;
  r.clamped = !(raw > 0.0);
  r.value = r.clamped ? kRidgeFloor : raw;
  return r;
}

}  // namespace

void to_json(nlohmann::json& j, const CalibrationResult& r) {
  nlohmann::json q = nlohmann::json::object();
  for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
    q[level_name(kQuantileLevels[i])] = r.quantiles[i];
  }
  j = nlohmann::json{{"schema", kSchema},
                     {"kind", to_string(r.key.kind)},
                     {"p", r.key.p},
                     {"n", r.key.n},
                     {"T", r.key.T ? nlohmann::json(*r.key.T) : nlohmann::json(nullptr)},
                     {"reps", r.key.reps},
                     {"seed", r.key.seed},
                     {"mean_gap", r.mean_gap},
                     {"quantiles", q},
                     {"c1", ridge_json(r.c1)},
                     {"c2", ridge_json(r.c2)},
                     {"c3a", ridge_json(r.c3a)},
                     {"c3b", ridge_json(r.c3b)},
                     {"lwy_dT", r.lwy_dT}};
}

void from_json(const nlohmann::json& j, CalibrationResult& r) {
  const int schema = j.at("schema").get<int>();
  if (schema != kSchema) {
    throw IoError("unsupported calibration schema " + std::to_string(schema));
  }
  r.key.kind = parse_model_kind(j.at("kind").get<std::string>());
  j.at("p").get_to(r.key.p);
  j.at("n").get_to(r.key.n);
  if (j.at("T").is_null()) {
    r.key.T.reset();
  } else {
    r.key.T = j.at("T").get<std::size_t>();
  }
  j.at("reps").get_to(r.key.reps);
  j.at("seed").get_to(r.key.seed);
  j.at("mean_gap").get_to(r.mean_gap);
  const auto& q = j.at("quantiles");
  for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
    r.quantiles[i] = q.at(level_name(kQuantileLevels[i])).get<double>();
  }
  r.c1 = ridge_from(j.at("c1"));
  r.c2 = ridge_from(j.at("c2"));
  r.c3a = ridge_from(j.at("c3a"));
  r.c3b = ridge_from(j.at("c3b"));
  j.at("lwy_dT").get_to(r.lwy_dT);
}

// ---------------------------------------------------------------------------
// Calibration

double order_statistic(const std::vector<double>& sorted, double alpha) {
  if (sorted.empty()) throw ConfigError("order statistic of an empty sample");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("quantile level must lie in (0, 1]");
  const double r = static_cast<double>(sorted.size()) * alpha;
  // The guard keeps R alpha = 190.00000000000003 at rank 190.
  auto rank = static_cast<std::size_t>(std::ceil(r - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

CalibrationResult summarize_gaps(const CalibrationKey& key, std::vector<double> gaps,
                                 std::vector<double> lwy_stats) {
  key.validate();
  if (gaps.size() != key.reps || lwy_stats.size() != key.reps) {
    throw ConfigError("calibration sample size does not match R");
  }
  CalibrationResult out;
  out.key = key;

  double sum = 0.0;
  for (double g : gaps) sum += g;
  out.mean_gap = sum / static_cast<double>(gaps.size());

  std::sort(gaps.begin(), gaps.end());
  for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
    out.quantiles[i] = order_statistic(gaps, kQuantileLevels[i]);
  }

  const double n = static_cast<double>(key.sample_size());
  const double p = static_cast<double>(key.p);
  const double ll_n = std::log(std::log(n));
  const double ll_p = std::log(std::log(p));
  const double spread = out.quantile(0.95) - out.quantile(0.05);
  const double spread_b = out.quantile(0.8) - out.quantile(0.05);
  out.c1 = make_ridge(ll_n * spread - out.mean_gap);
  out.c2 = make_ridge(std::sqrt(std::max(ll_n, 0.0)) * spread - out.mean_gap);
  out.c3a = make_ridge(std::sqrt(std::max(ll_p, 0.0)) * spread - out.mean_gap);
  out.c3b = make_ridge(std::sqrt(std::max(ll_p, 0.0)) * spread_b - out.mean_gap);

  std::sort(lwy_stats.begin(), lwy_stats.end());
  double d = std::nextafter(order_statistic(lwy_stats, kLwyCoverage),
                            std::numeric_limits<double>::infinity());
  out.lwy_dT = std::clamp(d, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
  return out;
}

CalibrationResult calibrate_ridge(const CalibrationKey& key, std::size_t threads) {
  key.validate();
  const ModelSpec noise = key.noise_model();
  validate(noise);
  const std::uint64_t group = key_group(key);

  std::vector<double> gaps(key.reps);
  std::vector<double> lwy(key.reps);
  detail::parallel_for(key.reps, threads, [&](std::size_t r) {
    Rng rng = Rng::for_stream(key.seed, StreamTag::Calibration, group, r);
    const Spectrum s = simulate(noise, rng);
    const double norm = s.normalizer(1.0);
    gaps[r] = s[0] / norm - s[1] / norm;
    const double r1 = s[0] > 0.0 ? s[1] / s[0] : 1.0;
    const double r2 = s[1] > 0.0 ? s[2] / s[1] : 1.0;
    lwy[r] = std::max(1.0 - r1, 1.0 - r2);
  });
  return summarize_gaps(key, std::move(gaps), std::move(lwy));
}

// ---------------------------------------------------------------------------
// Cache

CalibrationCache::CalibrationCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path CalibrationCache::default_dir() {
  if (const char* env = std::getenv("VACLE_CACHE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return ".vacle-cache";
}

std::filesystem::path CalibrationCache::path_for(const CalibrationKey& key) const {
  return dir_ / key.file_name();
}

std::optional<CalibrationResult> CalibrationCache::load(const CalibrationKey& key) const {
  const auto path = path_for(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  CalibrationResult r;
  try {
    r = nlohmann::json::parse(in).get<CalibrationResult>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": corrupt calibration file: " + e.what());
  }
  if (!(r.key == key)) throw IoError(path.string() + ": calibration key mismatch");
  return r;
}

void CalibrationCache::store(const CalibrationResult& result) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
  const auto path = path_for(result.key);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << nlohmann::json(result).dump(2) << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move calibration into " + path.string() + ": " + ec.message());
  }
}

CalibrationResult CalibrationCache::get(const CalibrationKey& key, bool force, std::size_t threads,
                                        bool* hit) const {
  key.validate();
  if (!force) {
    if (auto cached = load(key)) {
      if (hit) *hit = true;
      return *cached;
    }
  }
  if (hit) *hit = false;
  CalibrationResult r = calibrate_ridge(key, threads);
  store(r);
  return r;
}

// ---------------------------------------------------------------------------
// sigma2 and the PY constant

double sigma2_alpha(double c) {
  if (!(c > 0.0)) throw ConfigError("aspect ratio c must be positive");
  return 1.0 - 1.0 / (2.0 * std::max(1.0, c));
}

std::size_t sigma2_index(std::size_t p, double c) {
  const double alpha = sigma2_alpha(c);
  const auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(p) * alpha));
  const std::size_t idx = p > drop ? p - drop : 1;
  return std::clamp<std::size_t>(idx, 1, p);
}

double estimate_sigma2(const Spectrum& spectrum, double c) {
  const std::size_t p = spectrum.size();
  if (p < 4) throw ConfigError("sigma2 estimation needs at least 4 eigenvalues");
  const double xi = spectrum[sigma2_index(p, c) - 1];
  return xi / rmt::mp_quantile(sigma2_alpha(c), c);
}

PyConstant py_constant(double c) {
  static constexpr std::array<double, 3> kC{0.25, 1.0, 2.0};
  static constexpr std::array<double, 3> kValue{5.5226, 6.3424, 7.6257};
  if (!(c > 0.0)) throw ConfigError("aspect ratio c must be positive");
  for (std::size_t i = 0; i < kC.size(); ++i) {
    if (c == kC[i]) return {kValue[i], false};
  }
  if (c < kC.front()) return {kValue.front(), true};
  if (c > kC.back()) return {kValue.back(), true};
  std::size_t i = 0;
  while (c > kC[i + 1]) ++i;
  const double t = (std::log(c) - std::log(kC[i])) / (std::log(kC[i + 1]) - std::log(kC[i]));
  return {kValue[i] + t * (kValue[i + 1] - kValue[i]), true};
}

}  // namespace vacle
