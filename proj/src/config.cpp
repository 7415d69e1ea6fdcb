#include "vacle/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vacle/error.hpp"

namespace vacle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

double to_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, value, "a number");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, value, "a nonnegative integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(trim(value));
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad_value(key, value, "a boolean");
}

std::vector<double> to_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split(value, ',')) out.push_back(to_double(key, item));
  return out;
}

const std::vector<std::string> kKeys = {
    "model.family",          "model.id",           "model.spikes",         "model.alpha",
    "model.noise",           "model.theta",        "model.gamma",          "model.sigma2",
    "model.burn_in",         "model.grid",         "estimator.methods",    "estimator.tau",
    "estimator.L",           "estimator.k1",       "estimator.k2",         "estimator.kappa",
    "estimator.vacle_ridge", "estimator.tvacle_ridge", "estimator.ridge",  "estimator.C",
    "estimator.py_start",    "estimator.dT",       "estimator.dn",         "calibration.reps",
    "calibration.seed",      "calibration.cache",  "harness.reps",         "harness.seed",
    "harness.threads",       "harness.sigma2_mode", "io.output",           "io.trace",
    "io.timing",
};

}  // namespace

const std::vector<std::string>& config_keys() { return kKeys; }

GridPoint parse_grid_point(const std::string& token, ModelKind kind) {
  std::vector<std::size_t> dims;
  for (const auto& part : split(lower(token), 'x')) {
    dims.push_back(static_cast<std::size_t>(to_uint("model.grid", part)));
  }
  GridPoint g;
  switch (kind) {
    case ModelKind::SpikedPopulation:
      if (dims.size() != 2) throw ConfigError("model.grid: population point '" + token + "' must be p x n");
      g.p = dims[0];
      g.n = dims[1];
      break;
    case ModelKind::SpikedFisher:
      if (dims.size() != 3) throw ConfigError("model.grid: Fisher point '" + token + "' must be p x n x T");
      g.p = dims[0];
      g.n = dims[1];
      g.T = dims[2];
      break;
    case ModelKind::AutocovFactor:
      if (dims.size() != 2) throw ConfigError("model.grid: auto-covariance point '" + token + "' must be p x T");
      g.p = dims[0];
      g.T = dims[1];
      break;
  }
  return g;
}

std::string to_string(const GridPoint& g, ModelKind kind) {
  switch (kind) {
    case ModelKind::SpikedPopulation:
      return std::to_string(g.p) + "x" + std::to_string(g.n);
    case ModelKind::SpikedFisher:
      return std::to_string(g.p) + "x" + std::to_string(g.n) + "x" + std::to_string(g.T.value_or(0));
    case ModelKind::AutocovFactor:
      return std::to_string(g.p) + "x" + std::to_string(g.T.value_or(0));
  }
  return "";
}

double ExperimentConfig::effective_tau() const {
  if (tau) return *tau;
  return family == ModelKind::SpikedFisher ? 0.8 : 0.5;
}

RidgeChoice ExperimentConfig::effective_tvacle_ridge() const {
  if (tvacle_ridge) return *tvacle_ridge;
  return family == ModelKind::SpikedFisher ? RidgeChoice::C3a : RidgeChoice::C2;
}

ModelSpec ExperimentConfig::model_at(const GridPoint& g) const {
  switch (family) {
    case ModelKind::SpikedPopulation:
      return PopulationModel{spikes, sigma2, g.p, g.n};
    case ModelKind::SpikedFisher:
      return FisherModel{alpha, noise, sigma2, g.p, g.n, g.T.value_or(0)};
    case ModelKind::AutocovFactor: {
      AutocovModel m;
      m.theta = theta;
      m.gamma = gamma;
      if (m.gamma.size() == 1) m.gamma.assign(m.theta.size(), gamma.front());
      m.sigma2 = sigma2;
      m.p = g.p;
      m.T = g.T.value_or(0);
      m.burn_in = burn_in;
      return m;
    }
  }
  throw ConfigError("unknown model family");
}

void ExperimentConfig::validate() const {
  if (grid.empty()) throw ConfigError("model.grid must list at least one point");
  if (methods.empty()) throw ConfigError("estimator.methods must list at least one method");
  if (reps < 1) throw ConfigError("harness.reps must be at least 1");
  if (calibration_reps < 2) throw ConfigError("calibration.reps must be at least 2 (R >= 2 required)");
  if (L < 3) throw ConfigError("estimator.L must be at least 3");
  const double t = effective_tau();
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("estimator.tau must lie in (0, 1)");
  if (ridge && !(*ridge > 0.0)) throw ConfigError("estimator.ridge must be positive");
  if (kappa && !(*kappa > 0.0)) throw ConfigError("estimator.kappa must be positive");
  if (k1 < 0.0 || k2 < 0.0) throw ConfigError("estimator.k1 and estimator.k2 must be nonnegative");
  if (py_C && !(*py_C > 0.0)) throw ConfigError("estimator.C must be positive");
  if (lwy_dT && !(*lwy_dT > 0.0 && *lwy_dT < 1.0)) throw ConfigError("estimator.dT must lie in (0, 1)");
  if (wy_dn && !(*wy_dn > 0.0)) throw ConfigError("estimator.dn must be positive");
  if (sigma2_mode == Sigma2Mode::Estimated && family != ModelKind::SpikedPopulation) {
    throw ConfigError("harness.sigma2_mode = estimated is only available for the population family");
  }
  if (family == ModelKind::AutocovFactor && gamma.size() != theta.size() && gamma.size() != 1) {
    throw ConfigError("model.gamma must have one entry or one per model.theta entry");
  }
  for (Method m : methods) {
    if (m == Method::Py && family == ModelKind::AutocovFactor) {
      throw ConfigError("estimator.methods: py needs a sample size n and does not apply to autocov");
    }
  }
  for (const auto& g : grid) {
    const ModelSpec spec = model_at(g);
    vacle::validate(spec, L);
  }
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(value);
  if (key == "model.family") {
    family = parse_model_kind(v);
  } else if (key == "model.id") {
    if (v.empty() || v.find_first_of(",\"\n") != std::string::npos) {
      bad_value(key, value, "an identifier without commas or quotes");
    }
    model_id = v;
  } else if (key == "model.spikes") {
    spikes = to_doubles(key, v);
  } else if (key == "model.alpha") {
    alpha = to_doubles(key, v);
  } else if (key == "model.noise") {
    const std::string n = lower(v);
    if (n == "identity") {
      noise = FisherNoise::Identity;
    } else if (n == "split" || n == "split12") {
      noise = FisherNoise::SplitOneTwo;
    } else {
      bad_value(key, value, "identity or split");
    }
  } else if (key == "model.theta") {
    theta = to_doubles(key, v);
  } else if (key == "model.gamma") {
    gamma = to_doubles(key, v);
  } else if (key == "model.sigma2") {
    sigma2 = to_double(key, v);
  } else if (key == "model.burn_in") {
    burn_in = to_uint(key, v);
  } else if (key == "model.grid") {
    grid.clear();
    for (const auto& token : split(v, ',')) grid.push_back(parse_grid_point(token, family));
  } else if (key == "estimator.methods") {
    methods.clear();
    for (const auto& token : split(v, ',')) methods.push_back(parse_method(token));
  } else if (key == "estimator.tau") {
    tau = to_double(key, v);
  } else if (key == "estimator.L") {
    L = to_uint(key, v);
  } else if (key == "estimator.k1") {
    k1 = to_double(key, v);
  } else if (key == "estimator.k2") {
    k2 = to_double(key, v);
  } else if (key == "estimator.kappa") {
    kappa = to_double(key, v);
  } else if (key == "estimator.vacle_ridge") {
    vacle_ridge = parse_ridge_choice(lower(v));
  } else if (key == "estimator.tvacle_ridge") {
    tvacle_ridge = parse_ridge_choice(lower(v));
  } else if (key == "estimator.ridge") {
    ridge = to_double(key, v);
  } else if (key == "estimator.C") {
    py_C = to_double(key, v);
  } else if (key == "estimator.py_start") {
    const auto s = to_uint(key, v);
    if (s > 1) bad_value(key, value, "0 or 1");
    py_start = s == 0 ? PyStart::Zero : PyStart::One;
  } else if (key == "estimator.dT") {
    lwy_dT = to_double(key, v);
  } else if (key == "estimator.dn") {
    wy_dn = to_double(key, v);
  } else if (key == "calibration.reps") {
    calibration_reps = to_uint(key, v);
  } else if (key == "calibration.seed") {
    calibration_seed = to_uint(key, v);
  } else if (key == "calibration.cache") {
    if (v.empty()) {
      cache_dir.reset();
    } else {
      cache_dir = std::filesystem::path(v);
    }
  } else if (key == "harness.reps") {
    reps = to_uint(key, v);
  } else if (key == "harness.seed") {
    seed = to_uint(key, v);
  } else if (key == "harness.threads") {
    threads = to_uint(key, v);
  } else if (key == "harness.sigma2_mode") {
    const std::string m = lower(v);
    if (m == "known") {
      sigma2_mode = Sigma2Mode::Known;
    } else if (m == "estimated") {
      sigma2_mode = Sigma2Mode::Estimated;
    } else {
      bad_value(key, value, "known or estimated");
    }
  } else if (key == "io.output") {
    output = v;
  } else if (key == "io.trace") {
    trace = to_bool(key, v);
  } else if (key == "io.timing") {
    timing = to_bool(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  static const std::vector<std::string> kSections = {"model", "estimator", "calibration", "harness", "io"};
  ExperimentConfig cfg;
  std::string section;
  std::string grid_value;
  std::string grid_where;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source_name + ":" + std::to_string(lineno) + ": ";
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError(where + "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos) {
      if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
      key = section + "." + key;
    }
    // Deferred until model.family is known.
    if (key == "model.grid") {
      grid_value = value;
      grid_where = where;
      continue;
    }
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!grid_value.empty()) {
    try {
      cfg.set("model.grid", grid_value);
    } catch (const ConfigError& e) {
      throw ConfigError(grid_where + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace vacle
