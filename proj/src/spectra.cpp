#include "vacle/spectra.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "vacle/error.hpp"
#include "vacle/rmt.hpp"

namespace vacle {

namespace {

constexpr double kNegativeClamp = 1e-12;
constexpr double kMaxConditionS2 = 1e12;

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  double* data = m.data();
  for (Eigen::Index k = 0; k < rows * cols; ++k) data[k] = rng.gaussian();
  return m;
}

std::vector<double> descending(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

// Clamp round-off negatives from PSD products.
void clamp_nonnegative(std::vector<double>& values) {
  for (double& v : values) v = std::max(v, 0.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelKind

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::SpikedPopulation:
      return "population";
    case ModelKind::SpikedFisher:
      return "fisher";
    case ModelKind::AutocovFactor:
      return "autocov";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "population" || t == "spikedpopulation" || t == "covariance") {
    return ModelKind::SpikedPopulation;
  }
  if (t == "fisher" || t == "spikedfisher") return ModelKind::SpikedFisher;
  if (t == "autocov" || t == "autocovfactor" || t == "factor") return ModelKind::AutocovFactor;
  throw ConfigError("unknown model family '" + text + "' (expected population, fisher or autocov)");
}

int scale_power_for(ModelKind kind) { return kind == ModelKind::AutocovFactor ? 2 : 1; }

// ---------------------------------------------------------------------------
// Spectrum

Spectrum::Spectrum(std::vector<double> values, SpectrumShape shape, int scale_power,
                   Provenance provenance)
    : values_(std::move(values)),
      shape_(shape),
      scale_power_(scale_power),
      provenance_(provenance) {
  if (values_.empty()) throw ConfigError("spectrum is empty");
  if (scale_power_ != 1 && scale_power_ != 2) {
    throw ConfigError("scale_power must be 1 or 2, got " + std::to_string(scale_power_));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ConfigError("spectrum contains a non-finite value");
  }
  std::sort(values_.begin(), values_.end(), std::greater<>());
  if (shape_.p == 0) shape_.p = values_.size();
  if (shape_.p != values_.size()) {
    throw ConfigError("spectrum length " + std::to_string(values_.size()) +
                      " does not match p = " + std::to_string(shape_.p));
  }
}

double Spectrum::normalizer(double sigma2) const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ConfigError("sigma2 must be positive, got " + std::to_string(sigma2));
  }
  return scale_power_ == 2 ? sigma2 * sigma2 : sigma2;
}

Spectrum Spectrum::scaled(double s) const {
  if (!(s > 0.0)) throw ConfigError("scale factor must be positive");
  std::vector<double> v(values_);
  for (double& x : v) x *= s;
  return Spectrum(std::move(v), shape_, scale_power_, provenance_);
}

std::uint64_t Spectrum::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values_) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Models

Eigen::MatrixXd FisherModel::loadings() const {
  const auto q = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), q);
  if (q == 0) return a;
  a(0, 0) = std::sqrt(alpha[0]);
  Eigen::Index row = 1;
  Eigen::Index k = 1;
  while (k < q) {
    if (k + 1 < q) {
      const double s1 = std::sqrt(alpha[k] / 2.0);
      const double s2 = std::sqrt(alpha[k + 1] / 2.0);
      a(row, k) = s1;
      a(row + 1, k) = s1;
      a(row, k + 1) = s2;
      a(row + 1, k + 1) = -s2;
      row += 2;
      k += 2;
    } else {
      a(row, k) = std::sqrt(alpha[k]);
      row += 1;
      k += 1;
    }
  }
  return a;
}

std::vector<double> FisherModel::noise_diagonal() const {
  std::vector<double> d(p, 1.0);
  if (noise == FisherNoise::SplitOneTwo) {
    for (std::size_t i = (p + 1) / 2; i < p; ++i) d[i] = 2.0;
  }
  return d;
}

std::vector<double> FisherModel::spikes() const {
  if (alpha.empty()) return {};
  const Eigen::MatrixXd a = loadings();
  const auto d = noise_diagonal();
  Eigen::VectorXd inv(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) inv(static_cast<Eigen::Index>(i)) = 1.0 / d[i];
  const Eigen::MatrixXd gram = a.transpose() * inv.asDiagonal() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  auto out = descending(solver.eigenvalues());
  for (double& v : out) v += sigma2;
  return out;
}

ModelKind kind_of(const ModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> ModelKind {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopulationModel>) return ModelKind::SpikedPopulation;
        if constexpr (std::is_same_v<M, FisherModel>) return ModelKind::SpikedFisher;
        return ModelKind::AutocovFactor;
      },
      spec);
}

SpectrumShape shape_of(const ModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> SpectrumShape {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopulationModel>) return {m.p, m.n, std::nullopt};
        else if constexpr (std::is_same_v<M, FisherModel>) return {m.p, m.n, m.T};
        else return {m.p, 0, m.T};
      },
      spec);
}

void validate(const ModelSpec& spec, std::size_t search_bound) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        need(m.sigma2 > 0.0 && std::isfinite(m.sigma2), "sigma2 must be positive");
        if constexpr (std::is_same_v<M, PopulationModel>) {
          need(m.n >= 2, "population model needs n >= 2");
          const std::size_t min_p = std::max(search_bound + 2, m.spikes.size() + 2);
          need(m.p >= min_p, "population model needs p >= " + std::to_string(min_p) +
                                 ", got p = " + std::to_string(m.p));
          need(std::is_sorted(m.spikes.begin(), m.spikes.end(), std::greater<>()),
               "spikes must be in descending order");
          for (double s : m.spikes) need(s > m.sigma2, "every spike must exceed sigma2");
        } else if constexpr (std::is_same_v<M, FisherModel>) {
          need(m.n >= 2, "Fisher model needs n >= 2");
          need(m.T > m.p, "Fisher model needs T > p so that S2 is invertible");
          need(m.p >= std::max<std::size_t>(search_bound + 2, m.alpha.size() + 2),
               "Fisher model dimension p too small for the search bound");
          for (double a : m.alpha) need(a > 0.0, "loading strengths alpha must be positive");
          if (m.noise == FisherNoise::SplitOneTwo) {
            need(m.alpha.size() <= (m.p + 1) / 2, "loadings must fit in the unit-variance block");
          }
        } else {
          need(m.T >= 3, "auto-covariance model needs T >= 3");
          need(m.theta.size() == m.gamma.size(), "theta and gamma must have the same length");
          need(m.p >= std::max<std::size_t>(search_bound + 2, m.theta.size() + 2),
               "auto-covariance model dimension p too small");
          for (double t : m.theta) need(std::abs(t) < 1.0, "VAR(1) coefficients need |theta| < 1");
          for (double g : m.gamma) need(g > 0.0, "innovation variances must be positive");
        }
      },
      spec);
}

std::size_t identifiable_order(const ModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopulationModel>) {
          const double c = static_cast<double>(m.p) / static_cast<double>(m.n);
          return rmt::pop_identifiable_count(m.spikes, c, m.sigma2);
        } else if constexpr (std::is_same_v<M, FisherModel>) {
          const auto law = rmt::FisherLaw::make(static_cast<double>(m.p) / static_cast<double>(m.n),
                                                static_cast<double>(m.p) / static_cast<double>(m.T),
                                                m.sigma2);
          const auto spikes = m.spikes();
          return rmt::fisher_identifiable_count(spikes, law);
        } else {
          const auto law =
              rmt::AutocovLaw::make(static_cast<double>(m.p) / static_cast<double>(m.T), m.sigma2);
          std::vector<rmt::FactorSignature> sigs;
          for (std::size_t i = 0; i < m.theta.size(); ++i) {
            sigs.push_back(rmt::FactorSignature::ar1(m.theta[i], m.gamma[i]));
          }
          return rmt::autocov_identifiable_count(sigs, law);
        }
      },
      spec);
}

// ---------------------------------------------------------------------------
// Linear algebra

std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return descending(solver.eigenvalues());
}

std::vector<double> generalized_eigenvalues(const Eigen::MatrixXd& s1,
                                            const Eigen::MatrixXd& s2) {
  Eigen::LLT<Eigen::MatrixXd> llt(s2);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("S2 is not positive definite");
  }
  const double rcond = llt.rcond();
  if (!(rcond > 1.0 / kMaxConditionS2)) {
    throw NumericalError("S2 is numerically singular (condition estimate " +
                         std::to_string(1.0 / rcond) + ")");
  }
  // Reduce S1 v = lambda L L^T v to the standard problem L^{-1} S1 L^{-T}.
  Eigen::MatrixXd reduced = llt.matrixL().solve(s1);
  reduced = llt.matrixL().solve(reduced.transpose()).transpose();
  reduced = 0.5 * (reduced + reduced.transpose());
  return symmetric_eigenvalues(reduced);
}

// ---------------------------------------------------------------------------
// Simulation

Spectrum simulate_population(const PopulationModel& spec, Rng& rng) {
  validate(spec);
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto n = static_cast<Eigen::Index>(spec.n);
  Eigen::MatrixXd x = gaussian_matrix(p, n, rng);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double var = i < static_cast<Eigen::Index>(spec.spikes.size())
                           ? spec.spikes[static_cast<std::size_t>(i)]
                           : spec.sigma2;
    x.row(i) *= std::sqrt(var);
  }
  const double inv_n = 1.0 / static_cast<double>(spec.n);
  std::vector<double> values;
  if (p <= n) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    s.selfadjointView<Eigen::Lower>().rankUpdate(x, inv_n);
    values = symmetric_eigenvalues(s.selfadjointView<Eigen::Lower>());
  } else {
    // Nonzero spectrum of X X^T / n equals that of X^T X / n.
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), inv_n);
    values = symmetric_eigenvalues(g.selfadjointView<Eigen::Lower>());
    values.resize(spec.p, 0.0);
  }
  clamp_nonnegative(values);
  return Spectrum(std::move(values), {spec.p, spec.n, std::nullopt}, 1, Provenance::Simulated);
}

Spectrum simulate_fisher(const FisherModel& spec, Rng& rng) {
  validate(spec);
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto t = static_cast<Eigen::Index>(spec.T);
  const auto diag = spec.noise_diagonal();
  Eigen::VectorXd sd(p);
  for (Eigen::Index i = 0; i < p; ++i) sd(i) = std::sqrt(diag[static_cast<std::size_t>(i)]);

  const Eigen::MatrixXd a = spec.loadings();
  Eigen::MatrixXd x = std::sqrt(spec.sigma2) * (sd.asDiagonal() * gaussian_matrix(p, n, rng));
  if (a.cols() > 0) x += a * gaussian_matrix(a.cols(), n, rng);
  const Eigen::MatrixXd e = sd.asDiagonal() * gaussian_matrix(p, t, rng);

  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(p, p);
  s1.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  s2.selfadjointView<Eigen::Lower>().rankUpdate(e, 1.0 / static_cast<double>(t));
  s1 = s1.selfadjointView<Eigen::Lower>();
  s2 = s2.selfadjointView<Eigen::Lower>();

  auto values = generalized_eigenvalues(s1, s2);
  clamp_nonnegative(values);
  return Spectrum(std::move(values), {spec.p, spec.n, spec.T}, 1, Provenance::Simulated);
}

Eigen::MatrixXd sample_autocovariance(const AutocovModel& spec, Rng& rng) {
  validate(spec);
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto t = static_cast<Eigen::Index>(spec.T);
  const auto q = static_cast<Eigen::Index>(spec.theta.size());

  Eigen::VectorXd state = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd innov_sd(q);
  for (Eigen::Index k = 0; k < q; ++k) innov_sd(k) = std::sqrt(spec.gamma[static_cast<std::size_t>(k)]);
  auto step = [&] {
    for (Eigen::Index k = 0; k < q; ++k) {
      state(k) = spec.theta[static_cast<std::size_t>(k)] * state(k) + innov_sd(k) * rng.gaussian();
    }
  };
  for (std::size_t b = 0; b < spec.burn_in; ++b) step();

  // T + 1 observations give exactly T lag-1 products.
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(p, t + 1);
  for (Eigen::Index col = 0; col <= t; ++col) {
    step();
    y.col(col).head(q) = state;
  }
  y += std::sqrt(spec.sigma2) * gaussian_matrix(p, t + 1, rng);

  return y.rightCols(t) * y.leftCols(t).transpose() / static_cast<double>(t);
}

Spectrum simulate_autocov(const AutocovModel& spec, Rng& rng) {
  const Eigen::MatrixXd sigma = sample_autocovariance(spec, rng);
  const auto p = sigma.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  m.selfadjointView<Eigen::Lower>().rankUpdate(sigma, 1.0);
  auto values = symmetric_eigenvalues(m.selfadjointView<Eigen::Lower>());
  clamp_nonnegative(values);
  return Spectrum(std::move(values), {spec.p, 0, spec.T}, 2, Provenance::Simulated);
}

Spectrum simulate(const ModelSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& m) -> Spectrum {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopulationModel>) return simulate_population(m, rng);
        if constexpr (std::is_same_v<M, FisherModel>) return simulate_fisher(m, rng);
        if constexpr (std::is_same_v<M, AutocovModel>) return simulate_autocov(m, rng);
      },
      spec);
}

// ---------------------------------------------------------------------------
// Ingestion

Spectrum parse_spectrum(const std::string& text, const IngestOptions& options,
                        const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  std::optional<std::size_t> column_index;
  const bool csv = !options.column.empty();

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;

    std::string field = stripped;
    if (csv) {
      const auto fields = split_csv(stripped);
      if (!column_index) {
        const auto it = std::find(fields.begin(), fields.end(), options.column);
        if (it == fields.end()) {
          throw IoError(source_name + ":" + std::to_string(line_no) + ": column '" +
                        options.column + "' not found in header");
        }
        column_index = static_cast<std::size_t>(it - fields.begin());
        continue;
      }
      if (*column_index >= fields.size()) {
        throw IoError(source_name + ":" + std::to_string(line_no) + ": missing column '" +
                      options.column + "'");
      }
      field = fields[*column_index];
    }

    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size() || !std::isfinite(v)) {
      throw IoError(source_name + ":" + std::to_string(line_no) + ": cannot parse '" + field +
                    "' as a finite number");
    }
    if (v < 0.0) {
      if (v < -kNegativeClamp) {
        throw IoError(source_name + ":" + std::to_string(line_no) + ": negative eigenvalue " +
                      field);
      }
      v = 0.0;
    }
    values.push_back(v);
  }

  if (values.size() < 3) {
    throw IoError(source_name + ": need at least 3 eigenvalues, found " +
                  std::to_string(values.size()));
  }
  if (options.expected_p && *options.expected_p != values.size()) {
    throw IoError(source_name + ": expected p = " + std::to_string(*options.expected_p) +
                  " values, found " + std::to_string(values.size()));
  }
  SpectrumShape shape{values.size(), options.n, options.T};
  return Spectrum(std::move(values), shape, options.scale_power, Provenance::Ingested);
}

Spectrum ingest_spectrum(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spectrum file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_spectrum(buffer.str(), options, path.string());
}

}  // namespace vacle
