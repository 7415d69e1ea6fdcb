#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "test_support.hpp"
#include "vacle/error.hpp"
#include "vacle/rmt.hpp"
#include "vacle/spectra.hpp"

using namespace vacle;
using test_support::TabulatedCdf;

namespace {

// Kolmogorov-Smirnov distance between the empirical law of `values` and cdf.
template <class Cdf>
double ks_distance(std::vector<double> values, Cdf cdf) {
  std::sort(values.begin(), values.end());
  const double m = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max({d, std::abs(f - i / m), std::abs(f - (i + 1) / m)});
  }
  return d;
}

std::vector<double> bulk(const Spectrum& s, std::size_t skip) {
  return {s.values().begin() + static_cast<std::ptrdiff_t>(skip), s.values().end()};
}

}  // namespace

TEST_SUITE("spectra") {

TEST_CASE("spectrum sorts and validates") {
  Spectrum s({1.0, 3.0, 2.0}, {3, 10, {}}, 1);
  CHECK(s[0] == 3.0);
  CHECK(s[2] == 1.0);
  CHECK(s.provenance() == Provenance::Simulated);
  CHECK_THROWS_AS(Spectrum({}, {0, 0, {}}, 1), ConfigError);
  CHECK_THROWS_AS(Spectrum({1.0, NAN}, {2, 1, {}}, 1), ConfigError);
  CHECK_THROWS_AS(Spectrum({1.0, 2.0}, {2, 1, {}}, 3), ConfigError);
}

TEST_CASE("normalizer and scaling") {
  Spectrum a({4.0, 2.0, 1.0}, {3, 5, {}}, 1);
  Spectrum b({4.0, 2.0, 1.0}, {3, 0, 5}, 2);
  CHECK(a.normalizer(3.0) == 3.0);
  CHECK(b.normalizer(3.0) == 9.0);
  const auto s = a.scaled(2.0);
  CHECK(s[0] == 8.0);
  CHECK(s.hash() != a.hash());
  CHECK(a.hash() == Spectrum({1.0, 4.0, 2.0}, {3, 5, {}}, 1).hash());
}

TEST_CASE("ingest sorts, clamps tiny negatives and skips comments") {
  IngestOptions o;
  auto s = parse_spectrum("3\n1\n2\n", o);
  CHECK(s.size() == 3);
  CHECK(s[0] == 3.0);
  CHECK(s[2] == 1.0);
  CHECK(s.provenance() == Provenance::Ingested);
  CHECK(s.p() == 3);
  s = parse_spectrum("# header\n\n5\n-1e-15\n2\n", o);
  CHECK(s[2] == 0.0);
  CHECK_FALSE(std::signbit(s[2]));
}

TEST_CASE("ingest errors name the line") {
  IngestOptions o;
  try {
    parse_spectrum("1\n2\nabc\n4\n", o, "eig.txt");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("eig.txt:3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_spectrum("1\n2\n", o), IoError);
  CHECK_THROWS_AS(parse_spectrum("1\n2\n-0.5\n", o), IoError);
  o.expected_p = 4;
  CHECK_THROWS_AS(parse_spectrum("1\n2\n3\n", o), IoError);
}

TEST_CASE("ingest a CSV column from disk") {
  const auto path = std::filesystem::temp_directory_path() / "vacle_ingest_test.csv";
  {
    std::ofstream f(path);
    f << "index,eigenvalue\n0,0.5\n1,7.25\n2,1.5\n3,2\n";
  }
  IngestOptions o;
  o.column = "eigenvalue";
  o.T = 100;
  o.scale_power = 2;
  const auto s = ingest_spectrum(path, o);
  CHECK(s.size() == 4);
  CHECK(s[0] == 7.25);
  CHECK(s.scale_power() == 2);
  o.column = "missing";
  CHECK_THROWS_AS(ingest_spectrum(path, o), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(ingest_spectrum(path, IngestOptions{}), IoError);
}

TEST_CASE("simulation is deterministic in the seed") {
  const PopulationModel m{{10.0, 5.0}, 1.0, 40, 80};
  Rng r1(11), r2(11), r3(12);
  const auto a = simulate_population(m, r1);
  const auto b = simulate_population(m, r2);
  const auto c = simulate_population(m, r3);
  CHECK(a.hash() == b.hash());
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK(a.hash() != c.hash());
}

TEST_CASE("population top eigenvalue tracks the spike map") {
  const PopulationModel m{{259.72, 17.97, 11.04, 7.88, 4.82}, 1.0, 50, 200};
  Rng rng(3);
  const auto s = simulate_population(m, rng);
  CHECK(s.size() == 50);
  const double want = rmt::pop_spike_map(259.72, 0.25, 1.0);
  CHECK(std::abs(s[0] / want - 1.0) < 0.25);
  double mean = 0.0;
  for (std::uint64_t k = 0; k < 40; ++k) {
    Rng r(100 + k);
    mean += simulate_population(m, r)[0] / 40.0;
  }
  CHECK(std::abs(mean / want - 1.0) < 0.05);
}

TEST_CASE("pure-noise population spectrum follows Marcenko-Pastur") {
  const PopulationModel m{{}, 1.0, 400, 400};
  Rng rng(5);
  const auto s = simulate_population(m, rng);
  CHECK(std::abs(s[0] / 4.0 - 1.0) < 0.1);
  const auto law = rmt::MpLaw::make(1.0);
  const TabulatedCdf cdf([&](double x) { return rmt::mp_density(x, law); }, law.lower_edge(),
                        law.upper_edge(), law.atom());
  CHECK(std::abs(cdf(1.0) - rmt::mp_cdf(1.0, law)) < 1e-6);
  CHECK(ks_distance(bulk(s, 5), cdf) <= 0.05);
}

TEST_CASE("fisher spectrum") {
  FisherModel pure{{}, FisherNoise::Identity, 1.0, 200, 400, 1000};
  Rng rng(9);
  const auto s = simulate_fisher(pure, rng);
  const auto law = rmt::FisherLaw::make(0.5, 0.2);
  CHECK(std::abs(s[0] / law.upper_edge() - 1.0) < 0.1);
  CHECK(s[s.size() - 1] > 0.0);

  FisherModel big{{}, FisherNoise::Identity, 1.0, 400, 800, 2000};
  Rng r2(10);
  const auto sb = simulate_fisher(big, r2);
  const auto lb = rmt::FisherLaw::make(0.5, 0.2);
  const TabulatedCdf fcdf([&](double x) { return rmt::fisher_density(x, lb); }, lb.lower_edge(),
                         lb.upper_edge(), lb.atom());
  CHECK(std::abs(fcdf(1.0) - rmt::fisher_cdf(1.0, lb)) < 1e-6);
  CHECK(ks_distance(bulk(sb, 5), fcdf) <= 0.05);

  FisherModel m{{10.0, 5.0, 5.0}, FisherNoise::SplitOneTwo, 1.0, 50, 250, 100};
  const auto spikes = m.spikes();
  REQUIRE(spikes.size() == 3);
  CHECK(spikes[0] == doctest::Approx(11.0));
  CHECK(spikes[1] == doctest::Approx(6.0));
  CHECK(spikes[2] == doctest::Approx(6.0));
}

TEST_CASE("fisher spikes approach their images") {
  const auto fl = rmt::FisherLaw::make(0.2, 0.5);
  const double top = rmt::fisher_spike_map(11.0, fl);
  const double pair = rmt::fisher_spike_map(6.0, fl);
  for (std::size_t p : {50, 250}) {
    FisherModel m{{10.0, 5.0, 5.0}, FisherNoise::SplitOneTwo, 1.0, p, 5 * p, 2 * p};
    const int reps = p == 50 ? 30 : 8;
    double mean[3] = {0, 0, 0};
    for (int k = 0; k < reps; ++k) {
      Rng r(200 + static_cast<std::uint64_t>(k));
      const auto t = simulate_fisher(m, r);
      for (int i = 0; i < 3; ++i) mean[i] += t[i] / reps;
    }
    INFO("p = " << p);
    CHECK(std::abs((mean[1] + mean[2]) / 2.0 / pair - 1.0) < (p == 50 ? 0.1 : 0.05));
    if (p == 250) {
      CHECK(std::abs(mean[0] / top - 1.0) < 0.05);
      CHECK(mean[2] > fl.upper_edge());
    } else {
      CHECK(mean[0] > top);
    }
  }
}

TEST_CASE("fisher loadings follow the paired pattern") {
  FisherModel m{{10.0, 5.0, 5.0}, FisherNoise::SplitOneTwo, 1.0, 6, 20, 20};
  const Eigen::MatrixXd A = m.loadings();
  REQUIRE(A.rows() == 6);
  REQUIRE(A.cols() == 3);
  CHECK(A(0, 0) == doctest::Approx(std::sqrt(10.0)));
  CHECK(A(1, 1) == doctest::Approx(std::sqrt(2.5)));
  CHECK(A(2, 1) == doctest::Approx(std::sqrt(2.5)));
  CHECK(A(1, 2) == doctest::Approx(std::sqrt(2.5)));
  CHECK(A(2, 2) == doctest::Approx(-std::sqrt(2.5)));
  const auto d = m.noise_diagonal();
  CHECK(d == std::vector<double>{1, 1, 1, 2, 2, 2});
}

TEST_CASE("generalized eigenvalues agree with the dense product") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const int p = 2 + trial;
    Eigen::MatrixXd X(p, 3 * p), Y(p, 4 * p);
    for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.gaussian();
    for (int i = 0; i < Y.size(); ++i) Y.data()[i] = rng.gaussian();
    const Eigen::MatrixXd s1 = X * X.transpose() / X.cols();
    const Eigen::MatrixXd s2 = Y * Y.transpose() / Y.cols();
    const auto got = generalized_eigenvalues(s1, s2);
    Eigen::VectorXd dense = (s1 * s2.inverse()).eigenvalues().real();
    std::vector<double> want(dense.data(), dense.data() + p);
    std::sort(want.rbegin(), want.rend());
    for (int i = 0; i < p; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10 * (1.0 + want[0]));
  }
  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(3, 3);
  singular(0, 0) = 1.0;
  CHECK_THROWS_AS(generalized_eigenvalues(Eigen::MatrixXd::Identity(3, 3), singular),
                  NumericalError);
}

TEST_CASE("auto-covariance eigenvalues are squared singular values") {
  const AutocovModel m{{0.6, -0.5}, {2.0, 2.0}, 1.0, 30, 60, 200};
  Rng r1(4), r2(4);
  const auto s = simulate_autocov(m, r1);
  const Eigen::MatrixXd sy = sample_autocovariance(m, r2);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sy);
  const auto sv = svd.singularValues();
  for (int i = 0; i < 30; ++i) CHECK(std::abs(s[i] - sv[i] * sv[i]) < 1e-10 * (1.0 + s[0]));
}

TEST_CASE("auto-covariance noise edge and factor limits") {
  const AutocovModel noise{{}, {}, 1.0, 400, 800, 1000};
  Rng rng(6);
  const auto s = simulate_autocov(noise, rng);
  const auto law = rmt::AutocovLaw::make(0.5);
  CHECK(std::abs(s[0] / law.upper_edge() - 1.0) < 0.1);
  const TabulatedCdf acdf([&](double x) { return rmt::autocov_lsd_density(x, law); },
                         law.lower_edge(), law.upper_edge(), law.atom(), 4000);
  CHECK(std::abs(acdf(1.0) - rmt::autocov_cdf(1.0, law)) < 1e-4);
  CHECK(ks_distance(bulk(s, 5), acdf) <= 0.05);

  const AutocovModel one{{0.6}, {2.0}, 1.0, 500, 1000, 1000};
  double one_top = 0.0;
  for (std::uint64_t k = 0; k < 8; ++k) {
    Rng r1(60 + k);
    one_top += simulate_autocov(one, r1)[0] / 8.0;
  }
  CHECK(std::abs(one_top / 7.726 - 1.0) < 0.05);

  const double want[3] = {7.726, 5.496, 3.613};
  const AutocovModel m{{0.6, -0.5, 0.3}, {2.0, 2.0, 2.0}, 1.0, 500, 1000, 1000};
  double mean[3] = {0, 0, 0};
  for (std::uint64_t k = 0; k < 4; ++k) {
    Rng r2(8 + k);
    const auto f = simulate_autocov(m, r2);
    for (int i = 0; i < 3; ++i) mean[i] += f[i] / 4.0;
  }
  CHECK(std::abs(mean[0] / want[0] - 1.0) < 0.1);
  CHECK(std::abs(mean[1] / want[1] - 1.0) < 0.05);
  CHECK(std::abs(mean[2] / want[2] - 1.0) < 0.05);

  // Cross-factor lag-1 terms inflate the top eigenvalue at finite T.
  const AutocovModel big{{0.6, -0.5, 0.3}, {2.0, 2.0, 2.0}, 1.0, 1000, 2000, 1000};
  double big_top = 0.0;
  for (std::uint64_t k = 0; k < 2; ++k) {
    Rng r3(40 + k);
    big_top += simulate_autocov(big, r3)[0] / 2.0;
  }
  CHECK(std::abs(big_top - want[0]) < std::abs(mean[0] - want[0]));
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(validate(ModelSpec{PopulationModel{{5.0}, 1.0, 10, 1}}), ConfigError);
  CHECK_THROWS_AS(validate(ModelSpec{PopulationModel{{0.5}, 1.0, 10, 20}}), ConfigError);
  CHECK_THROWS_AS(validate(ModelSpec{PopulationModel{{4.0, 5.0}, 1.0, 10, 20}}), ConfigError);
  CHECK_THROWS_AS(validate(ModelSpec{FisherModel{{10.0}, FisherNoise::Identity, 1.0, 50, 100, 40}}),
                  ConfigError);
  CHECK_THROWS_AS(validate(ModelSpec{AutocovModel{{1.0}, {1.0}, 1.0, 10, 20, 10}}), ConfigError);
  CHECK_THROWS_AS(validate(ModelSpec{AutocovModel{{0.5}, {1.0}, 1.0, 10, 2, 10}}), ConfigError);
  CHECK_THROWS_AS(validate(ModelSpec{PopulationModel{{5.0}, 1.0, 10, 20}}, 20), ConfigError);
  CHECK_NOTHROW(validate(ModelSpec{PopulationModel{{5.0}, 1.0, 30, 20}}, 20));
}

TEST_CASE("identifiable order") {
  CHECK(identifiable_order(ModelSpec{PopulationModel{{5, 4, 3, 3}, 1.0, 400, 400}}) == 4);
  CHECK(identifiable_order(ModelSpec{PopulationModel{{5, 4, 3, 3}, 1.0, 400, 100}}) == 2);
  CHECK(identifiable_order(ModelSpec{AutocovModel{{0.6, -0.5, 0.3}, {2, 2, 2}, 1.0, 300, 600, 100}}) == 3);
  CHECK(identifiable_order(
            ModelSpec{FisherModel{{10, 5, 5}, FisherNoise::SplitOneTwo, 1.0, 250, 1250, 500}}) == 3);
}

}
