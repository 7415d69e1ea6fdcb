#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "vacle/error.hpp"
#include "vacle/harness.hpp"

using namespace vacle;

namespace {

ExperimentConfig small_population() {
  auto cfg = parse_config(R"(
[model]
family = population
id = small
spikes = 10, 6, 4
grid = 40x80, 60x60
[estimator]
methods = vacle, tvacle, py, lwy, wy
[calibration]
reps = 40
[harness]
reps = 24
seed = 5
)");
  return cfg;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("aggregate metrics") {
  const auto r = aggregate({3, 3, 2, 4, 3, 25}, 3, 30);
  CHECK(r.reps == 6);
  CHECK(r.mean == doctest::Approx(40.0 / 6.0));
  CHECK(r.mse == doctest::Approx((0 + 0 + 1 + 1 + 0 + 484) / 6.0));
  CHECK(r.misest_rate == doctest::Approx(0.5));
  CHECK(r.exact_rate() == doctest::Approx(0.5));
  REQUIRE(r.counts.size() == 31);
  CHECK(r.counts[3] == 3);
  const auto d = r.csv_distribution();
  REQUIRE(d.size() == kCsvBuckets + 1);
  CHECK(d[3] == doctest::Approx(0.5));
  CHECK(d[kCsvBuckets] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("empty aggregate and header-only CSV") {
  const auto r = aggregate({}, 3, 20);
  CHECK(r.reps == 0);
  const std::string csv = summarize({});
  CHECK(csv == csv_header() + "\n");
  CHECK(lines(csv) == 1);
  CHECK(csv.rfind("model_id,p,n,T,estimator,R,mean,mse,misest_rate,d0,", 0) == 0);
  CHECK(csv.find("d19,d_ge_20,seed,runtime_s\n") != std::string::npos);
}

TEST_CASE("experiment reports are paired and consistent") {
  const auto cfg = small_population();
  const auto reps = run_experiment(cfg);
  REQUIRE(reps.size() == 10);
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t m = 0; m < 5; ++m) {
      const auto& r = reps[g * 5 + m];
      CHECK(r.method == cfg.methods[m]);
      CHECK(r.size == cfg.grid[g]);
      CHECK(r.spectrum_hashes == reps[g * 5].spectrum_hashes);
      CHECK(r.reps == 24);
      CHECK_FALSE(r.partial);
      CHECK(r.runtime_s == 0.0);

      const auto d = r.csv_distribution();
      CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0) - 1.0) < 1e-12);
      double mean = 0.0, mse = 0.0;
      for (std::size_t k = 0; k < r.counts.size(); ++k) {
        const double w = static_cast<double>(r.counts[k]) / r.reps;
        mean += w * k;
        mse += w * (k - double(r.true_q)) * (k - double(r.true_q));
      }
      CHECK(std::abs(mean - r.mean) < 1e-10);
      CHECK(std::abs(mse - r.mse) < 1e-10);
      CHECK(r.mse >= (r.mean - r.true_q) * (r.mean - r.true_q) - 1e-12);
    }
  }
  CHECK(reps[0].spectrum_hashes != reps[5].spectrum_hashes);
  const std::string csv = summarize(reps);
  CHECK(lines(csv) == 11);
  CHECK(csv.find("\nsmall,40,80,,vacle,24,") != std::string::npos);
}

TEST_CASE("results do not depend on the thread count") {
  auto cfg = small_population();
  cfg.threads = 1;
  const auto a = reports_to_json(run_experiment(cfg));
  cfg.threads = 4;
  const auto b = reports_to_json(run_experiment(cfg));
  CHECK(a == b);
}

TEST_CASE("a single replication is reproducible") {
  auto cfg = small_population();
  cfg.reps = 1;
  cfg.trace = true;
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  CHECK(reports_to_json(a) == reports_to_json(b));
  CHECK(summarize(a) == summarize(b));
  CHECK(a[0].traces.size() == 1);
  CHECK(a[2].traces.empty());
  cfg.seed = 6;
  CHECK(run_experiment(cfg)[0].spectrum_hashes != a[0].spectrum_hashes);
}

TEST_CASE("json round trip") {
  auto cfg = small_population();
  cfg.reps = 3;
  cfg.trace = true;
  const auto reps = run_experiment(cfg);
  const auto j = reports_to_json(reps);
  const auto back = reports_from_json(nlohmann::json::parse(j.dump()));
  CHECK(reports_to_json(back) == j);
  CHECK(summarize(back) == summarize(reps));
}

TEST_CASE("estimated sigma2 is reported") {
  auto cfg = small_population();
  cfg.sigma2_mode = Sigma2Mode::Estimated;
  cfg.set("estimator.methods", "vacle");
  const auto reps = run_experiment(cfg);
  REQUIRE(reps[0].sigma2_mean.has_value());
  CHECK(std::abs(*reps[0].sigma2_mean - 1.0) < 0.2);
  CHECK(*reps[0].sigma2_mse >= 0.0);
}

TEST_CASE("a failing replication marks the grid point partial") {
  auto cfg = parse_config(R"(
[model]
family = population
spikes = 1.5e308
sigma2 = 1e308
grid = 30x60
[estimator]
methods = lwy
dT = 0.1
[harness]
reps = 8
)");
  const auto reps = run_experiment(cfg);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].partial);
  CHECK(reps[0].reps == 0);
  CHECK(reps[0].diagnostic.find("replication 0") != std::string::npos);
}

TEST_CASE("fixed tuning bypasses calibration") {
  auto cfg = small_population();
  cfg.ridge = 0.2;
  cfg.lwy_dT = 0.1;
  CHECK_FALSE(needs_calibration(cfg));
  const auto p = resolve_params(cfg, cfg.grid[0], nullptr);
  CHECK(p.vacle_ridge == 0.2);
  CHECK(p.tvacle_ridge == 0.2);
  CHECK(p.py_C == doctest::Approx(5.5226 + (6.3424 - 5.5226) * std::log(0.5 / 0.25) / std::log(4.0)));
  CHECK(p.transform.edge == doctest::Approx(std::pow(1.0 + std::sqrt(0.5), 2)));
  cfg.ridge.reset();
  CHECK(needs_calibration(cfg));
  CHECK_THROWS(resolve_params(cfg, cfg.grid[0], nullptr));
}

}
