#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "ustat/chains.hpp"
#include "ustat/error.hpp"
#include "ustat/gof.hpp"
#include "ustat/oracles.hpp"
#include "ustat/rng.hpp"

using namespace ustat;

namespace {

double normal_cdf(double x, double sigma2) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * sigma2)); }

// Gaussian overlap integral of N(m1, a) and N(m2, b).
double overlap(double m1, double a, double m2, double b) {
  return std::exp(-(m1 - m2) * (m1 - m2) / (2.0 * (a + b))) / std::sqrt(2.0 * std::numbers::pi * (a + b));
}

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid, 1.0) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ||Pi_{(1, D)} N(0, 1)||^2 = D sum_k p_k^2 with p_k the mass of [k/D, (k+1)/D).
double histogram_projection_sq(double dim) {
  double s = 0.0;
  for (int k = static_cast<int>(-12 * dim); k < static_cast<int>(12 * dim); ++k) {
    const double p = normal_cdf((k + 1) / dim, 1.0) - normal_cdf(k / dim, 1.0);
    s += p * p;
  }
  return dim * s;
}

CalibrationTable constant_table(double value, std::size_t n) {
  CalibrationTable t;
  t.u_grid = {0.05};
  t.models = default_models();
  t.thresholds.assign(t.models.size(), value);
  t.level = {0.05};
  t.n = n;
  t.reps = 100;
  return t;
}

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
  return sample_iid(DensitySpec::gaussian(0.0, 1.0), n, seed).points;
}

}  // namespace

TEST_CASE("theta_hat worked examples") {
  const std::vector<double> s{0.1, 0.2, 0.6};
  CHECK(theta_hat({1, 2}, s) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(oracle::theta_hat_naive({1, 2}, s) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(theta_hat({1, 1}, std::vector<double>{0.3, 0.4}) == doctest::Approx(1.0));
  CHECK(theta_hat({3, 0}, s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(theta_hat({2, 2}, s) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(theta_hat({1, 2}, std::vector<double>{0.1}), Error);
  CHECK_THROWS_AS(theta_hat({3, 2}, std::vector<double>{0.1, 1.5}), Error);
  CHECK_THROWS_AS(validate(ModelIndex{2, 3}), Error);
  CHECK_THROWS_AS(validate(ModelIndex{4, 1}), Error);
}

TEST_CASE("theta_hat matches the naive double sum and ignores order") {
  Rng rng(17);
  const std::vector<ModelIndex> models{{1, 1}, {1, 3}, {1, 7}, {2, 4}, {2, 8}, {3, 0}, {3, 5}};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> s(2 + trial);
    for (auto& x : s) x = rng.uniform();
    for (const auto& m : models) {
      const double fast = theta_hat(m, s);
      CHECK(std::abs(fast - oracle::theta_hat_naive(m, s)) < 1e-10);
      auto rev = s;
      std::reverse(rev.begin(), rev.end());
      CHECK(std::abs(fast - theta_hat(m, rev)) < 1e-12);
    }
  }
}

TEST_CASE("t_hat statistic on explicit inputs") {
  const auto uniform = DensitySpec::unnormalized(NamedFunction{"uniform", {}}, 0.0, 1.0);
  const std::vector<double> s(5, 0.4);
  CHECK(std::abs(t_hat_statistic({1, 1}, s, uniform)) < 1e-9);
  const auto f0 = DensitySpec::gaussian(0.0, 1.0);
  const std::vector<double> x{0.1, -0.3, 1.2, 0.25};
  double mean_f0 = 0.0;
  for (double v : x) mean_f0 += std::exp(-v * v / 2) / std::sqrt(2 * std::numbers::pi);
  mean_f0 /= 4.0;
  const double want = oracle::theta_hat_naive({1, 2}, x) + 1.0 / (2.0 * std::sqrt(std::numbers::pi)) - 2.0 * mean_f0;
  CHECK(t_hat_statistic({1, 2}, x, f0) == doctest::Approx(want).epsilon(1e-12));
  const std::vector<ModelIndex> ms{{1, 2}, {1, 5}};
  const auto both = t_hat_statistics(ms, x, f0);
  CHECK(both[1] == doctest::Approx(t_hat_statistic({1, 5}, x, f0)).epsilon(1e-14));
}

TEST_CASE("mean of T_hat under the null is minus the squared projection residual") {
  const auto f0 = DensitySpec::gaussian(0.0, 1.0);
  const double norm_sq = 1.0 / (2.0 * std::sqrt(std::numbers::pi));
  for (std::uint64_t dim : {1u, 3u}) {
    const double want = histogram_projection_sq(static_cast<double>(dim)) - norm_sq;
    CHECK(want <= 0.0);
    const int reps = 10000;
    double s = 0.0, s2 = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double t = t_hat_statistic({1, dim}, normal_sample(30, derive_seed(5, "mean", r)), f0);
      s += t;
      s2 += t * t;
    }
    const double mean = s / reps;
    const double se = std::sqrt((s2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - want) < 4.0 * se);
  }
}

TEST_CASE("histogram projections grow along nested partitions") {
  CHECK(histogram_projection_sq(1) <= histogram_projection_sq(2));
  CHECK(histogram_projection_sq(2) <= histogram_projection_sq(4));
  CHECK(histogram_projection_sq(4) <= histogram_projection_sq(8));
  CHECK(histogram_projection_sq(3) <= histogram_projection_sq(6));
  CHECK(histogram_projection_sq(64) == doctest::Approx(1.0 / (2.0 * std::sqrt(std::numbers::pi))).epsilon(1e-3));
}

TEST_CASE("upper quantile order statistic") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  CHECK(upper_quantile(v, 0.05) == 95.0);
  CHECK(upper_quantile(v, 0.5) == 50.0);
  CHECK(upper_quantile(v, 0.999) == 1.0);
}

TEST_CASE("infinite thresholds never or always reject") {
  const auto x = normal_sample(20, 1);
  CHECK_FALSE(run_test(x, constant_table(std::numeric_limits<double>::infinity(), 20)).reject);
  CHECK(run_test(x, constant_table(-std::numeric_limits<double>::infinity(), 20)).reject);
  CHECK_THROWS_AS(run_test(normal_sample(19, 1), constant_table(0.0, 20)), Error);
}

TEST_CASE("calibration produces a valid level") {
  CalibrationOptions opt;
  opt.n = 50;
  opt.reps = 2000;
  opt.u_grid_size = 25;
  opt.seed = 4;
  const auto table = calibrate(DensitySpec::gaussian(0.0, 1.0), default_models(), opt);
  CHECK(table.u_alpha() <= 0.05);
  CHECK(table.level[table.u_alpha_index] <= 0.05);
  CHECK(table.u_grid.back() == doctest::Approx(0.05));
  for (std::size_t m = 0; m < table.models.size(); ++m) {
    for (std::size_t k = 1; k < table.u_grid.size(); ++k) CHECK(table.threshold(m, k) <= table.threshold(m, k - 1));
  }
  // Level on a third, independent batch.
  const auto est = estimate_power(DensitySpec::gaussian(0.0, 1.0), table, 2000, 99);
  CHECK(est.power <= 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 2000));

  CalibrationOptions bad = opt;
  CHECK_THROWS_AS(calibrate(DensitySpec::gaussian(0.0, 1.0), {}, bad), Error);
  bad.reps = 50;
  CHECK_THROWS_AS(calibrate(DensitySpec::gaussian(0.0, 1.0), default_models(), bad), Error);
}

TEST_CASE("single-point grid either keeps alpha or fails") {
  CalibrationOptions opt;
  opt.n = 40;
  opt.reps = 1000;
  opt.u_grid = {0.05};
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    opt.seed = seed;
    try {
      const auto t = calibrate(DensitySpec::gaussian(0.0, 1.0), {{1, 4}}, opt);
      CHECK(t.u_alpha() == 0.05);
      CHECK(t.level[0] <= 0.05);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNumerical);
    }
  }
}

TEST_CASE("tables round-trip and the decision ignores model order") {
  CalibrationOptions opt;
  opt.n = 30;
  opt.reps = 500;
  opt.u_grid_size = 10;
  opt.seed = 6;
  const auto table = calibrate(DensitySpec::gaussian(0.5, 2.0), default_models(), opt);
  std::stringstream ss;
  write_table(table, ss);
  const auto back = read_table(ss);
  CHECK(back.thresholds == table.thresholds);
  CHECK(back.u_grid == table.u_grid);
  CHECK(back.level == table.level);
  CHECK(back.models == table.models);
  CHECK(back.u_alpha_index == table.u_alpha_index);
  CHECK(back.f0.describe() == table.f0.describe());

  auto reordered = table;
  std::reverse(reordered.models.begin(), reordered.models.end());
  const std::size_t nm = table.models.size(), nu = table.u_grid.size();
  for (std::size_t m = 0; m < nm; ++m) {
    for (std::size_t k = 0; k < nu; ++k) reordered.thresholds[m * nu + k] = table.threshold(nm - 1 - m, k);
  }
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto x = sample_chain(Ar1Chain{0.8, 1.0}, 30, s).points;
    const auto a = run_test(x, table);
    const auto b = run_test(x, reordered);
    CHECK(a.t_alpha == b.t_alpha);
    CHECK(a.reject == b.reject);
  }

  std::stringstream broken("ustat-calibration-table v0\n");
  CHECK_THROWS_AS(read_table(broken), Error);
  std::stringstream inf_table;
  write_table(constant_table(std::numeric_limits<double>::infinity(), 5), inf_table);
  CHECK(std::isinf(read_table(inf_table).thresholds[0]));
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
  const auto f0 = DensitySpec::gaussian(0.0, 1.0);
  const int n = 40;
  std::vector<double> q(n);
  for (int i = 0; i < n; ++i) q[i] = normal_quantile((i + 0.5) / n);
  CHECK(ks_statistic(q, f0) == doctest::Approx(0.5 / n).epsilon(1e-9));
  CHECK(ks_statistic(std::vector<double>{100.0}, f0) == doctest::Approx(1.0));

  const auto th = calibrate_ks(f0, 50, 2000, 0.05, 3);
  int rejections = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) rejections += ks_statistic(normal_sample(50, 1000 + s), f0) > th.threshold;
  CHECK(std::abs(rejections / 1000.0 - 0.05) < 0.025);
}

TEST_CASE("chi-square statistic and binning") {
  const auto uniform = DensitySpec::unnormalized(NamedFunction{"uniform", {}}, 0.0, 1.0);
  const auto bins = make_chi2_binning(uniform, 0.0, 1.0, 2);
  CHECK(chi2_statistic(std::vector<double>(10, 0.2), bins) == doctest::Approx(10.0));
  CHECK(chi2_statistic(std::vector<double>{0.2, 0.7}, bins) == doctest::Approx(0.0).epsilon(1e-12));
  std::size_t clipped = 0;
  CHECK(chi2_statistic(std::vector<double>{-3.0, 7.0}, bins, &clipped) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(clipped == 2);

  // f0 has no mass on [1, 2]: that bin is merged with a warning.
  const auto merged = make_chi2_binning(uniform, 0.0, 2.0, 4);
  CHECK_FALSE(merged.warnings.empty());
  CHECK(merged.cell_prob.size() < 4);
  double total = 0.0;
  for (double p : merged.cell_prob) total += p;
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS_AS(make_chi2_binning(uniform, 0.0, 1.0, 1), Error);
}

TEST_CASE("L2 distance between densities") {
  const auto a = DensitySpec::gaussian(0.0, 1.0);
  const auto b = DensitySpec::gaussian(0.0, 1.2);
  CHECK(l2_distance(a, a) < 1e-8);
  const double want = std::sqrt(overlap(0, 1, 0, 1) + overlap(0, 1.2, 0, 1.2) - 2.0 * overlap(0, 1, 0, 1.2));
  CHECK(l2_distance(a, b) == doctest::Approx(want).epsilon(1e-7));
  const double s2 = 1.0 / 0.36;
  const auto truth = DensitySpec::gaussian(0.0, s2);
  const auto alt = DensitySpec::gaussian(2.0, 1.5);
  const double want2 = std::sqrt(overlap(0, s2, 0, s2) + overlap(2, 1.5, 2, 1.5) - 2.0 * overlap(0, s2, 2, 1.5));
  CHECK(l2_distance(truth, alt) == doctest::Approx(want2).epsilon(1e-7));
}

TEST_CASE("power estimates are deterministic and worker independent") {
  CalibrationOptions opt;
  opt.n = 30;
  opt.reps = 400;
  opt.u_grid_size = 10;
  opt.seed = 8;
  const auto f0 = DensitySpec::gaussian(0.0, 1.0);
  const auto table = calibrate(f0, default_models(), opt);
  const DataSource alt = DensitySpec::gaussian(1.0, 1.0);
  const auto one = estimate_power(alt, table, 300, 5, 1);
  const auto four = estimate_power(alt, table, 300, 5, 4);
  CHECK(one.rejections == four.rejections);
  CHECK(one.power > 0.5);
  opt.workers = 3;
  CHECK(calibrate(f0, default_models(), opt).thresholds == table.thresholds);
}
