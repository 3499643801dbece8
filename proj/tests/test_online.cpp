#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ustat/chains.hpp"
#include "ustat/error.hpp"
#include "ustat/online.hpp"
#include "ustat/oracles.hpp"
#include "ustat/rng.hpp"

using namespace ustat;

namespace {

// Short-horizon parameters: b_n = 2 and c_n = 3 for n = 30.
OnlineParams small_params() {
  OnlineParams p;
  p.c = 0.1;
  p.rho = 0.1;
  return p;
}

std::vector<Hypothesis> random_hyps(std::size_t n, Rng& rng) {
  std::vector<Hypothesis> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (auto& w : h[k].w) w = 2.0 * rng.uniform() - 1.0;
    h[k].id = k;
  }
  return h;
}

// Gauss-Hermite nodes and weights for weight exp(-x^2) via Golub-Welsch.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = es.eigenvalues()(i);
    weights[i] = std::sqrt(std::numbers::pi) * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

}  // namespace

TEST_CASE("penalty formula") {
  OnlineParams p;
  OnlineIndices idx{100, 50, 0, 0.0};
  const double want = std::sqrt(7000.0 / 25.0 * std::log(64.0 * 50 * 51 / 0.05));
  CHECK(penalty(25, p, idx, 0.05) == doctest::Approx(want).epsilon(1e-14));
  CHECK(penalty(25, p, idx, 0.05) == doctest::Approx(64.8).epsilon(1e-3));
  CHECK(penalty(50, p, idx, 0.05) == doctest::Approx(want / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(penalty(1, p, idx, 0.999) > 0.0);
  CHECK_THROWS_AS(penalty(0.5, p, idx, 0.05), Error);
}

TEST_CASE("index bookkeeping and gamma") {
  const auto idx = online_indices(small_params(), 30);
  CHECK(idx.c_n == 3);
  CHECK(idx.b_n == 2);
  CHECK_THROWS_AS(online_indices(OnlineParams{}, 100), Error);
  const auto big = online_indices(OnlineParams{}, 2000);
  CHECK(big.c_n == 1000);
  CHECK(big.b_n == static_cast<std::size_t>(std::floor(2.0 / std::log(1.0 / 0.9) * std::log(2000.0))));

  OnlineParams p;
  p.epsilon = 30.0;
  OnlineIndices wide{200000, 100000, 0, 0.0};
  const double g = resolve_gamma(p, wide);
  CHECK(g == doctest::Approx(64.0 * 100001.0 * std::exp(-100000.0 * 900.0 / (128.0 * 7000.0))));
  p.epsilon = 1.0;
  CHECK_THROWS_AS(resolve_gamma(p, wide), Error);
  p.epsilon = 0.0;
  p.gamma = 1.0;
  CHECK_THROWS_AS(resolve_gamma(p, wide), Error);
}

TEST_CASE("losses") {
  const auto mis = loss_from_name("misranking");
  Hypothesis h;
  h.w = {1.0, 0.0, 0.0};
  CHECK(mis(h, 2.0, 1.0) == 0.0);
  CHECK(mis(h, 1.0, 2.0) == 0.0);
  h.w = {-1.0, 0.0, 0.0};
  CHECK(mis(h, 2.0, 1.0) == 1.0);
  CHECK(mis(h, 1.0, 1.0) == 0.0);
  const auto sig = loss_from_name("sigmoid");
  CHECK(sig(Hypothesis{}, 1.0, 2.0) == doctest::Approx(0.5));
  const auto logi = loss_from_name("logistic");
  CHECK(logi(Hypothesis{}, 1.0, 2.0) == doctest::Approx(1.0));
  h.w = {3.0, 0.0, 0.0};
  CHECK(logi(h, 2.0, 1.0) == doctest::Approx(std::log2(1.0 + std::exp(-3.0))));
  const auto sq = loss_from_name("misranking", "square");
  h.w = {1.0, 0.0, 0.0};
  CHECK(sq(h, -2.0, 1.0) == 1.0);
  CHECK_THROWS_AS(loss_from_name("hinge"), Error);
  CHECK_THROWS_AS(loss_from_name("sigmoid", "cube"), Error);
}

TEST_CASE("constant losses give constant risks") {
  Rng rng(2);
  const auto x = sample_chain(Ar1Chain{0.5, 1.0}, 30, 1).points;
  const auto hyps = random_hyps(30, rng);
  const auto idx = online_indices(small_params(), 30);
  for (double kappa : {0.0, 1.0, 0.3}) {
    PairwiseLoss c{LossKind::kConstant, "identity", kappa};
    CHECK(paired_empirical_risk(10, hyps, x, c, idx) == doctest::Approx(kappa));
    CHECK(average_paired_risk(hyps, x, c, idx) == doctest::Approx(kappa));
    CHECK(suffix_empirical_risk(5, hyps[3], x, c) == doctest::Approx(kappa));
  }
}

TEST_CASE("single-term risks") {
  Rng rng(3);
  const auto x = sample_chain(Ar1Chain{0.5, 1.0}, 30, 2).points;
  const auto hyps = random_hyps(30, rng);
  const auto idx = online_indices(small_params(), 30);
  const auto loss = loss_from_name("sigmoid");
  const std::size_t t = idx.b_n + 1;
  CHECK(paired_empirical_risk(t, hyps, x, loss, idx) == doctest::Approx(loss(hyps[1], x[t - 1], x[0])).epsilon(1e-15));
  CHECK(suffix_empirical_risk(28, hyps[5], x, loss) == doctest::Approx(loss(hyps[5], x[28], x[29])).epsilon(1e-15));
  CHECK_THROWS_AS(suffix_empirical_risk(29, hyps[5], x, loss), Error);
  CHECK_THROWS_AS(paired_empirical_risk(30, hyps, x, loss, idx), Error);
  CHECK_THROWS_AS(paired_empirical_risk(2, hyps, x, loss, idx), Error);
}

TEST_CASE("risks match naive loops") {
  Rng rng(4);
  const auto loss = loss_from_name("logistic");
  const auto x = sample_chain(ArchChain{0.6}, 25, 3).points;
  const auto hyps = random_hyps(25, rng);
  const auto idx = online_indices(small_params(), 25);
  double avg = 0.0;
  for (std::size_t t = idx.c_n; t <= 24; ++t) {
    const double m = paired_empirical_risk(t, hyps, x, loss, idx);
    CHECK(std::abs(m - oracle::paired_risk_naive(t, hyps, x, loss, idx.b_n)) < 1e-12);
    avg += m;
    if (t <= 23) CHECK(std::abs(suffix_empirical_risk(t, hyps[t], x, loss) - oracle::suffix_risk_naive(t, hyps[t], x, loss)) < 1e-12);
  }
  CHECK(average_paired_risk(hyps, x, loss, idx) == doctest::Approx(avg / (25 - idx.c_n)).epsilon(1e-14));
}

TEST_CASE("a perfect scorer has zero misranking risk") {
  const auto x = sample_chain(Ar1Chain{0.8, 1.0}, 30, 5).points;
  Hypothesis h;
  h.w = {1.0, 0.0, 0.0};
  const std::vector<Hypothesis> hyps(30, h);
  const auto idx = online_indices(small_params(), 30);
  const auto mis = loss_from_name("misranking");
  CHECK(average_paired_risk(hyps, x, mis, idx) == 0.0);
  CHECK(suffix_empirical_risk(0, h, x, mis) == 0.0);
  CHECK(true_risk(h, mis, Ar1Chain{0.8, 1.0}, 20000, 1).mean == 0.0);
}

TEST_CASE("argmin ties and shift invariance") {
  const std::vector<double> flat(6, 0.4);
  const std::vector<double> pen{5.0, 4.0, 3.0, 3.0, 2.0, 1.0};
  CHECK(argmin_penalized(flat, std::vector<double>{3.0, 3.0, 3.0, 3.0, 3.0, 3.0}) == 0);
  CHECK(argmin_penalized(std::vector<double>{1.0, 0.0, 0.0}, std::vector<double>{0.0, 1.0, 1.0}) == 0);
  CHECK(argmin_penalized(std::vector<double>{0.0, 0.0, 1.0, 0.0, 2.0, 3.0}, pen) == 3);

  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 30;
    std::vector<double> r(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = std::floor(rng.uniform() * 4.0) / 4.0;  // frequent ties
      p[i] = std::floor(rng.uniform() * 4.0) / 4.0;
    }
    const auto pick = argmin_penalized(r, p);
    CHECK(pick == oracle::argmin_naive(r, p));
    auto shifted = r;
    for (auto& v : shifted) v += 0.5;
    CHECK(argmin_penalized(shifted, p) == pick);
  }
}

TEST_CASE("selection with flat suffix risks picks the smallest t") {
  const auto x = sample_chain(Ar1Chain{0.8, 1.0}, 30, 7).points;
  const std::vector<Hypothesis> zeros(30);
  const auto trace = build_risk_trace(zeros, x, loss_from_name("sigmoid"), small_params());
  CHECK(trace.selected_t == trace.idx.c_n);
  CHECK(std::isnan(trace.suffix_risk.back()));
  CHECK(trace.t.back() == 29);
  for (std::size_t i = 1; i < trace.penalty.size(); ++i) CHECK(trace.penalty[i] > trace.penalty[i - 1]);
  CHECK(trace.m_avg == doctest::Approx(0.5));
}

TEST_CASE("dominant zero suffix risk is selected without penalty") {
  Rng rng(8);
  const auto x = sample_chain(Ar1Chain{0.8, 1.0}, 30, 8).points;
  auto hyps = random_hyps(30, rng);
  auto trace = build_risk_trace(hyps, x, loss_from_name("sigmoid"), small_params());
  std::fill(trace.suffix_risk.begin(), trace.suffix_risk.end() - 1, 0.9);
  trace.suffix_risk[7] = 0.0;
  CHECK(select_t(trace, 0.0) == trace.t[7]);
}

TEST_CASE("zero-step learner emits the zero scorer") {
  const auto x = sample_chain(Ar1Chain{0.8, 1.0}, 50, 9).points;
  const auto hyps = reference_online_learner(x, loss_from_name("logistic"), StepSchedule{0.0, 0.5});
  REQUIRE(hyps.size() == 50);
  for (const auto& h : hyps) CHECK(h.w == std::array<double, 3>{0.0, 0.0, 0.0});
}

TEST_CASE("learner is causal") {
  const auto loss = loss_from_name("logistic");
  auto x = sample_chain(Ar1Chain{0.8, 1.0}, 80, 10).points;
  const auto base = reference_online_learner(x, loss, StepSchedule{});
  const std::size_t cut = 40;
  Rng rng(11);
  for (std::size_t i = cut; i < x.size(); ++i) x[i] = 5.0 * rng.normal();
  const auto changed = reference_online_learner(x, loss, StepSchedule{});
  for (std::size_t k = 0; k <= cut; ++k) CHECK(changed[k].w == base[k].w);
  CHECK(changed.back().w != base.back().w);
}

TEST_CASE("training error falls on a separable stream") {
  const auto loss = loss_from_name("logistic");
  const auto mis = loss_from_name("misranking");
  const auto x = sample_chain(Ar1Chain{0.8, 1.0}, 400, 12).points;
  const auto hyps = reference_online_learner(x, loss, StepSchedule{});
  const auto err = [&](const Hypothesis& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t k = 0; k < 100; ++k) s += mis(h, x[i], x[k]);
    return s / 10000.0;
  };
  const double early = err(hyps[3]);
  const double late = err(hyps[399]);
  CHECK(late < early);
  CHECK(late < 0.1);
}

TEST_CASE("learner rejects exploding steps") {
  std::vector<double> x(50);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 ? 1.0 : -1.0) * (10.0 + i);
  CHECK_THROWS_AS(reference_online_learner(x, loss_from_name("logistic"), StepSchedule{1e9, 0.0}), Error);
}

TEST_CASE("true risk of a linear scorer against Gauss-Hermite quadrature") {
  const double s2 = 1.0 / 0.36;
  Hypothesis h;
  h.w = {0.3, -0.2, 0.8};
  const auto loss = loss_from_name("logistic");
  // Rotate to u = (a - b) / sqrt 2, v = (a + b) / sqrt 2, independent N(0, s2):
  // Gauss-Hermite in v, composite Simpson in u > 0 with both signs folded in.
  std::vector<double> z, w;
  gauss_hermite(80, z, w);
  const auto l = [&](double a, double b) {
    const double y = a > b ? 1.0 : -1.0;
    const double score = 0.3 * (a - b) - 0.2 * (a * a - b * b) + 0.8 * (std::sin(a) - std::sin(b));
    return std::min(1.0, std::log2(1.0 + std::exp(-y * score)));
  };
  const double sd = std::sqrt(s2);
  const int panels = 4000;
  const double umax = 12.0 * sd, hu = umax / panels;
  double want = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = std::sqrt(2.0 * s2) * z[i];
    double inner = 0.0;
    for (int k = 0; k <= panels; ++k) {
      const double u = k * hu;
      const double a = (v + u) / std::sqrt(2.0), b = (v - u) / std::sqrt(2.0);
      const double dens = std::exp(-u * u / (2.0 * s2)) / std::sqrt(2.0 * std::numbers::pi * s2);
      const double c = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      inner += c * dens * (k == 0 ? 2.0 : l(a, b) + l(b, a));
    }
    want += w[i] * inner * hu / 3.0;
  }
  want /= std::sqrt(std::numbers::pi);
  const auto est = true_risk(h, loss, Ar1Chain{0.8, 1.0}, 200000, 13);
  CHECK(std::abs(est.mean - want) < 3.0 * est.std_error);
  CHECK(est.reps == 200000);

  PairwiseLoss c{LossKind::kConstant, "identity", 0.25};
  CHECK(true_risk(h, c, Ar1Chain{0.8, 1.0}, 1000, 1).mean == doctest::Approx(0.25));
}

TEST_CASE("true risks do not depend on the worker count") {
  Rng rng(14);
  const auto hyps = random_hyps(5, rng);
  const auto loss = loss_from_name("sigmoid");
  const auto a = true_risks(hyps, loss, ArchChain{0.8}, 5000, 3, 1);
  const auto b = true_risks(hyps, loss, ArchChain{0.8}, 5000, 3, 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].mean == b[i].mean);
}
