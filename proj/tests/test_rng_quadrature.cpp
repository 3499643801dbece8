#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>
#include <vector>

#include "ustat/error.hpp"
#include "ustat/quadrature.hpp"
#include "ustat/rng.hpp"

using namespace ustat;

TEST_CASE("rng streams are reproducible and seed-dependent") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    if (i == 0) CHECK(x != c());
  }
}

TEST_CASE("rng uniform and normal moments") {
  Rng rng(7);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, m = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
    const double z = rng.normal();
    m += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(s2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  CHECK(std::abs(m / n) < 0.01);
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.015));
  CHECK(m4 / n == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("uniform_open never returns the endpoints") {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("derive_seed is deterministic") {
  CHECK(derive_seed(1, "spectra", 3) == derive_seed(1, "spectra", 3));
  CHECK(derive_seed(1, "spectra", 3) != derive_seed(2, "spectra", 3));
}

TEST_CASE("derive_seed has no collisions across indices or phases") {
  constexpr std::uint64_t kDraws = 1'000'000;
  std::vector<std::uint64_t> by_index(kDraws);
  for (std::uint64_t i = 0; i < kDraws; ++i) by_index[i] = derive_seed(99, "gof-power", i);
  std::sort(by_index.begin(), by_index.end());
  CHECK(std::adjacent_find(by_index.begin(), by_index.end()) == by_index.end());

  std::vector<std::uint64_t> by_phase(kDraws);
  for (std::uint64_t i = 0; i < kDraws; ++i) by_phase[i] = derive_seed(99, "phase-" + std::to_string(i), 5);
  std::sort(by_phase.begin(), by_phase.end());
  CHECK(std::adjacent_find(by_phase.begin(), by_phase.end()) == by_phase.end());
}

TEST_CASE("adaptive simpson on smooth integrands") {
  CHECK(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-11));
  const double g = adaptive_simpson([](double x) { return std::exp(-x * x); }, -10.0, 10.0, 1e-12);
  CHECK(g == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-11));
  CHECK(adaptive_simpson([](double) { return 3.0; }, 1.0, 1.0, 1e-9) == 0.0);
}

TEST_CASE("integrate_pieces handles a jump on a breakpoint") {
  const auto step = [](double x) { return x < 0.3 ? 1.0 : 2.0; };
  const double bp[] = {0.0, 0.3, 1.0};
  CHECK(integrate_pieces(step, bp, 1e-12) == doctest::Approx(0.3 + 1.4).epsilon(1e-12));
}

TEST_CASE("quadrature errors") {
  const auto bad = [](double) { return std::nan(""); };
  CHECK_THROWS_AS(adaptive_simpson(bad, 0.0, 1.0, 1e-8), Error);
  try {
    adaptive_simpson([](double x) { return 1.0 / std::sqrt(std::abs(x - 1.0 / 3.0)); }, 0.0, 1.0, 1e-14, 12);
    FAIL("expected a convergence error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConvergence);
  }
}
