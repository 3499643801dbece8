#include "ustat/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "ustat/error.hpp"
#include "ustat/oracles.hpp"
#include "ustat/rng.hpp"
#include "ustat/spectral.hpp"

namespace ustat {

namespace {

class Tracker {
 public:
  Tracker(std::string name, double tol) { result_.name = std::move(name), result_.tolerance = tol; }

  void check(double got, double want, const std::string& what) {
    ++result_.checks;
    const double err = std::abs(got - want);
    if (std::isfinite(err)) result_.max_error = std::max(result_.max_error, err);
    if (!(err <= result_.tolerance) && result_.detail.empty()) {
      std::ostringstream s;
      s << std::setprecision(17) << what << ": got " << got << ", want " << want;
      result_.detail = s.str();
    }
  }

  void fail_with(const std::string& what) {
    ++result_.checks;
    if (result_.detail.empty()) result_.detail = what;
  }

  SuiteResult finish() {
    result_.passed = result_.detail.empty();
    return result_;
  }

 private:
  SuiteResult result_;
};

std::vector<double> random_values(Rng& rng, std::size_t len) {
  std::vector<double> v(len);
  for (auto& x : v) {
    // Occasional repeats and exact zeros exercise ties with the padding.
    const double u = rng.uniform();
    if (u < 0.1) {
      x = 0.0;
    } else if (u < 0.2 && !v.empty()) {
      x = v[static_cast<std::size_t>(rng.uniform() * static_cast<double>(len))];
    } else {
      x = rng.normal(0.0, 2.0);
    }
  }
  return v;
}

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

SuiteResult delta2_suite(std::uint64_t seed, const char* name, std::size_t max_len, bool assignment) {
  Tracker tr(name, 1e-10);
  for (std::size_t inst = 0; inst < 1000; ++inst) {
    Rng rng(derive_seed(seed, name, inst));
    const auto x = random_values(rng, draw_count(rng, 0, max_len));
    auto y = random_values(rng, draw_count(rng, x.empty() ? 1 : 0, max_len));
    const double fast = delta2(x, y);
    const double slow = assignment ? oracle::delta2_assignment(x, y) : oracle::delta2_permutations(x, y);
    tr.check(fast, slow, "instance " + std::to_string(inst));
  }
  return tr.finish();
}

SuiteResult theta_suite(std::uint64_t seed) {
  Tracker tr("theta-hat-naive", 1e-10);
  for (std::size_t inst = 0; inst < 500; ++inst) {
    Rng rng(derive_seed(seed, "theta-hat-naive", inst));
    ModelIndex m;
    m.family = static_cast<int>(draw_count(rng, 1, 3));
    if (m.family == 1) m.dim = draw_count(rng, 1, 20);
    if (m.family == 2) m.dim = std::uint64_t{1} << draw_count(rng, 0, 5);
    if (m.family == 3) m.dim = draw_count(rng, 0, 12);
    const std::size_t n = draw_count(rng, 2, 60);
    std::vector<double> sample(n);
    for (auto& x : sample) x = m.family == 3 ? rng.uniform() : rng.normal(0.5, 0.4);
    tr.check(theta_hat(m, sample), oracle::theta_hat_naive(m, sample),
             "instance " + std::to_string(inst) + " model " + describe(m));
  }
  return tr.finish();
}

SuiteResult online_suite(std::uint64_t seed) {
  Tracker tr("online-risks-naive", 1e-12);
  const LossKind kinds[] = {LossKind::kMisranking, LossKind::kSigmoid, LossKind::kLogistic};
  const char* labels[] = {"identity", "square", "abs"};
  std::size_t built = 0;
  for (std::size_t attempt = 0; built < 200 && attempt < 10000; ++attempt) {
    Rng rng(derive_seed(seed, "online-risks-naive", attempt));
    OnlineParams p;
    p.c = rng.uniform(0.2, 0.8);
    p.xi = rng.uniform(0.1, 1.0);
    p.rho = rng.uniform(0.01, 0.3);
    const std::size_t n = draw_count(rng, 5, 30);
    OnlineIndices idx;
    try {
      idx = online_indices(p, n);
    } catch (const Error&) {
      continue;
    }
    ++built;
    PairwiseLoss loss;
    loss.kind = kinds[draw_count(rng, 0, 2)];
    loss.label = labels[draw_count(rng, 0, 2)];
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(0.0, 1.5);
    std::vector<Hypothesis> hyps(n);
    for (std::size_t k = 0; k < n; ++k) {
      for (auto& w : hyps[k].w) w = rng.normal(0.0, 1.0);
      hyps[k].id = k;
    }
    for (std::size_t t = idx.c_n; t <= n - 1; ++t) {
      const std::string where = "attempt " + std::to_string(attempt) + " t=" + std::to_string(t);
      tr.check(paired_empirical_risk(t, hyps, x, loss, idx),
               oracle::paired_risk_naive(t, hyps, x, loss, idx.b_n), "M_t " + where);
      if (t + 2 <= n) {
        const auto& h = hyps[t - idx.b_n];
        tr.check(suffix_empirical_risk(t, h, x, loss), oracle::suffix_risk_naive(t, h, x, loss),
                 "suffix " + where);
      }
    }
  }
  if (built < 200) tr.fail_with("could not draw 200 valid online instances");
  return tr.finish();
}

SuiteResult eigen_suite(std::uint64_t seed) {
  Tracker tr("eigensolver-invariants", 1e-8);
  for (std::size_t inst = 0; inst < 100; ++inst) {
    Rng rng(derive_seed(seed, "eigensolver-invariants", inst));
    const auto n = static_cast<Eigen::Index>(draw_count(rng, 1, 64));
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
    }
    auto reference = oracle::sturm_eigenvalues(m);
    const std::string where = "instance " + std::to_string(inst) + " (" + std::to_string(n) + "x" +
                              std::to_string(n) + ")";
    for (auto method : {EigenMethod::kJacobi, EigenMethod::kTridiagonalQr}) {
      const char* label = method == EigenMethod::kJacobi ? " jacobi" : " tridiagonal-qr";
      const auto spec = symmetric_eigenvalues(m, 1e-12, method);
      double sum = 0.0;
      double sq = 0.0;
      for (double v : spec.values) {
        sum += v;
        sq += v * v;
      }
      tr.check(sum, m.trace(), where + label + " trace");
      tr.check(sq, m.squaredNorm(), where + label + " frobenius");
      auto sorted = spec.values;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        tr.check(sorted[k], reference[k], where + label + " eigenvalue " + std::to_string(k));
      }
    }
  }
  return tr.finish();
}

}  // namespace

std::vector<SuiteResult> run_selftest(std::uint64_t seed) {
  return {
      delta2_suite(seed, "delta2-permutations", 5, false),
      delta2_suite(seed, "delta2-assignment", 7, true),
      theta_suite(seed),
      online_suite(seed),
      eigen_suite(seed),
  };
}

std::string format_report(const std::vector<SuiteResult>& results) {
  std::ostringstream out;
  out << std::setprecision(3);
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " checks=" << r.checks
        << " max_error=" << r.max_error << " tol=" << r.tolerance;
    if (!r.passed) out << " first_failure=\"" << r.detail << '"';
    out << '\n';
  }
  return out.str();
}

}  // namespace ustat
