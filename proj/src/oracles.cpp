#include "ustat/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "ustat/error.hpp"

namespace ustat::oracle {

namespace {

std::pair<std::vector<double>, std::vector<double>> padded(std::span<const double> x,
                                                           std::span<const double> y) {
  // A finite-support permutation can send every entry of one sequence to a
  // zero of the other, so nx + ny slots cover all of them.
  const std::size_t len = x.size() + y.size();
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(y.begin(), y.end());
  a.resize(len, 0.0);
  b.resize(len, 0.0);
  return {a, b};
}

double basis_kernel(const ModelIndex& m, double x, double y) {
  const double d = static_cast<double>(m.dim);
  if (m.family == 1 || m.family == 2) {
    // Sum over k of sqrt(D) 1[k/D, (k+1)/D)(x) * sqrt(D) 1[...](y).
    return std::floor(x * d) == std::floor(y * d) ? d : 0.0;
  }
  double sum = 1.0;
  for (std::uint64_t j = 1; j <= m.dim; ++j) {
    const double p = static_cast<double>((j + 1) / 2);
    const double ax = 2.0 * std::numbers::pi * p * x;
    const double ay = 2.0 * std::numbers::pi * p * y;
    if (j % 2 == 1) {
      sum += 2.0 * std::cos(ax) * std::cos(ay);
    } else {
      sum += 2.0 * std::sin(ax) * std::sin(ay);
    }
  }
  return sum;
}

// Number of eigenvalues of the tridiagonal (diag, off) strictly below x.
std::size_t sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x) {
  std::size_t count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double e2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    q = diag[i] - x - (i == 0 ? 0.0 : e2 / q);
    if (q == 0.0) q = -std::numeric_limits<double>::epsilon() * (std::abs(x) + 1.0);
    if (q < 0.0) ++count;
  }
  return count;
}

}  // namespace

double delta2_permutations(std::span<const double> x, std::span<const double> y) {
  // Enumerate every partial injection x -> y; unmatched entries meet a zero.
  std::vector<char> used(y.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  auto visit = [&](auto&& self, std::size_t i, double acc) -> void {
    if (acc >= best) return;
    if (i == x.size()) {
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (!used[j]) acc += y[j] * y[j];
      }
      best = std::min(best, acc);
      return;
    }
    self(self, i + 1, acc + x[i] * x[i]);
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (used[j]) continue;
      used[j] = 1;
      self(self, i + 1, acc + (x[i] - y[j]) * (x[i] - y[j]));
      used[j] = 0;
    }
  };
  visit(visit, 0, 0.0);
  return std::sqrt(best);
}

double assignment_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return 0.0;
  // Potentials formulation, 1-based with column 0 as a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
  return total;
}

double delta2_assignment(std::span<const double> x, std::span<const double> y) {
  auto [a, b] = padded(x, y);
  std::vector<std::vector<double>> cost(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) cost[i][j] = (a[i] - b[j]) * (a[i] - b[j]);
  }
  return std::sqrt(assignment_cost(cost));
}

double theta_hat_naive(const ModelIndex& m, std::span<const double> sample) {
  const std::size_t n = sample.size();
  require(n >= 2, "theta_hat_naive: need two points");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) sum += basis_kernel(m, sample[i], sample[j]);
    }
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

std::vector<double> sturm_eigenvalues(const Eigen::MatrixXd& input) {
  const Eigen::Index n = input.rows();
  require(n == input.cols(), "sturm_eigenvalues: matrix must be square");
  Eigen::MatrixXd a = input;
  // Householder reduction to tridiagonal form.
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    Eigen::VectorXd x = a.col(k).tail(n - k - 1);
    const double alpha = -std::copysign(x.norm(), x(0));
    if (alpha == 0.0) continue;
    Eigen::VectorXd v = x;
    v(0) -= alpha;
    const double vn = v.squaredNorm();
    if (vn == 0.0) continue;
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n - k - 1, n - k - 1) - 2.0 * v * v.transpose() / vn;
    a.block(k + 1, k, n - k - 1, n - k) = h * a.block(k + 1, k, n - k - 1, n - k);
    a.block(k, k + 1, n - k, n - k - 1) = a.block(k, k + 1, n - k, n - k - 1) * h;
  }
  std::vector<double> diag(n), off(n > 0 ? n - 1 : 0);
  for (Eigen::Index i = 0; i < n; ++i) diag[i] = a(i, i);
  for (Eigen::Index i = 0; i + 1 < n; ++i) off[i] = a(i + 1, i);
  // Gershgorin interval.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  std::vector<double> out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double a0 = lo;
    double b0 = hi;
    for (int it = 0; it < 200 && b0 - a0 > 1e-15 * std::max(1.0, std::abs(a0) + std::abs(b0)); ++it) {
      const double mid = 0.5 * (a0 + b0);
      if (sturm_count(diag, off, mid) > static_cast<std::size_t>(k)) {
        b0 = mid;
      } else {
        a0 = mid;
      }
    }
    out[k] = 0.5 * (a0 + b0);
  }
  return out;
}

double paired_risk_naive(std::size_t t, std::span<const Hypothesis> hyps, std::span<const double> x,
                         const PairwiseLoss& loss, std::size_t b_n) {
  const std::size_t k = t - b_n;
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += loss(hyps[k], x[t - 1], x[i]);
  return sum / static_cast<double>(k);
}

double suffix_risk_naive(std::size_t t, const Hypothesis& h, std::span<const double> x,
                         const PairwiseLoss& loss) {
  const std::size_t n = x.size();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = t; i < n; ++i) {
    for (std::size_t k = t; k < n; ++k) {
      if (i == k) continue;
      sum += loss(h, x[i], x[k]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::size_t argmin_naive(std::span<const double> risk, std::span<const double> penalty) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < risk.size(); ++i) best = std::min(best, risk[i] + penalty[i]);
  for (std::size_t i = 0; i < risk.size(); ++i) {
    if (risk[i] + penalty[i] == best) return i;
  }
  return risk.size();
}

}  // namespace ustat::oracle
