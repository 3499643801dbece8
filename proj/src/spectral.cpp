#include "ustat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ustat/error.hpp"

namespace ustat {

namespace {

constexpr int kMaxAutoDegree = 200;
constexpr double kNegligibleRatio = 1e-10;
constexpr double kFunkHeckeTol = 1e-11;

std::vector<double> random_point(const KernelDomain& domain, Rng& rng) {
  if (const auto* iv = std::get_if<IntervalDomain>(&domain)) return {rng.uniform(iv->a, iv->b)};
  const auto d = static_cast<std::size_t>(std::get<SphereDomain>(domain).dim);
  std::vector<double> x(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : x) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm < 1e-16);
  norm = std::sqrt(norm);
  for (auto& v : x) v /= norm;
  return x;
}

}  // namespace

void check_kernel_symmetry(const KernelSpec& kernel, std::uint64_t seed, int pairs, double tol) {
  require(static_cast<bool>(kernel.h), "kernel: missing function");
  Rng rng(seed);
  for (int i = 0; i < pairs; ++i) {
    const auto x = random_point(kernel.domain, rng);
    const auto y = random_point(kernel.domain, rng);
    const double hxy = kernel.h(x, y);
    const double hyx = kernel.h(y, x);
    if (!(std::fabs(hxy - hyx) <= tol)) {
      std::ostringstream msg;
      msg << "kernel is not symmetric: h(x,y)=" << hxy << " but h(y,x)=" << hyx;
      fail(ErrorCode::kInvalidArgument, msg.str());
    }
  }
}

KernelMatrices build_kernel_matrices(const KernelSpec& kernel, const Trajectory& traj) {
  require(static_cast<bool>(kernel.h), "kernel: missing function");
  const std::size_t n = traj.size();
  require(n >= 1, "build_kernel_matrices: empty trajectory");
  if (const auto* sd = std::get_if<SphereDomain>(&kernel.domain)) {
    require(traj.dim == static_cast<std::size_t>(sd->dim),
            "build_kernel_matrices: trajectory dimension does not match the sphere kernel");
  } else {
    require(traj.dim == 1, "build_kernel_matrices: interval kernel needs scalar states");
  }
  KernelMatrices out;
  out.n = n;
  out.h_tilde.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel.h(traj.point(i), traj.point(j));
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "kernel evaluation is not finite at pair (" << i << ", " << j << ")";
        fail(ErrorCode::kNumerical, msg.str());
      }
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      out.h_tilde(ii, jj) = v * inv_n;
      out.h_tilde(jj, ii) = v * inv_n;
    }
  }
  out.h_zero_diag = out.h_tilde;
  out.h_zero_diag.diagonal().setZero();
  return out;
}

Spectrum Spectrum::from_values(std::vector<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::kNumerical, "spectrum: non-finite eigenvalue");
  }
  std::stable_sort(values.begin(), values.end(), [](double a, double b) {
    const double fa = std::fabs(a);
    const double fb = std::fabs(b);
    return fa != fb ? fa > fb : a > b;
  });
  return Spectrum{std::move(values)};
}

EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& m, double tol, int max_sweeps) {
  require(m.rows() == m.cols(), "jacobi_eigen: matrix must be square");
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();
  auto off_norm = [&]() {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  int sweep = 0;
  double off = off_norm();
  while (off > tol * scale) {
    if (sweep == max_sweeps) {
      std::ostringstream msg;
      msg << "jacobi_eigen: no convergence after " << max_sweeps
          << " sweeps (off-diagonal norm " << off << ", target " << tol * scale << ")";
      fail(ErrorCode::kConvergence, msg.str());
    }
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    ++sweep;
    off = off_norm();
  }
  return EigenDecomposition{a.diagonal(), std::move(v), sweep};
}

Spectrum symmetric_eigenvalues(const Eigen::MatrixXd& m, double tol, EigenMethod method) {
  require(m.rows() == m.cols(), "symmetric_eigenvalues: matrix must be square");
  if (m.rows() == 0) return Spectrum{};
  if (!m.allFinite()) fail(ErrorCode::kNumerical, "symmetric_eigenvalues: matrix has non-finite entries");
  const double eff_tol = std::max(tol, 1e-12);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > eff_tol * m.norm()) {
    std::ostringstream msg;
    msg << "symmetric_eigenvalues: matrix is not symmetric (max |M - M^T| = " << asym << ")";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  if (method == EigenMethod::kAuto) {
    method = static_cast<std::size_t>(m.rows()) <= kJacobiMaxDim ? EigenMethod::kJacobi
                                                                  : EigenMethod::kTridiagonalQr;
  }
  Eigen::VectorXd values;
  if (method == EigenMethod::kJacobi) {
    values = jacobi_eigen(m, eff_tol).values;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
      fail(ErrorCode::kConvergence, "symmetric_eigenvalues: tridiagonal QR did not converge");
    }
    values = solver.eigenvalues();
  }
  return Spectrum::from_values(std::vector<double>(values.data(), values.data() + values.size()));
}

double delta2(std::span<const double> x, std::span<const double> y) {
  // Padding each side with as many zeros as the other has entries lets any
  // entry be matched to a zero; sorted matching is then optimal.
  const std::size_t len = x.size() + y.size();
  std::vector<double> xs(len, 0.0);
  std::vector<double> ys(len, 0.0);
  std::copy(x.begin(), x.end(), xs.begin());
  std::copy(y.begin(), y.end(), ys.begin());
  for (std::size_t i = 0; i < len; ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      fail(ErrorCode::kInvalidArgument, "delta2: sequences must be finite");
    }
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < len; ++i) sum += (xs[i] - ys[i]) * (xs[i] - ys[i]);
  return std::sqrt(sum);
}

double sphere_area(int dim) {
  require(dim >= 1, "sphere_area: dim must be positive");
  const double half = 0.5 * dim;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

double harmonic_multiplicity(int dim, int k) {
  require(dim >= 2 && k >= 0, "harmonic_multiplicity: need dim >= 2 and k >= 0");
  if (k == 0) return 1.0;
  // (2k + d - 2) / (k + d - 2) * C(k + d - 2, k)
  const double binom = std::round(std::exp(std::lgamma(k + dim - 1.0) - std::lgamma(k + 1.0) -
                                           std::lgamma(dim - 1.0)));
  return std::round((2.0 * k + dim - 2.0) / (k + dim - 2.0) * binom);
}

double legendre_polynomial(int dim, int k, double t) {
  require(dim >= 2 && k >= 0, "legendre_polynomial: need dim >= 2 and k >= 0");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = t;
  for (int j = 2; j <= k; ++j) {
    const double next = ((2.0 * j + dim - 4.0) * t * cur - (j - 1.0) * prev) / (j + dim - 3.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double funk_hecke_eigenvalue(const MercerSphereKernel& kernel, int k) {
  require(static_cast<bool>(kernel.psi), "funk_hecke_eigenvalue: missing psi");
  require(kernel.dim >= 2 && k >= 0, "funk_hecke_eigenvalue: need dim >= 2 and k >= 0");
  const int d = kernel.dim;
  // Substituting t = cos u turns the weight (1 - t^2)^((d-3)/2) dt into sin^(d-2) u du.
  ScalarFn integrand;
  if (d == 2) {
    integrand = [&kernel, k](double u) { return kernel.psi(std::cos(u)) * std::cos(k * u); };
  } else {
    integrand = [&kernel, k, d](double u) {
      const double t = std::cos(u);
      return kernel.psi(t) * legendre_polynomial(d, k, t) * std::pow(std::sin(u), d - 2);
    };
  }
  const int pieces = 8 * (k + 1);
  std::vector<double> bp(pieces + 1);
  for (int i = 0; i <= pieces; ++i) bp[i] = std::numbers::pi * i / pieces;
  return sphere_area(d - 1) * integrate_pieces(integrand, bp, kFunkHeckeTol);
}

Spectrum ground_truth_spectrum(const MercerSphereKernel& kernel) {
  std::vector<double> lambda;
  std::vector<double> mult;
  double peak = 0.0;
  int negligible_run = 0;
  const int max_degree = kernel.truncation > 0 ? kernel.truncation : kMaxAutoDegree;
  for (int k = 0; k <= max_degree; ++k) {
    const double l = funk_hecke_eigenvalue(kernel, k);
    const double nk = harmonic_multiplicity(kernel.dim, k);
    lambda.push_back(l);
    mult.push_back(nk);
    peak = std::max(peak, std::fabs(l));
    if (kernel.truncation > 0) continue;
    // Two consecutive negligible degrees end the series; one is not enough
    // since even or odd kernels vanish on every other degree.
    negligible_run = (std::fabs(l) * nk < kNegligibleRatio * peak) ? negligible_run + 1 : 0;
    if (negligible_run == 2) break;
  }
  std::vector<double> values;
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    if (std::fabs(lambda[k]) * mult[k] < kNegligibleRatio * peak || lambda[k] == 0.0) continue;
    for (int r = 0; r < static_cast<int>(mult[k]); ++r) values.push_back(lambda[k]);
  }
  return Spectrum::from_values(std::move(values));
}

KernelSpec sphere_kernel_spec(const MercerSphereKernel& kernel) {
  require(static_cast<bool>(kernel.psi), "sphere kernel: missing psi");
  double bound = 0.0;
  for (int i = 0; i <= 2000; ++i) bound = std::max(bound, std::fabs(kernel.psi(-1.0 + i / 1000.0)));
  ScalarFn psi = kernel.psi;
  return KernelSpec{
      [psi](std::span<const double> x, std::span<const double> y) {
        double dot = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
        return psi(std::clamp(dot, -1.0, 1.0));
      },
      bound, SphereDomain{kernel.dim}};
}

SpectrumRecord spectrum_experiment(const MercerSphereKernel& kernel, const ChainSpec& chain,
                                   std::size_t n, std::uint64_t seed, const Spectrum* truth) {
  require(n >= 2, "spectrum_experiment: need n >= 2");
  require(state_dim(chain) == static_cast<std::size_t>(kernel.dim) &&
              std::holds_alternative<SphereWalkChain>(chain),
          "spectrum_experiment: chain must live on the kernel's sphere");
  const Trajectory traj = sample_chain(chain, n, seed);
  const KernelMatrices mats = build_kernel_matrices(sphere_kernel_spec(kernel), traj);

  const Spectrum plain = symmetric_eigenvalues(mats.h_zero_diag);
  const Spectrum with_diag = symmetric_eigenvalues(mats.h_tilde);
  SpectrumRecord rec;
  rec.diag_shift_delta2 = delta2(with_diag, plain);
  rec.diag_shift_bound = mats.h_tilde.diagonal().norm();
  if (rec.diag_shift_delta2 > rec.diag_shift_bound * (1.0 + 1e-9) + 1e-12) {
    std::ostringstream msg;
    msg << "spectrum_experiment: Hoffman-Wielandt bound violated (" << rec.diag_shift_delta2
        << " > " << rec.diag_shift_bound << ")";
    fail(ErrorCode::kNumerical, msg.str());
  }

  const double area = sphere_area(kernel.dim);
  std::vector<double> scaled = plain.values;
  for (double& v : scaled) v *= area;
  rec.estimated = Spectrum::from_values(std::move(scaled));
  rec.truth = truth ? *truth : ground_truth_spectrum(kernel);
  const double d = delta2(rec.estimated, rec.truth);
  rec.delta2_sq = d * d;
  return rec;
}

}  // namespace ustat
