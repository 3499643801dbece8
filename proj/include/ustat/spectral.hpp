#ifndef USTAT_SPECTRAL_HPP_
#define USTAT_SPECTRAL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ustat/chains.hpp"
#include "ustat/quadrature.hpp"

namespace ustat {

struct IntervalDomain {
  double a = 0.0;
  double b = 1.0;
};

struct SphereDomain {
  int dim = 2;
};

using KernelDomain = std::variant<IntervalDomain, SphereDomain>;

using PairKernel = std::function<double(std::span<const double>, std::span<const double>)>;

/// Symmetric bounded kernel h on E x E.
struct KernelSpec {
  PairKernel h;
  double bound = 1.0;  // declared sup |h|
  KernelDomain domain = IntervalDomain{};
};

/// Spot-checks h(x, y) == h(y, x) on random pairs from the domain. Throws
/// Error(kInvalidArgument) on the first asymmetric pair.
void check_kernel_symmetry(const KernelSpec& kernel, std::uint64_t seed, int pairs = 1000,
                           double tol = 1e-12);

struct KernelMatrices {
  Eigen::MatrixXd h_tilde;      // h(X_i, X_j) / n
  Eigen::MatrixXd h_zero_diag;  // same with the diagonal set to 0
  std::size_t n = 0;
};

KernelMatrices build_kernel_matrices(const KernelSpec& kernel, const Trajectory& traj);

/// Real eigenvalues ordered by decreasing absolute value.
struct Spectrum {
  std::vector<double> values;

  static Spectrum from_values(std::vector<double> values);
  std::size_t size() const { return values.size(); }
};

enum class EigenMethod {
  kAuto,           // Jacobi up to kJacobiMaxDim, tridiagonal QR above
  kJacobi,         // cyclic Jacobi rotations
  kTridiagonalQr,  // Householder tridiagonalization + implicit QR (Eigen)
};

inline constexpr std::size_t kJacobiMaxDim = 160;

struct EigenDecomposition {
  Eigen::VectorXd values;   // unsorted, matching columns of `vectors`
  Eigen::MatrixXd vectors;  // orthonormal eigenvectors
  int sweeps = 0;
};

/// Cyclic Jacobi. Converges when the off-diagonal Frobenius norm falls below
/// tol * ||M||_F; throws Error(kConvergence) after `max_sweeps`.
EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& m, double tol = 1e-12, int max_sweeps = 30);

/// All eigenvalues of a symmetric matrix. Throws Error(kInvalidArgument) when
/// M is not symmetric within tol * ||M||_F (with tol floored at 1e-12).
Spectrum symmetric_eigenvalues(const Eigen::MatrixXd& m, double tol = 1e-12,
                               EigenMethod method = EigenMethod::kAuto);

/// l2 rearrangement distance between zero-padded sequences.
double delta2(std::span<const double> x, std::span<const double> y);
inline double delta2(const Spectrum& x, const Spectrum& y) { return delta2(x.values, y.values); }

/// Dot-product kernel h(x, y) = psi(x^T y) on the unit sphere of R^dim.
struct MercerSphereKernel {
  ScalarFn psi;
  int dim = 2;
  int truncation = 0;  // max harmonic degree; 0 selects it automatically
  std::string label;
};

/// Surface area of the unit sphere in R^dim.
double sphere_area(int dim);
/// Dimension of the space of degree-k spherical harmonics on the sphere of R^dim.
double harmonic_multiplicity(int dim, int k);
/// Legendre polynomial of degree k in dimension dim, normalized to P_k(1) = 1.
double legendre_polynomial(int dim, int k, double t);

/// Funk-Hecke eigenvalue of degree k (surface-measure normalization).
double funk_hecke_eigenvalue(const MercerSphereKernel& kernel, int k);

/// Nonzero Funk-Hecke eigenvalues, each repeated with its multiplicity.
Spectrum ground_truth_spectrum(const MercerSphereKernel& kernel);

KernelSpec sphere_kernel_spec(const MercerSphereKernel& kernel);

struct SpectrumRecord {
  Spectrum estimated;  // eigenvalues of H_n scaled to the surface measure
  Spectrum truth;
  double delta2_sq = 0.0;
  // delta2(lambda(H~_n), lambda(H_n)) and its Frobenius bound, unscaled.
  double diag_shift_delta2 = 0.0;
  double diag_shift_bound = 0.0;
};

/// Samples the chain, builds H_n, and compares its spectrum with the truth.
/// Estimated eigenvalues are multiplied by sphere_area(dim) so that they sit on
/// the same scale as funk_hecke_eigenvalue. Throws Error(kNumerical) if the
/// Hoffman-Wielandt bound between H~_n and H_n is violated.
SpectrumRecord spectrum_experiment(const MercerSphereKernel& kernel, const ChainSpec& chain,
                                   std::size_t n, std::uint64_t seed, const Spectrum* truth = nullptr);

}  // namespace ustat

#endif  // USTAT_SPECTRAL_HPP_
